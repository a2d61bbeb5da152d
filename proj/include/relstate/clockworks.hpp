#pragma once

#include <vector>

#include "relstate/linalg.hpp"

namespace relstate::clock {

enum class Kinetic {
  Stencil,      // 3-point Laplacian in a box with hard walls
  SpectralRing  // exact k^2 / 2m on a periodic ring
};

enum class ClockMode {
  Ideal,   // H_T = p_T, spectral first derivative on the clock ring
  Massive  // H_T = p_T^2 / (2 m_T) + offset
};

// Object x on [x_min, x_max] (box: interior nodes only, walls outside; ring:
// x_max identified with x_min) and a clock pointer T on a periodic ring
// [0, t_span).
struct ClockSystemModel {
  int x_count = 64;
  double x_min = -10.0;
  double x_max = 10.0;
  Kinetic kinetic = Kinetic::Stencil;
  double m_x = 1.0;
  RVector potential;  // samples on the x grid; empty means V = 0

  int t_count = 64;
  double t_span = 1.0;
  ClockMode clock = ClockMode::Ideal;
  double m_t = 1.0;
  double clock_offset = 0.0;  // constant added to H_T in massive mode

  double dx() const;
  double dt() const { return t_span / t_count; }
  double x_at(int i) const;
  double t_at(int j) const { return dt() * j; }
  void validate() const;
};

struct Hamiltonians {
  HermitianMatrix h_x;
  HermitianMatrix h_t;
};

Hamiltonians build_hamiltonians(const ClockSystemModel& model);

// Psi on the product grid, index i_x + x_count * j_t.
struct ConstraintSolution {
  CVector psi;
  int x_count = 0;
  int t_count = 0;
  double constraint_residual = 0.0;  // |(H_X + H_T) Psi| / |Psi|
  double mean_energy = 0.0;          // <Psi|(H_X + H_T)|Psi> / <Psi|Psi>
  double eigenvalue = 0.0;           // generic mode: the total-energy eigenvalue used
  int zero_modes = 1;                // generic mode: modes tied for nearest to zero
  bool within_tolerance = false;     // constraint_residual <= wd_tol

  CVector slice(int j) const { return psi.segment(static_cast<Eigen::Index>(j) * x_count, x_count); }
};

struct ConstraintOptions {
  double wd_tol = 1e-8;
  double zero_window = -1.0;  // negative: three mean level spacings of H_X + H_T
  double commensurate_tol = 1e-9;
};

// Ideal clock: the history state built from psi0. Every energy component of
// psi0 must complete whole turns over the clock ring and stay below the clock
// band limit, otherwise the state cannot solve the discrete constraint and
// InvalidInput is thrown.
ConstraintSolution solve_constraint(const ClockSystemModel& model, const CVector& psi0,
                                    const ConstraintOptions& opts = {});

// Generic mode: eigenvector of H_X + H_T nearest to zero, from the product of
// the two separate eigenbases. NoZeroMode when nothing lies within the window.
ConstraintSolution solve_constraint(const ClockSystemModel& model, const ConstraintOptions& opts = {});

// (H_X + H_T) Psi without assembling the product operator.
CVector apply_total(const Hamiltonians& h, const CVector& psi);

// Delta conditioning on the clock reading T_value (must be a clock node),
// renormalized. A zero slice throws UndefinedConditional.
CVector condition_on_clock(const ConstraintSolution& sol, const ClockSystemModel& model, double t_value);

// Conditioning on a Gaussian clock window of width sigma about t_centre
// (periodic distance on the ring), renormalized.
CVector condition_on_window(const ConstraintSolution& sol, const ClockSystemModel& model, double t_centre,
                            double sigma);

// |<a|b>|^2 / (|a|^2 |b|^2)
double fidelity(const CVector& a, const CVector& b);

// Exact propagation exp(-i H t) psi through the eigenbasis of H.
CVector propagate(const HermitianMatrix& h, const CVector& psi, double t);

// psi0 restricted to H_X eigencomponents whose energies are commensurate with
// the clock ring and inside its band. Useful for building ideal-clock fixtures.
CVector band_limit(const ClockSystemModel& model, const CVector& psi0, double tol = 1e-9);

struct Reduction {
  double effective_mass = 0.0;  // M_X = m_X * rate
  double lapse = 0.0;           // |d tau / dT| = 1 / rate
  HermitianMatrix h_reduced;    // generator in clock time, lapse * H_X
};

// Clock advancing at `rate` = d<T>/d tau. Propagating for proper time tau
// under H_X equals propagating for clock span rate * tau under h_reduced.
Reduction semiclassical_reduction(const ClockSystemModel& model, double rate);

}  // namespace relstate::clock
