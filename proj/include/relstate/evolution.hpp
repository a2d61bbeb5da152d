#pragma once

#include <functional>
#include <string>
#include <vector>

#include "relstate/chart.hpp"

namespace relstate::evolution {

// Single-axis evolution along the real parameter s = Re t.
struct EvolutionState {
  HermitianMatrix h;
  CMatrix hdot;
  double t = 0.0;
  double step = 0.0;
};

// The three pieces of the Gauss-Codazzi right-hand side,
//   d2h/dt2 = -2 [R + K K_ext - 2 K_ext h^-1 K_ext],
// with K_ext = hdot/2 and K = tr(h^-1 K_ext).
struct GcTerms {
  CMatrix ricci;      // -2 R
  CMatrix mean;       // -2 K K_ext
  CMatrix quadratic;  // +4 K_ext h^-1 K_ext

  CMatrix total() const { return ricci + mean + quadratic; }
};

GcTerms gc_terms(const HermitianMatrix& h, const CMatrix& hdot, const CMatrix& ricci);
CMatrix gc_rhs(const HermitianMatrix& h, const CMatrix& hdot, const CMatrix& ricci);

// Intrinsic Ricci curvature supplied per step, R(h, t).
using RicciSource = std::function<CMatrix(const HermitianMatrix& h, double t)>;

// R taken from an analytic metric field h(x, t) on one Space axis, evaluated
// by the geometry engine on a small patch of half-width `width` around x0.
RicciSource ricci_from_field(std::function<CMatrix(cplx x, double t)> field, cplx x0, double width = 2e-3);

struct TrajectoryRecord {
  double t = 0.0;
  CMatrix h;
  double residual = 0.0;  // relative three-point residual; NaN until three states exist
  double min_eigenvalue = 0.0;
  double hermiticity_drift = 0.0;
};

struct IntegratorOptions {
  Tolerances tol{};
  double residual_tol = 1e-5;
};

// Classical RK4 on (h, hdot). After each step h and hdot are re-Hermitized and
// h is checked for positivity; a failing step throws StepRejected with half
// the step as suggestion. The residual of the second-order equation is
// measured by a three-point difference over the last three accepted states.
class GaussCodazziIntegrator {
 public:
  explicit GaussCodazziIntegrator(RicciSource ricci, IntegratorOptions opts = {});

  void reset(const EvolutionState& initial);
  EvolutionState step(const EvolutionState& state);
  EvolutionState run(EvolutionState state, int steps);

  const std::vector<TrajectoryRecord>& trajectory() const { return records_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  double max_residual() const;
  double max_drift() const;

 private:
  RicciSource ricci_;
  IntegratorOptions opts_;
  std::vector<TrajectoryRecord> records_;
  std::vector<std::string> warnings_;
};

// Flat Laplacian 4 d d* per complex axis, i.e. the sum of second differences
// over all real directions, with periodic wrap. The chart must be periodic.
CVector laplacian(const CoordinateChart& chart, const CVector& f);

// Linearized metric mode: h is a field on the x-chart,
//   d2h/dt2 = Lap h + hdot h^-1 hdot - K hdot,  K = tr(h^-1 hdot)/2.
struct MetricFieldState {
  CoordinateChart chart;
  std::vector<CMatrix> h;
  std::vector<CMatrix> hdot;
  double t = 0.0;
};

std::vector<CMatrix> linearized_metric_rhs(const MetricFieldState& s);
MetricFieldState step_linearized_metric(const MetricFieldState& s, double dt, const Tolerances& tol = kDefaultTolerances);

// Ket mode: N wavefunctions on the x-chart with their t-derivatives.
struct KetField {
  CoordinateChart chart;
  std::vector<CVector> kets;
  std::vector<CVector> ket_dots;
  double t = 0.0;
};

enum class KetCoupling {
  Exact,    // hdot h^-1 applied to the ket velocities, hdot from the kets
  Carrier,  // the fast-carrier reduction of that term, -omega^2 X
};

struct KetModeOptions {
  KetCoupling coupling = KetCoupling::Exact;
  double omega = 0.0;
  // Prescribed K(t). When empty, K = tr(h^-1 hdot)/2 from the kets.
  std::function<cplx(double)> k_of_t;
};

// h(i,j) = <X_i|X_j> integrated over the chart (cell area measure).
HermitianMatrix ket_gram(const KetField& f);
CMatrix ket_gram_dot(const KetField& f);

// Second t-derivatives from
//   X'' + K X' = Lap X + (coupling term).
std::vector<CVector> ket_acceleration(const KetField& f, const KetModeOptions& opts);
KetField step_ket(const KetField& f, double dt, const KetModeOptions& opts);

}  // namespace relstate::evolution
