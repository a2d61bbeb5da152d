#pragma once

#include <functional>
#include <vector>

#include <Eigen/SparseLU>

#include "relstate/evolution.hpp"

namespace relstate::bridge {

// A wavefunction on the x-chart sampled at t0, t0 + dt, ...
struct KetSeries {
  CoordinateChart chart;
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<CVector> samples;

  double time(std::size_t j) const { return t0 + dt * static_cast<double>(j); }
  std::size_t size() const { return samples.size(); }
};

using KFunction = std::function<cplx(double)>;

// L2 norm and distance with the chart's area measure.
double l2_norm(const CoordinateChart& chart, const CVector& f);
double l2_distance(const CoordinateChart& chart, const CVector& a, const CVector& b);

// De/Dt = de/dt + K e / 2 at sample j. The time derivative is second-order
// central, one-sided at the two ends of the series.
CVector covariant_derivative(const KetSeries& e, const KFunction& k, std::size_t j);

// X = exp(-i omega t) e. The slow part is obtained by dividing out the known
// carrier; omega is an input and is never estimated from the data.
struct SlowFastSplit {
  double omega = 0.0;
  KetSeries slow;

  static SlowFastSplit from_fast(const KetSeries& fast, double omega);
  KetSeries reconstruct() const;
  // max over samples of |de/dt| / (omega |e|)
  double slowness() const;
};

struct SchrodingerResidual {
  std::vector<RVector> pointwise;    // |i De/Dt + Lap e / (2 omega)| per node
  std::vector<double> rms_per_sample;
  double rms = 0.0;
};

SchrodingerResidual schrodinger_residual(const SlowFastSplit& split, const KFunction& k = {});

// RMS of the terms dropped in passing from the carrier equation to the
// first-order one, (e'' + K e') / (2 omega).
double neglected_terms(const SlowFastSplit& split, const KFunction& k = {});

// Implicit midpoint (Crank-Nicolson) integrator for
//   i dpsi/dt = -Lap psi / (2 omega) + V psi
// on a periodic chart. The Cayley form keeps the norm for any step.
class ReferenceSchrodinger {
 public:
  ReferenceSchrodinger(CoordinateChart chart, double omega, double dt, RVector potential = {});

  CVector step(const CVector& psi) const;
  // record_every steps between stored samples; samples + 1 entries including psi0.
  KetSeries run(const CVector& psi0, int samples, int record_every) const;

  const CoordinateChart& chart() const { return chart_; }
  double omega() const { return omega_; }
  double dt() const { return dt_; }

 private:
  CoordinateChart chart_;
  double omega_;
  double dt_;
  Eigen::SparseMatrix<cplx> rhs_;
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lhs_;
};

struct CarrierRunOptions {
  double omega = 1.0;
  double dt = 1e-3;
  int samples = 10;
  int record_every = 10;
  KFunction k;  // empty means K = 0
};

// Integrates the carrier form of the ket equation,
//   X'' + K X' = Lap X - omega^2 X,
// from X = e0 and X' = -i omega e0 + e0', with e0' taken from the first-order
// equation so the run starts on the slow branch. Returns the fast kets.
KetSeries run_carrier(const CoordinateChart& chart, const CVector& e0, const CarrierRunOptions& opts);

struct LimitReport {
  double omega = 0.0;
  double horizon = 0.0;
  std::vector<double> distance;
  double max_l2 = 0.0;
  double slowness = 0.0;
  bool slowness_breach = false;
};

// L2 distance between the extracted slow part of a carrier run and the
// reference solution at matching samples.
LimitReport limit_comparison(const KetSeries& fast, double omega, const KetSeries& reference,
                             double slowness_ratio = 0.1);

// Least-squares slope of log(max_l2) against log(omega).
double slope_vs_omega(const std::vector<LimitReport>& reports);

// Gaussian packet on a periodic chart whose lengths scale as 1/sqrt(omega).
// In the scaled coordinate the slow dynamics does not depend on omega, while
// the gap to the carrier equation falls as 1/omega.
struct GaussianFixture {
  CoordinateChart chart;
  CVector e0;
};

struct GaussianOptions {
  int nodes = 32;          // per real direction
  double box = 16.0;       // scaled box length
  double width = 1.5;      // scaled packet width
  double momentum = 1.0;   // scaled momentum along Re x
};

GaussianFixture gaussian_fixture(double omega, const GaussianOptions& opts = {});

}  // namespace relstate::bridge
