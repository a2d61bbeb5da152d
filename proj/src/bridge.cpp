#include "relstate/bridge.hpp"

#include <cmath>

namespace relstate::bridge {
namespace {

double measure(const CoordinateChart& chart) {
  double m = 1.0;
  for (std::size_t a = 0; a < chart.axis_count(); ++a) m *= chart.cell_area(a);
  return m;
}

CVector time_derivative(const KetSeries& e, std::size_t j) {
  const std::size_t n = e.size();
  require(n >= 3, ErrorKind::InvalidGrid, "time derivative needs at least three samples");
  require(j < n, ErrorKind::InvalidGrid, "sample index outside the series");
  const auto& s = e.samples;
  if (j == 0) return (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * e.dt);
  if (j == n - 1) return (3.0 * s[n - 1] - 4.0 * s[n - 2] + s[n - 3]) / (2.0 * e.dt);
  return (s[j + 1] - s[j - 1]) / (2.0 * e.dt);
}

CVector second_time_derivative(const KetSeries& e, std::size_t j) {
  const std::size_t n = e.size();
  require(n >= 4, ErrorKind::InvalidGrid, "second time derivative needs at least four samples");
  const auto& s = e.samples;
  const double h2 = e.dt * e.dt;
  if (j == 0) return (2.0 * s[0] - 5.0 * s[1] + 4.0 * s[2] - s[3]) / h2;
  if (j == n - 1) return (2.0 * s[n - 1] - 5.0 * s[n - 2] + 4.0 * s[n - 3] - s[n - 4]) / h2;
  return (s[j + 1] - 2.0 * s[j] + s[j - 1]) / h2;
}

cplx k_at(const KFunction& k, double t) { return k ? k(t) : cplx(0.0); }

Eigen::SparseMatrix<cplx> laplacian_matrix(const CoordinateChart& chart) {
  std::vector<Eigen::Triplet<cplx>> entries;
  for (int d = 0; d < chart.real_dims(); ++d) {
    require(chart.periodic(d), ErrorKind::InvalidGrid, "reference solver needs a periodic chart");
    const double inv = 1.0 / (chart.step(d) * chart.step(d));
    for (std::size_t n = 0; n < chart.node_count(); ++n) {
      const auto row = static_cast<int>(n);
      entries.emplace_back(row, row, -2.0 * inv);
      entries.emplace_back(row, static_cast<int>(chart.shift(n, d, 1)), inv);
      entries.emplace_back(row, static_cast<int>(chart.shift(n, d, -1)), inv);
    }
  }
  const auto size = static_cast<int>(chart.node_count());
  Eigen::SparseMatrix<cplx> lap(size, size);
  lap.setFromTriplets(entries.begin(), entries.end());
  return lap;
}

}  // namespace

double l2_norm(const CoordinateChart& chart, const CVector& f) { return std::sqrt(measure(chart)) * f.norm(); }

double l2_distance(const CoordinateChart& chart, const CVector& a, const CVector& b) {
  require(a.size() == b.size(), ErrorKind::InvalidInput, "wavefunctions differ in size");
  return l2_norm(chart, a - b);
}

CVector covariant_derivative(const KetSeries& e, const KFunction& k, std::size_t j) {
  return time_derivative(e, j) + 0.5 * k_at(k, e.time(j)) * e.samples[j];
}

SlowFastSplit SlowFastSplit::from_fast(const KetSeries& fast, double omega) {
  require(omega > 0.0, ErrorKind::InvalidInput, "carrier frequency must be positive");
  SlowFastSplit split;
  split.omega = omega;
  split.slow = fast;
  for (std::size_t j = 0; j < fast.size(); ++j) split.slow.samples[j] *= std::exp(I * omega * fast.time(j));
  return split;
}

KetSeries SlowFastSplit::reconstruct() const {
  KetSeries fast = slow;
  for (std::size_t j = 0; j < slow.size(); ++j) fast.samples[j] *= std::exp(-I * omega * slow.time(j));
  return fast;
}

double SlowFastSplit::slowness() const {
  double worst = 0.0;
  for (std::size_t j = 0; j < slow.size(); ++j) {
    const double norm = slow.samples[j].norm();
    if (norm == 0.0) continue;
    worst = std::max(worst, time_derivative(slow, j).norm() / (omega * norm));
  }
  return worst;
}

SchrodingerResidual schrodinger_residual(const SlowFastSplit& split, const KFunction& k) {
  SchrodingerResidual out;
  const auto& e = split.slow;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < e.size(); ++j) {
    const CVector r =
        I * covariant_derivative(e, k, j) + evolution::laplacian(e.chart, e.samples[j]) / (2.0 * split.omega);
    RVector mag = r.cwiseAbs();
    const double sq = mag.squaredNorm();
    out.rms_per_sample.push_back(mag.size() ? std::sqrt(sq / static_cast<double>(mag.size())) : 0.0);
    total += sq;
    count += static_cast<std::size_t>(mag.size());
    out.pointwise.push_back(std::move(mag));
  }
  out.rms = count ? std::sqrt(total / static_cast<double>(count)) : 0.0;
  return out;
}

double neglected_terms(const SlowFastSplit& split, const KFunction& k) {
  const auto& e = split.slow;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < e.size(); ++j) {
    const CVector term =
        (second_time_derivative(e, j) + k_at(k, e.time(j)) * time_derivative(e, j)) / (2.0 * split.omega);
    total += term.squaredNorm();
    count += static_cast<std::size_t>(term.size());
  }
  return count ? std::sqrt(total / static_cast<double>(count)) : 0.0;
}

ReferenceSchrodinger::ReferenceSchrodinger(CoordinateChart chart, double omega, double dt, RVector potential)
    : chart_(std::move(chart)), omega_(omega), dt_(dt) {
  require(omega > 0.0 && dt > 0.0, ErrorKind::InvalidInput, "reference solver needs positive omega and step");
  const auto size = static_cast<int>(chart_.node_count());
  if (potential.size() == 0) potential = RVector::Zero(size);
  require(potential.size() == size, ErrorKind::InvalidInput, "potential does not match the chart");
  Eigen::SparseMatrix<cplx> h = -laplacian_matrix(chart_) / (2.0 * omega);
  for (int n = 0; n < size; ++n) h.coeffRef(n, n) += potential(n);
  Eigen::SparseMatrix<cplx> id(size, size);
  id.setIdentity();
  const cplx half = 0.5 * I * dt;
  Eigen::SparseMatrix<cplx> lhs = id + half * h;
  rhs_ = id - half * h;
  lhs.makeCompressed();
  lhs_.compute(lhs);
  require(lhs_.info() == Eigen::Success, ErrorKind::InvalidInput, "reference factorization failed");
}

CVector ReferenceSchrodinger::step(const CVector& psi) const {
  const CVector b = rhs_ * psi;
  return lhs_.solve(b);
}

KetSeries ReferenceSchrodinger::run(const CVector& psi0, int samples, int record_every) const {
  require(samples >= 0 && record_every >= 1, ErrorKind::InvalidInput, "invalid sampling request");
  KetSeries out{chart_, 0.0, dt_ * record_every, {psi0}};
  CVector psi = psi0;
  for (int s = 0; s < samples; ++s) {
    for (int k = 0; k < record_every; ++k) psi = step(psi);
    out.samples.push_back(psi);
  }
  return out;
}

KetSeries run_carrier(const CoordinateChart& chart, const CVector& e0, const CarrierRunOptions& opts) {
  require(opts.omega > 0.0 && opts.dt > 0.0, ErrorKind::InvalidInput, "carrier run needs positive omega and step");
  evolution::KetModeOptions mode;
  mode.coupling = evolution::KetCoupling::Carrier;
  mode.omega = opts.omega;
  const KFunction k = opts.k;
  mode.k_of_t = [k](double t) { return k_at(k, t); };

  const CVector e0dot = I * evolution::laplacian(chart, e0) / (2.0 * opts.omega) - 0.5 * k_at(k, 0.0) * e0;
  evolution::KetField f{chart, {e0}, {-I * opts.omega * e0 + e0dot}, 0.0};
  KetSeries out{chart, 0.0, opts.dt * opts.record_every, {e0}};
  for (int s = 0; s < opts.samples; ++s) {
    for (int j = 0; j < opts.record_every; ++j) f = evolution::step_ket(f, opts.dt, mode);
    out.samples.push_back(f.kets[0]);
  }
  return out;
}

LimitReport limit_comparison(const KetSeries& fast, double omega, const KetSeries& reference, double slowness_ratio) {
  require(fast.chart.same_grid(reference.chart), ErrorKind::InvalidInput, "carrier run and reference use different charts");
  require(fast.size() == reference.size() && std::abs(fast.dt - reference.dt) <= 1e-12 * std::max(1.0, fast.dt) &&
              std::abs(fast.t0 - reference.t0) <= 1e-12,
          ErrorKind::InvalidInput, "carrier run and reference are sampled at different times");
  const auto split = SlowFastSplit::from_fast(fast, omega);
  LimitReport report;
  report.omega = omega;
  report.horizon = fast.size() ? fast.time(fast.size() - 1) - fast.t0 : 0.0;
  for (std::size_t j = 0; j < fast.size(); ++j) {
    report.distance.push_back(l2_distance(fast.chart, split.slow.samples[j], reference.samples[j]));
    report.max_l2 = std::max(report.max_l2, report.distance.back());
  }
  report.slowness = fast.size() >= 3 ? split.slowness() : 0.0;
  report.slowness_breach = report.slowness > slowness_ratio;
  return report;
}

double slope_vs_omega(const std::vector<LimitReport>& reports) {
  require(reports.size() >= 2, ErrorKind::InvalidInput, "slope needs at least two runs");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : reports) {
    require(r.omega > 0.0 && r.max_l2 > 0.0, ErrorKind::InvalidInput, "slope needs positive omega and distance");
    const double x = std::log(r.omega), y = std::log(r.max_l2);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(reports.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

GaussianFixture gaussian_fixture(double omega, const GaussianOptions& opts) {
  require(omega > 0.0, ErrorKind::InvalidInput, "carrier frequency must be positive");
  const double scale = 1.0 / std::sqrt(omega);
  ComplexAxis a;
  a.label = "x";
  a.role = AxisRole::Space;
  a.re_min = a.im_min = 0.0;
  a.re_max = a.im_max = opts.box * scale;
  a.re_count = a.im_count = opts.nodes;
  a.periodic = true;
  GaussianFixture fx{CoordinateChart({a}), {}};
  const auto& c = fx.chart;
  fx.e0 = CVector(c.node_count());
  const double mid = 0.5 * opts.box;
  for (std::size_t n = 0; n < c.node_count(); ++n) {
    const double u = c.real_coordinate(n, 0) / scale - mid;
    const double v = c.real_coordinate(n, 1) / scale - mid;
    fx.e0(n) = std::exp(-(u * u + v * v) / (2.0 * opts.width * opts.width)) * std::exp(I * opts.momentum * u);
  }
  fx.e0 /= l2_norm(c, fx.e0);
  return fx;
}

}  // namespace relstate::bridge
