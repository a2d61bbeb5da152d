#include "relstate/evolution.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "relstate/geometry.hpp"

namespace relstate::evolution {
namespace {

CMatrix solve(const CMatrix& h, const CMatrix& rhs) {
  Eigen::FullPivLU<CMatrix> lu(h);
  if (!lu.isInvertible()) fail(ErrorKind::DegenerateMetric, "metric is singular");
  return lu.solve(rhs);
}

double norm_inf(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

GcTerms gc_terms(const HermitianMatrix& h, const CMatrix& hdot, const CMatrix& ricci) {
  require(hdot.rows() == h.size() && hdot.cols() == h.size() && ricci.rows() == h.size() && ricci.cols() == h.size(),
          ErrorKind::InvalidInput, "Gauss-Codazzi inputs differ in dimension");
  const CMatrix kext = 0.5 * hdot;
  const CMatrix hinv_kext = solve(h.matrix(), kext);
  const cplx k = hinv_kext.trace();
  GcTerms out;
  out.ricci = -2.0 * ricci;
  out.mean = -2.0 * k * kext;
  out.quadratic = 4.0 * kext * hinv_kext;
  return out;
}

CMatrix gc_rhs(const HermitianMatrix& h, const CMatrix& hdot, const CMatrix& ricci) {
  return linalg::hermitize(gc_terms(h, hdot, ricci).total());
}

RicciSource ricci_from_field(std::function<CMatrix(cplx x, double t)> field, cplx x0, double width) {
  return [field = std::move(field), x0, width](const HermitianMatrix&, double t) -> CMatrix {
    ComplexAxis ax;
    ax.label = "x";
    ax.role = AxisRole::Space;
    ax.re_min = x0.real() - width;
    ax.re_max = x0.real() + width;
    ax.im_min = x0.imag() - width;
    ax.im_max = x0.imag() + width;
    ax.re_count = ax.im_count = 5;
    const CoordinateChart chart({ax});
    const auto h = MetricField::sample(chart, [&](std::span<const cplx> p) { return field(p[0], t); });
    const std::vector<int> centre{2, 2};
    return geometry::ricci(h, chart.node_at(centre)).matrix();
  };
}

GaussCodazziIntegrator::GaussCodazziIntegrator(RicciSource ricci, IntegratorOptions opts)
    : ricci_(std::move(ricci)), opts_(opts) {}

void GaussCodazziIntegrator::reset(const EvolutionState& initial) {
  records_.clear();
  warnings_.clear();
  TrajectoryRecord r;
  r.t = initial.t;
  r.h = initial.h.matrix();
  r.residual = std::numeric_limits<double>::quiet_NaN();
  r.min_eigenvalue = initial.h.min_eigenvalue();
  r.hermiticity_drift = initial.h.drift();
  records_.push_back(std::move(r));
}

EvolutionState GaussCodazziIntegrator::step(const EvolutionState& s) {
  require(s.step > 0.0, ErrorKind::InvalidInput, "step must be positive");
  if (records_.empty()) reset(s);
  const double dt = s.step;

  auto accel = [&](const CMatrix& h, const CMatrix& hd, double t) {
    // Intermediate stages are symmetrized without a drift check.
    const HermitianMatrix hh = HermitianMatrix::from(h, std::numeric_limits<double>::infinity());
    return gc_rhs(hh, hd, ricci_(hh, t));
  };

  const CMatrix& h0 = s.h.matrix();
  const CMatrix& v0 = s.hdot;
  CMatrix k1h, k1v, k2h, k2v, k3h, k3v, k4h, k4v;
  try {
    k1h = v0;
    k1v = accel(h0, v0, s.t);
    k2h = v0 + 0.5 * dt * k1v;
    k2v = accel(h0 + 0.5 * dt * k1h, k2h, s.t + 0.5 * dt);
    k3h = v0 + 0.5 * dt * k2v;
    k3v = accel(h0 + 0.5 * dt * k2h, k3h, s.t + 0.5 * dt);
    k4h = v0 + dt * k3v;
    k4v = accel(h0 + dt * k3h, k4h, s.t + dt);
  } catch (const Error& e) {
    throw StepRejected(std::string("stage evaluation failed: ") + e.what(), 0.5 * dt);
  }
  const CMatrix h1 = h0 + dt / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
  const CMatrix v1 = v0 + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  if (!h1.allFinite() || !v1.allFinite()) throw StepRejected("non-finite state after step", 0.5 * dt);

  double drift_h = 0.0, drift_v = 0.0;
  CMatrix hs = linalg::hermitize(h1, &drift_h);
  CMatrix vs = linalg::hermitize(v1, &drift_v);
  const double scale = std::max(1.0, norm_inf(h1));
  if (drift_h > opts_.tol.hermiticity * scale || drift_v > opts_.tol.hermiticity * std::max(1.0, norm_inf(v1)))
    throw StepRejected("Hermiticity drift beyond tolerance", 0.5 * dt);

  EvolutionState out;
  out.h = HermitianMatrix::from(hs);
  const double lo = out.h.min_eigenvalue();
  if (!(lo > opts_.tol.pd_floor)) {
    std::ostringstream msg;
    msg << "positivity lost at t=" << s.t + dt << " (min eigenvalue " << lo << ")";
    throw StepRejected(msg.str(), 0.5 * dt);
  }
  out.hdot = std::move(vs);
  out.t = s.t + dt;
  out.step = dt;

  TrajectoryRecord rec;
  rec.t = out.t;
  rec.h = out.h.matrix();
  rec.min_eigenvalue = lo;
  rec.hermiticity_drift = std::max(drift_h, drift_v);
  rec.residual = std::numeric_limits<double>::quiet_NaN();
  if (records_.size() >= 2) {
    const auto& mid = records_.back();
    const auto& old = records_[records_.size() - 2];
    const CMatrix fd = (rec.h - 2.0 * mid.h + old.h) / (dt * dt);
    const HermitianMatrix hm = HermitianMatrix::from(mid.h, std::numeric_limits<double>::infinity());
    const CMatrix hd_mid = (rec.h - old.h) / (2.0 * dt);
    const CMatrix rhs = gc_rhs(hm, hd_mid, ricci_(hm, mid.t));
    const double denom = std::max({norm_inf(rhs), norm_inf(hd_mid), norm_inf(mid.h)});
    rec.residual = norm_inf(fd - rhs) / denom;
    if (rec.residual > opts_.residual_tol) {
      std::ostringstream msg;
      msg << "residual " << rec.residual << " above " << opts_.residual_tol << " at t=" << mid.t;
      warnings_.push_back(msg.str());
    }
  }
  records_.push_back(std::move(rec));
  return out;
}

EvolutionState GaussCodazziIntegrator::run(EvolutionState state, int steps) {
  reset(state);
  for (int i = 0; i < steps; ++i) state = step(state);
  return state;
}

double GaussCodazziIntegrator::max_residual() const {
  double worst = 0.0;
  for (const auto& r : records_)
    if (!std::isnan(r.residual)) worst = std::max(worst, r.residual);
  return worst;
}

double GaussCodazziIntegrator::max_drift() const {
  double worst = 0.0;
  for (const auto& r : records_) worst = std::max(worst, r.hermiticity_drift);
  return worst;
}

CVector laplacian(const CoordinateChart& chart, const CVector& f) {
  require(static_cast<std::size_t>(f.size()) == chart.node_count(), ErrorKind::InvalidInput,
          "wavefunction size does not match the chart");
  for (int d = 0; d < chart.real_dims(); ++d)
    require(chart.periodic(d), ErrorKind::InvalidGrid, "ket and metric-field Laplacians need a periodic chart");
  CVector out = CVector::Zero(f.size());
  for (int d = 0; d < chart.real_dims(); ++d) {
    const double inv = 1.0 / (chart.step(d) * chart.step(d));
    for (std::size_t n = 0; n < chart.node_count(); ++n)
      out(n) += (f(chart.shift(n, d, 1)) - 2.0 * f(n) + f(chart.shift(n, d, -1))) * inv;
  }
  return out;
}

std::vector<CMatrix> linearized_metric_rhs(const MetricFieldState& s) {
  const auto& chart = s.chart;
  require(s.h.size() == chart.node_count() && s.hdot.size() == chart.node_count(), ErrorKind::InvalidInput,
          "metric field state does not match the chart");
  for (int d = 0; d < chart.real_dims(); ++d)
    require(chart.periodic(d), ErrorKind::InvalidGrid, "metric-field Laplacian needs a periodic chart");
  std::vector<CMatrix> out(chart.node_count());
  for (std::size_t n = 0; n < chart.node_count(); ++n) {
    CMatrix lap = CMatrix::Zero(s.h[n].rows(), s.h[n].cols());
    for (int d = 0; d < chart.real_dims(); ++d)
      lap += (s.h[chart.shift(n, d, 1)] - 2.0 * s.h[n] + s.h[chart.shift(n, d, -1)]) / (chart.step(d) * chart.step(d));
    const CMatrix hinv_hdot = solve(s.h[n], s.hdot[n]);
    const cplx k = 0.5 * hinv_hdot.trace();
    out[n] = linalg::hermitize(lap + s.hdot[n] * hinv_hdot - k * s.hdot[n]);
  }
  return out;
}

MetricFieldState step_linearized_metric(const MetricFieldState& s, double dt, const Tolerances& tol) {
  require(dt > 0.0, ErrorKind::InvalidInput, "step must be positive");
  const std::size_t n = s.h.size();
  auto axpy = [&](const std::vector<CMatrix>& a, double c, const std::vector<CMatrix>& b) {
    std::vector<CMatrix> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + c * b[i];
    return out;
  };
  auto stage = [&](const std::vector<CMatrix>& h, const std::vector<CMatrix>& v, double t) {
    MetricFieldState tmp{s.chart, h, v, t};
    return linearized_metric_rhs(tmp);
  };
  std::vector<CMatrix> k1h, k1v, k2h, k2v, k3h, k3v, k4h, k4v;
  try {
    k1h = s.hdot;
    k1v = stage(s.h, s.hdot, s.t);
    k2h = axpy(s.hdot, 0.5 * dt, k1v);
    k2v = stage(axpy(s.h, 0.5 * dt, k1h), k2h, s.t + 0.5 * dt);
    k3h = axpy(s.hdot, 0.5 * dt, k2v);
    k3v = stage(axpy(s.h, 0.5 * dt, k2h), k3h, s.t + 0.5 * dt);
    k4h = axpy(s.hdot, dt, k3v);
    k4v = stage(axpy(s.h, dt, k3h), k4h, s.t + dt);
  } catch (const Error& e) {
    throw StepRejected(std::string("stage evaluation failed: ") + e.what(), 0.5 * dt);
  }
  MetricFieldState out{s.chart, std::vector<CMatrix>(n), std::vector<CMatrix>(n), s.t + dt};
  for (std::size_t i = 0; i < n; ++i) {
    const CMatrix h1 = s.h[i] + dt / 6.0 * (k1h[i] + 2.0 * k2h[i] + 2.0 * k3h[i] + k4h[i]);
    const CMatrix v1 = s.hdot[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
    if (!h1.allFinite() || !v1.allFinite()) throw StepRejected("non-finite state after step", 0.5 * dt);
    double drift = 0.0;
    out.h[i] = linalg::hermitize(h1, &drift);
    if (drift > tol.hermiticity * std::max(1.0, norm_inf(h1)))
      throw StepRejected("Hermiticity drift beyond tolerance", 0.5 * dt);
    out.hdot[i] = linalg::hermitize(v1);
    const double lo = HermitianMatrix::from(out.h[i]).min_eigenvalue();
    if (!(lo > tol.pd_floor)) throw StepRejected("positivity lost in metric field", 0.5 * dt);
  }
  return out;
}

HermitianMatrix ket_gram(const KetField& f) {
  const auto n = static_cast<Eigen::Index>(f.kets.size());
  double measure = 1.0;
  for (std::size_t a = 0; a < f.chart.axis_count(); ++a) measure *= f.chart.cell_area(a);
  CMatrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = measure * f.kets[i].dot(f.kets[j]);
  return HermitianMatrix::from(g);
}

CMatrix ket_gram_dot(const KetField& f) {
  const auto n = static_cast<Eigen::Index>(f.kets.size());
  double measure = 1.0;
  for (std::size_t a = 0; a < f.chart.axis_count(); ++a) measure *= f.chart.cell_area(a);
  CMatrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      g(i, j) = measure * (f.ket_dots[i].dot(f.kets[j]) + f.kets[i].dot(f.ket_dots[j]));
  return g;
}

std::vector<CVector> ket_acceleration(const KetField& f, const KetModeOptions& opts) {
  require(!f.kets.empty() && f.kets.size() == f.ket_dots.size(), ErrorKind::InvalidInput,
          "ket field needs matching kets and velocities");
  const std::size_t n = f.kets.size();
  cplx k = 0.0;
  CMatrix coupling;  // (hdot h^-1)(i, l)
  const bool need_metric = opts.coupling == KetCoupling::Exact || !opts.k_of_t;
  if (need_metric) {
    const HermitianMatrix h = ket_gram(f);
    const CMatrix hdot = ket_gram_dot(f);
    const CMatrix hinv_hdot = solve(h.matrix(), hdot);
    if (!opts.k_of_t) k = 0.5 * hinv_hdot.trace();
    // hdot h^-1 = (h^-1 hdot)^dagger for Hermitian h and hdot
    coupling = hinv_hdot.adjoint();
  }
  if (opts.k_of_t) k = opts.k_of_t(f.t);

  std::vector<CVector> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = laplacian(f.chart, f.kets[i]) - k * f.ket_dots[i];
    if (opts.coupling == KetCoupling::Exact) {
      for (std::size_t l = 0; l < n; ++l) out[i] += coupling(i, l) * f.ket_dots[l];
    } else {
      out[i] -= opts.omega * opts.omega * f.kets[i];
    }
  }
  return out;
}

KetField step_ket(const KetField& f, double dt, const KetModeOptions& opts) {
  require(dt > 0.0, ErrorKind::InvalidInput, "step must be positive");
  const std::size_t n = f.kets.size();
  auto shifted = [&](const KetField& base, double c, const std::vector<CVector>& dx, const std::vector<CVector>& dv,
                     double dtime) {
    KetField out{base.chart, base.kets, base.ket_dots, base.t + dtime};
    for (std::size_t i = 0; i < n; ++i) {
      out.kets[i] += c * dx[i];
      out.ket_dots[i] += c * dv[i];
    }
    return out;
  };
  const auto k1x = f.ket_dots;
  const auto k1v = ket_acceleration(f, opts);
  const KetField s2 = shifted(f, 0.5 * dt, k1x, k1v, 0.5 * dt);
  const auto k2x = s2.ket_dots;
  const auto k2v = ket_acceleration(s2, opts);
  const KetField s3 = shifted(f, 0.5 * dt, k2x, k2v, 0.5 * dt);
  const auto k3x = s3.ket_dots;
  const auto k3v = ket_acceleration(s3, opts);
  const KetField s4 = shifted(f, dt, k3x, k3v, dt);
  const auto k4x = s4.ket_dots;
  const auto k4v = ket_acceleration(s4, opts);

  KetField out{f.chart, f.kets, f.ket_dots, f.t + dt};
  for (std::size_t i = 0; i < n; ++i) {
    out.kets[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
    out.ket_dots[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
    if (!out.kets[i].allFinite() || !out.ket_dots[i].allFinite())
      throw StepRejected("non-finite ket after step", 0.5 * dt);
  }
  return out;
}

}  // namespace relstate::evolution
