#include "relstate/clockworks.hpp"
#include "relstate/error.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <limits>

namespace relstate::clock {
namespace {

// Signed FFT-ordered wave number of mode j on a ring of n nodes and length len.
double wave_number(int j, int n, double len) {
  const int s = (j < (n + 1) / 2) ? j : j - n;
  return 2.0 * M_PI * s / len;
}

bool is_nyquist(int j, int n) { return n % 2 == 0 && j == n / 2; }

// Dense operator sum_k f(k) |k><k| on a ring in the position basis.
CMatrix ring_operator(int n, double len, const std::function<double(int)>& symbol) {
  const double h = len / n;
  CMatrix out = CMatrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const double s = symbol(j);
    if (s == 0.0) continue;
    const double k = wave_number(j, n, len);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) out(a, b) += s * std::exp(I * k * h * static_cast<double>(a - b));
  }
  return out / static_cast<double>(n);
}

// Clock winding number of an energy, E t_span / 2 pi.
double winding(const ClockSystemModel& model, double energy) { return energy * model.t_span / (2.0 * M_PI); }

bool in_band(const ClockSystemModel& model, double energy, double tol) {
  const double q = winding(model, energy);
  const double r = std::round(q);
  return std::abs(q - r) <= tol * std::max(1.0, std::abs(q)) && 2.0 * std::abs(r) < model.t_count;
}

double periodic_distance(double a, double b, double span) {
  double d = std::fmod(std::abs(a - b), span);
  return std::min(d, span - d);
}

ConstraintSolution finish(const Hamiltonians& h, const ClockSystemModel& model, CVector psi, double wd_tol) {
  ConstraintSolution sol;
  sol.x_count = model.x_count;
  sol.t_count = model.t_count;
  const double norm2 = psi.squaredNorm();
  require(norm2 > 0.0, ErrorKind::InvalidInput, "constraint solution is the zero vector");
  const CVector hpsi = apply_total(h, psi);
  sol.constraint_residual = hpsi.norm() / std::sqrt(norm2);
  sol.mean_energy = psi.dot(hpsi).real() / norm2;
  sol.within_tolerance = sol.constraint_residual <= wd_tol;
  sol.psi = std::move(psi);
  return sol;
}

}  // namespace

double ClockSystemModel::dx() const {
  return kinetic == Kinetic::Stencil ? (x_max - x_min) / (x_count + 1) : (x_max - x_min) / x_count;
}

double ClockSystemModel::x_at(int i) const {
  return kinetic == Kinetic::Stencil ? x_min + dx() * (i + 1) : x_min + dx() * i;
}

void ClockSystemModel::validate() const {
  require(x_count >= 2 && t_count >= 2, ErrorKind::InvalidInput, "clock model grids need at least two nodes");
  require(x_max > x_min && t_span > 0.0, ErrorKind::InvalidInput, "clock model grids need positive extent");
  require(m_x > 0.0, ErrorKind::InvalidInput, "object mass must be positive");
  require(clock == ClockMode::Ideal || m_t > 0.0, ErrorKind::InvalidInput, "clock mass must be positive");
  require(potential.size() == 0 || potential.size() == x_count, ErrorKind::InvalidInput,
          "potential does not match the x grid");
  require(potential.size() == 0 || potential.allFinite(), ErrorKind::InvalidInput, "potential is not finite");
}

Hamiltonians build_hamiltonians(const ClockSystemModel& model) {
  model.validate();
  const int nx = model.x_count;
  CMatrix hx;
  if (model.kinetic == Kinetic::Stencil) {
    const double c = 1.0 / (2.0 * model.m_x * model.dx() * model.dx());
    hx = CMatrix::Zero(nx, nx);
    for (int i = 0; i < nx; ++i) {
      hx(i, i) = 2.0 * c;
      if (i + 1 < nx) hx(i, i + 1) = hx(i + 1, i) = -c;
    }
  } else {
    const double len = model.x_max - model.x_min;
    hx = ring_operator(nx, len, [&](int j) {
      const double k = wave_number(j, nx, len);
      return k * k / (2.0 * model.m_x);
    });
  }
  if (model.potential.size() != 0) hx.diagonal() += model.potential.cast<cplx>();

  const int nt = model.t_count;
  CMatrix ht;
  if (model.clock == ClockMode::Ideal) {
    // Nyquist mode dropped so the derivative stays antisymmetric
    ht = ring_operator(nt, model.t_span,
                       [&](int j) { return is_nyquist(j, nt) ? 0.0 : wave_number(j, nt, model.t_span); });
  } else {
    ht = ring_operator(nt, model.t_span, [&](int j) {
      const double k = wave_number(j, nt, model.t_span);
      return k * k / (2.0 * model.m_t);
    });
    ht.diagonal().array() += model.clock_offset;
  }
  return {HermitianMatrix::from(linalg::hermitize(hx)), HermitianMatrix::from(linalg::hermitize(ht))};
}

CVector apply_total(const Hamiltonians& h, const CVector& psi) {
  const Eigen::Index nx = h.h_x.size(), nt = h.h_t.size();
  require(psi.size() == nx * nt, ErrorKind::InvalidInput, "state does not match the product grid");
  const Eigen::Map<const CMatrix> x(psi.data(), nx, nt);
  CVector out(psi.size());
  Eigen::Map<CMatrix> y(out.data(), nx, nt);
  y = h.h_x.matrix() * x + x * h.h_t.matrix().transpose();
  return out;
}

CVector propagate(const HermitianMatrix& h, const CVector& psi, double t) {
  const auto eig = linalg::eigh(h);
  const CVector c = eig.vectors.adjoint() * psi;
  CVector phased(c.size());
  for (Eigen::Index n = 0; n < c.size(); ++n) phased(n) = std::exp(-I * eig.values(n) * t) * c(n);
  return eig.vectors * phased;
}

CVector band_limit(const ClockSystemModel& model, const CVector& psi0, double tol) {
  const auto h = build_hamiltonians(model);
  require(psi0.size() == model.x_count, ErrorKind::InvalidInput, "initial state does not match the x grid");
  const auto eig = linalg::eigh(h.h_x);
  CVector c = eig.vectors.adjoint() * psi0;
  for (Eigen::Index n = 0; n < c.size(); ++n)
    if (!in_band(model, eig.values(n), tol)) c(n) = 0.0;
  return eig.vectors * c;
}

ConstraintSolution solve_constraint(const ClockSystemModel& model, const CVector& psi0, const ConstraintOptions& opts) {
  require(model.clock == ClockMode::Ideal, ErrorKind::InvalidInput, "history-state construction needs the ideal clock");
  require(psi0.size() == model.x_count && psi0.norm() > 0.0, ErrorKind::InvalidInput,
          "initial state does not match the x grid");
  const auto h = build_hamiltonians(model);
  const auto eig = linalg::eigh(h.h_x);
  const CVector c = eig.vectors.adjoint() * psi0;
  const double floor = 1e-12 * psi0.norm();
  for (Eigen::Index n = 0; n < c.size(); ++n) {
    if (std::abs(c(n)) <= floor) continue;
    require(in_band(model, eig.values(n), opts.commensurate_tol), ErrorKind::InvalidInput,
            "initial state has an energy component that does not wind an integer number of times around the clock "
            "ring within its band (E = " + std::to_string(eig.values(n)) + ")");
  }
  const int nx = model.x_count, nt = model.t_count;
  CVector psi(static_cast<Eigen::Index>(nx) * nt);
  CVector phased(c.size());
  for (int j = 0; j < nt; ++j) {
    const double t = model.t_at(j);
    for (Eigen::Index n = 0; n < c.size(); ++n) phased(n) = std::exp(-I * eig.values(n) * t) * c(n);
    psi.segment(static_cast<Eigen::Index>(j) * nx, nx) = eig.vectors * phased;
  }
  auto sol = finish(h, model, std::move(psi), opts.wd_tol);
  sol.eigenvalue = 0.0;
  return sol;
}

ConstraintSolution solve_constraint(const ClockSystemModel& model, const ConstraintOptions& opts) {
  const auto h = build_hamiltonians(model);
  const auto ex = linalg::eigh(h.h_x);
  const auto et = linalg::eigh(h.h_t);
  double best = std::numeric_limits<double>::infinity();
  Eigen::Index bn = 0, bm = 0;
  for (Eigen::Index n = 0; n < ex.values.size(); ++n)
    for (Eigen::Index m = 0; m < et.values.size(); ++m) {
      const double e = std::abs(ex.values(n) + et.values(m));
      if (e < best) {
        best = e;
        bn = n;
        bm = m;
      }
    }
  const double lo = ex.values.minCoeff() + et.values.minCoeff();
  const double hi = ex.values.maxCoeff() + et.values.maxCoeff();
  const double count = static_cast<double>(ex.values.size() * et.values.size());
  const double window = opts.zero_window >= 0.0 ? opts.zero_window : 3.0 * (hi - lo) / std::max(1.0, count - 1.0);
  if (best > window)
    fail(ErrorKind::NoZeroMode, "nearest total-energy eigenvalue is " + std::to_string(best) +
                                    " away from zero, outside the window " + std::to_string(window));
  int ties = 0;
  const double tie_tol = 1e-9 * std::max(1.0, hi - lo);
  for (Eigen::Index n = 0; n < ex.values.size(); ++n)
    for (Eigen::Index m = 0; m < et.values.size(); ++m)
      if (std::abs(std::abs(ex.values(n) + et.values(m)) - best) <= tie_tol) ++ties;

  const int nx = model.x_count, nt = model.t_count;
  CVector psi(static_cast<Eigen::Index>(nx) * nt);
  for (int j = 0; j < nt; ++j) psi.segment(static_cast<Eigen::Index>(j) * nx, nx) = ex.vectors.col(bn) * et.vectors(j, bm);
  auto sol = finish(h, model, std::move(psi), opts.wd_tol);
  sol.eigenvalue = ex.values(bn) + et.values(bm);
  sol.zero_modes = ties;
  return sol;
}

CVector condition_on_clock(const ConstraintSolution& sol, const ClockSystemModel& model, double t_value) {
  const double u = std::fmod(t_value, model.t_span) / model.dt();
  const double wrapped = u < 0 ? u + model.t_count : u;
  const double r = std::round(wrapped);
  require(std::abs(wrapped - r) <= 1e-9, ErrorKind::InvalidInput, "clock reading is not on the clock grid");
  const int j = static_cast<int>(r) % model.t_count;
  CVector s = sol.slice(j);
  const double n = s.norm();
  if (n == 0.0) fail(ErrorKind::UndefinedConditional, "clock slice has zero norm");
  return s / n;
}

CVector condition_on_window(const ConstraintSolution& sol, const ClockSystemModel& model, double t_centre,
                            double sigma) {
  require(sigma > 0.0, ErrorKind::InvalidInput, "window width must be positive");
  CVector acc = CVector::Zero(sol.x_count);
  for (int j = 0; j < sol.t_count; ++j) {
    const double d = periodic_distance(model.t_at(j), t_centre, model.t_span);
    acc += std::exp(-d * d / (2.0 * sigma * sigma)) * sol.slice(j);
  }
  const double n = acc.norm();
  if (n == 0.0) fail(ErrorKind::UndefinedConditional, "windowed clock projection has zero norm");
  return acc / n;
}

double fidelity(const CVector& a, const CVector& b) {
  require(a.size() == b.size(), ErrorKind::InvalidInput, "states differ in dimension");
  const double na = a.squaredNorm(), nb = b.squaredNorm();
  require(na > 0.0 && nb > 0.0, ErrorKind::InvalidInput, "fidelity of a zero vector");
  return std::norm(a.dot(b)) / (na * nb);
}

Reduction semiclassical_reduction(const ClockSystemModel& model, double rate) {
  require(rate > 0.0 && std::isfinite(rate), ErrorKind::InvalidInput, "clock rate must be positive");
  ClockSystemModel reduced = model;
  reduced.m_x = model.m_x * rate;
  if (model.potential.size() != 0) reduced.potential = model.potential / rate;
  Reduction r;
  r.effective_mass = reduced.m_x;
  r.lapse = 1.0 / rate;
  r.h_reduced = build_hamiltonians(reduced).h_x;
  return r;
}

}  // namespace relstate::clock
