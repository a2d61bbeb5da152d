#include "relstate/phase.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace relstate::phase {
namespace {

bool same_point(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > 1e-12 * std::max(1.0, std::abs(a[i]))) return false;
  return true;
}

void check_fields(const std::vector<ScalarField>& k) {
  require(!k.empty(), ErrorKind::InvalidInput, "no K components given");
  const auto time_axes = k.front().chart.axes_with_role(AxisRole::Time);
  require(time_axes.size() == k.size(), ErrorKind::InvalidInput, "need one K component per Time axis");
  for (const auto& f : k) {
    require(f.chart.same_grid(k.front().chart), ErrorKind::InvalidInput, "K components live on different charts");
    require(f.values.size() == f.chart.node_count(), ErrorKind::InvalidInput, "K component has the wrong size");
  }
}

// Grid node of a point, or -1 when the point is not on a node.
long node_of(const CoordinateChart& chart, const std::vector<cplx>& p) {
  std::vector<int> idx(chart.real_dims());
  for (int d = 0; d < chart.real_dims(); ++d) {
    const cplx z = p[d / 2];
    const double x = (d % 2 == 0) ? z.real() : z.imag();
    const double u = (x - chart.origin(d)) / chart.step(d);
    const double r = std::round(u);
    if (std::abs(u - r) > 1e-9 || r < 0 || r >= chart.extent(d)) return -1;
    idx[d] = static_cast<int>(r);
  }
  return static_cast<long>(chart.node_at(idx));
}

}  // namespace

Path Path::make(std::vector<std::vector<cplx>> samples, bool closed) {
  require(samples.size() >= 2, ErrorKind::InvalidPath, "a path needs at least two samples");
  for (const auto& s : samples)
    require(!s.empty() && s.size() == samples.front().size(), ErrorKind::InvalidPath,
            "path samples differ in dimension");
  if (closed)
    require(same_point(samples.front(), samples.back()), ErrorKind::InvalidPath,
            "a closed path must end where it starts");
  return Path{std::move(samples), closed};
}

Path Path::from_points(const std::vector<cplx>& points, bool closed) {
  std::vector<std::vector<cplx>> s;
  s.reserve(points.size());
  for (cplx p : points) s.push_back({p});
  return make(std::move(s), closed);
}

Path Path::circle(cplx centre, double radius, int segments) {
  require(segments >= 3 && radius > 0.0, ErrorKind::InvalidPath, "circle needs three segments and a positive radius");
  std::vector<cplx> pts;
  for (int k = 0; k < segments; ++k) pts.push_back(centre + std::polar(radius, 2.0 * M_PI * k / segments));
  pts.push_back(pts.front());
  return from_points(pts, true);
}

Path Path::rectangle(const CoordinateChart& chart, std::size_t corner, int d1, int n1, int d2, int n2) {
  require(d1 != d2 && d1 >= 0 && d2 >= 0 && d1 < chart.real_dims() && d2 < chart.real_dims(), ErrorKind::InvalidPath,
          "rectangle needs two distinct real directions");
  require(n1 >= 2 && n2 >= 2, ErrorKind::InvalidPath, "rectangle needs at least two nodes per side");
  require(chart.coordinate_index(corner, d1) + n1 - 1 < chart.extent(d1) &&
              chart.coordinate_index(corner, d2) + n2 - 1 < chart.extent(d2),
          ErrorKind::InvalidPath, "rectangle leaves the chart");
  std::vector<std::vector<cplx>> s;
  std::size_t node = corner;
  s.push_back(chart.coordinates(node));
  auto walk = [&](int d, int count, int dir) {
    for (int i = 0; i < count; ++i) {
      node = chart.shift(node, d, dir);
      s.push_back(chart.coordinates(node));
    }
  };
  walk(d1, n1 - 1, 1);
  walk(d2, n2 - 1, 1);
  walk(d1, n1 - 1, -1);
  walk(d2, n2 - 1, -1);
  return make(std::move(s), true);
}

Path Path::reversed() const {
  Path p = *this;
  std::reverse(p.samples.begin(), p.samples.end());
  return p;
}

Path concatenate(const Path& a, const Path& b) {
  require(same_point(a.samples.back(), b.samples.front()), ErrorKind::InvalidPath,
          "paths do not share an endpoint");
  auto s = a.samples;
  s.insert(s.end(), b.samples.begin() + 1, b.samples.end());
  const bool closed = same_point(s.front(), s.back());
  return Path::make(std::move(s), closed);
}

KField interpolate(const std::vector<ScalarField>& k) {
  check_fields(k);
  return [k](std::span<const cplx> p) -> std::vector<cplx> {
    const auto& chart = k.front().chart;
    require(p.size() == chart.axis_count(), ErrorKind::InvalidPath, "path dimension does not match the chart");
    const int dims = chart.real_dims();
    std::vector<int> base(dims);
    std::vector<double> frac(dims);
    for (int d = 0; d < dims; ++d) {
      const double x = (d % 2 == 0) ? p[d / 2].real() : p[d / 2].imag();
      double u = (x - chart.origin(d)) / chart.step(d);
      const int n = chart.extent(d);
      if (chart.periodic(d)) {
        u = std::fmod(u, static_cast<double>(n));
        if (u < 0) u += n;
        base[d] = std::min(static_cast<int>(std::floor(u)), n - 1);
      } else {
        require(u >= -1e-9 && u <= n - 1 + 1e-9, ErrorKind::InvalidPath, "path leaves the chart");
        u = std::clamp(u, 0.0, static_cast<double>(n - 1));
        base[d] = std::min(static_cast<int>(std::floor(u)), n - 2);
      }
      frac[d] = u - base[d];
    }
    const std::size_t origin = chart.node_at(base);
    std::vector<cplx> out(chart.axis_count(), cplx(0.0));
    const auto time_axes = chart.axes_with_role(AxisRole::Time);
    for (unsigned mask = 0; mask < (1u << dims); ++mask) {
      double w = 1.0;
      std::size_t node = origin;
      for (int d = 0; d < dims; ++d) {
        const bool up = (mask >> d) & 1u;
        w *= up ? frac[d] : 1.0 - frac[d];
        if (up) node = chart.shift(node, d, 1);
      }
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < k.size(); ++j) out[time_axes[j]] += w * k[j].values[node];
    }
    return out;
  };
}

PhaseRecord accumulate_phase(const KField& k, const Path& path) {
  PhaseRecord rec;
  std::vector<cplx> prev = k(path.samples.front());
  for (std::size_t s = 1; s < path.samples.size(); ++s) {
    const auto next = k(path.samples[s]);
    require(next.size() == path.dim() && prev.size() == path.dim(), ErrorKind::InvalidInput,
            "K has a different dimension than the path");
    cplx inc = 0.0;
    for (std::size_t a = 0; a < path.dim(); ++a)
      inc += 0.25 * (prev[a] + next[a]) * (path.samples[s][a] - path.samples[s - 1][a]);
    rec.increments.push_back(inc);
    rec.theta += inc;
    prev = next;
  }
  rec.re_part = rec.theta.real();
  rec.im_part = rec.theta.imag();
  return rec;
}

PhaseRecord accumulate_phase(const std::vector<ScalarField>& k, const Path& path) {
  return accumulate_phase(interpolate(k), path);
}

PhaseRecord accumulate_phase(const std::vector<CVector>& states, bool closed) {
  require(states.size() >= 2, ErrorKind::InvalidPath, "overlap route needs at least two states");
  PhaseRecord rec;
  const std::size_t n = states.size();
  const std::size_t links = closed ? n : n - 1;
  for (std::size_t k = 0; k < links; ++k) {
    const CVector& a = states[k];
    const CVector& b = states[(k + 1) % n];
    require(a.size() == b.size(), ErrorKind::InvalidInput, "states differ in dimension");
    const cplx overlap = a.dot(b) / (a.norm() * b.norm());
    require(std::abs(overlap) > 0.0, ErrorKind::InvalidInput, "orthogonal neighbours: phase undefined");
    const cplx inc = -std::log(overlap);
    rec.increments.push_back(inc);
    rec.theta += inc;
  }
  rec.re_part = rec.theta.real();
  rec.im_part = rec.theta.imag();
  return rec;
}

double berry_phase_connection(const std::vector<CVector>& states) {
  const std::size_t n = states.size();
  require(n >= 3, ErrorKind::InvalidPath, "connection route needs at least three states");
  double gamma = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const CVector& psi = states[k];
    const CVector d = 0.5 * (states[(k + 1) % n] - states[(k + n - 1) % n]);
    gamma -= psi.dot(d).imag() / psi.squaredNorm();
  }
  return gamma;
}

StokesReport stokes_check(const std::vector<ScalarField>& k, const Path& loop) {
  check_fields(k);
  const auto& chart = k.front().chart;
  require(loop.closed, ErrorKind::InvalidPath, "Stokes check needs a closed loop");
  require(loop.dim() == chart.axis_count(), ErrorKind::InvalidPath, "loop dimension does not match the chart");

  // Recover the rectangle from the node walk.
  std::vector<std::size_t> nodes;
  for (const auto& p : loop.samples) {
    const long n = node_of(chart, p);
    require(n >= 0, ErrorKind::InvalidPath, "loop sample is not a grid node");
    nodes.push_back(static_cast<std::size_t>(n));
  }
  std::set<int> moving;
  for (std::size_t s = 1; s < nodes.size(); ++s) {
    int changed = -1, count = 0;
    for (int d = 0; d < chart.real_dims(); ++d) {
      const int delta = chart.coordinate_index(nodes[s], d) - chart.coordinate_index(nodes[s - 1], d);
      if (delta != 0) {
        require(std::abs(delta) == 1, ErrorKind::InvalidPath, "loop skips grid nodes");
        changed = d;
        ++count;
      }
    }
    require(count == 1, ErrorKind::InvalidPath, "loop is not axis-aligned");
    moving.insert(changed);
  }
  require(moving.size() == 2, ErrorKind::InvalidPath, "loop does not span a plane");
  const int d1 = *moving.begin(), d2 = *moving.rbegin();
  int lo1 = chart.extent(d1), hi1 = -1, lo2 = chart.extent(d2), hi2 = -1;
  for (auto n : nodes) {
    lo1 = std::min(lo1, chart.coordinate_index(n, d1));
    hi1 = std::max(hi1, chart.coordinate_index(n, d1));
    lo2 = std::min(lo2, chart.coordinate_index(n, d2));
    hi2 = std::max(hi2, chart.coordinate_index(n, d2));
  }
  const int n1 = hi1 - lo1 + 1, n2 = hi2 - lo2 + 1;
  std::set<std::size_t> distinct(nodes.begin(), nodes.end());
  require(nodes.size() == static_cast<std::size_t>(2 * (n1 - 1) + 2 * (n2 - 1) + 1) &&
              distinct.size() == nodes.size() - 1,
          ErrorKind::InvalidPath, "loop is not a rectangle");
  double signed_area = 0.0;
  for (std::size_t s = 1; s < nodes.size(); ++s) {
    const int a1 = chart.coordinate_index(nodes[s - 1], d1), a2 = chart.coordinate_index(nodes[s - 1], d2);
    const int b1 = chart.coordinate_index(nodes[s], d1), b2 = chart.coordinate_index(nodes[s], d2);
    require((a1 == lo1 || a1 == hi1 || a2 == lo2 || a2 == hi2), ErrorKind::InvalidPath, "loop is not a rectangle");
    signed_area += static_cast<double>(a1) * b2 - static_cast<double>(b1) * a2;
  }
  const double orientation = signed_area > 0 ? 1.0 : -1.0;

  StokesReport rep;
  rep.line = accumulate_phase(k, loop).theta;

  // dt^a / dx_d for the two plane directions
  const auto time_axes = chart.axes_with_role(AxisRole::Time);
  const std::size_t m = time_axes.size();
  auto tangent = [&](int d) {
    std::vector<cplx> e(m, cplx(0.0));
    for (std::size_t a = 0; a < m; ++a)
      if (time_axes[a] == d / 2) e[a] = (d % 2 == 0) ? cplx(1.0) : I;
    return e;
  };
  const auto e1 = tangent(d1), e2 = tangent(d2);

  std::size_t corner = nodes.front();
  for (int d : {d1, d2}) {
    const int lo = d == d1 ? lo1 : lo2;
    corner = chart.shift(corner, d, lo - chart.coordinate_index(corner, d));
  }
  double flux = 0.0;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const std::size_t node = chart.shift(chart.shift(corner, d1, i), d2, j);
      CMatrix f(m, m);
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
          f(a, b) = wirtinger_at<cplx>(chart, node, static_cast<std::size_t>(time_axes[a]), Wirtinger::Antiholomorphic,
                                       [&](std::size_t q) { return k[b].values[q]; });
      const CMatrix bcurv = f - f.adjoint();
      cplx density = 0.0;
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
          density += 0.25 * bcurv(a, b) * (std::conj(e1[a]) * e2[b] - std::conj(e2[a]) * e1[b]);
      const double w = ((i == 0 || i == n1 - 1) ? 0.5 : 1.0) * ((j == 0 || j == n2 - 1) ? 0.5 : 1.0);
      flux += w * density.real();
    }
  }
  rep.surface = orientation * flux * chart.step(d1) * chart.step(d2);
  rep.gap = std::abs(rep.line.real() - rep.surface);
  return rep;
}

AASeries anandan_aharonov(const CMatrix& generator, const CVector& psi0, double dt, int steps) {
  const HermitianMatrix h = HermitianMatrix::from(generator);
  require(psi0.size() == h.size() && psi0.norm() > 0.0, ErrorKind::InvalidInput, "state does not match the generator");
  require(dt > 0.0 && steps >= 1, ErrorKind::InvalidInput, "need a positive step and at least one step");
  const CMatrix u = linalg::unitary_propagator(h, dt);
  AASeries out;
  CVector psi = psi0 / psi0.norm();
  for (int s = 0; s < steps; ++s) {
    const cplx mean = psi.dot(h.matrix() * psi);
    out.energy_variance.push_back((h.matrix() * psi - mean * psi).squaredNorm());
    CVector next = u * psi;
    next /= next.norm();
    const cplx overlap = psi.dot(next);
    // 1 - |o| = |next_perp|^2 / (1 + |o|) avoids the cancellation in 1 - |o|
    const double perp = (next - overlap * psi).squaredNorm();
    out.fs_speed2.push_back(2.0 * perp / ((1.0 + std::abs(overlap)) * dt * dt));
    out.max_gap = std::max(out.max_gap, std::abs(out.fs_speed2.back() - out.energy_variance.back()));
    psi = std::move(next);
  }
  return out;
}

}  // namespace relstate::phase
