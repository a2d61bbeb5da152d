#include "relstate/geometry.hpp"

#include <map>
#include <sstream>

namespace relstate::geometry {
namespace {

std::vector<int> time_axes(const CoordinateChart& chart) {
  auto axes = chart.axes_with_role(AxisRole::Time);
  require(!axes.empty(), ErrorKind::InvalidGrid, "chart has no Time axes");
  return axes;
}

std::vector<int> space_axes(const CoordinateChart& chart) {
  auto axes = chart.axes_with_role(AxisRole::Space);
  require(!axes.empty(), ErrorKind::InvalidGrid, "chart has no Space axes");
  return axes;
}

void require_margin(const CoordinateChart& chart, std::size_t node, const std::vector<int>& axes, int width) {
  for (int a : axes)
    for (int d : {2 * a, 2 * a + 1})
      if (chart.margin(node, d) < width) {
        std::ostringstream msg;
        msg << "node " << node << " is within " << width << " samples of the boundary along axis '"
            << chart.axis(a).label << "'";
        fail(ErrorKind::InvalidGrid, msg.str());
      }
}

// tr(h^-1 m) without forming the inverse.
cplx trace_solve(const HermitianMatrix& h, const CMatrix& m) {
  Eigen::PartialPivLU<CMatrix> lu(h.matrix());
  return lu.solve(m).trace();
}

CMatrix solve(const HermitianMatrix& h, const CMatrix& m) {
  Eigen::FullPivLU<CMatrix> lu(h.matrix());
  if (!lu.isInvertible()) fail(ErrorKind::DegenerateMetric, "metric is singular at node");
  return lu.solve(m);
}

// Memoized per-node evaluation; the stencils revisit nodes many times.
template <class Value>
class NodeCache {
 public:
  template <class Fn>
  explicit NodeCache(Fn fn) : fn_(std::move(fn)) {}

  const Value& operator()(std::size_t n) {
    auto it = cache_.find(n);
    if (it == cache_.end()) it = cache_.emplace(n, fn_(n)).first;
    return it->second;
  }

 private:
  std::function<Value(std::size_t)> fn_;
  std::map<std::size_t, Value> cache_;
};

// Real 2-form components W(mu, nu), mu < nu, of sum_ab B_ab dt*^a ^ dt^b on
// the real directions of the given axes (local indices 2i, 2i+1).
CMatrix real_two_form(const CMatrix& b) {
  const Eigen::Index k = b.rows();
  CMatrix w = CMatrix::Zero(2 * k, 2 * k);
  auto add = [&](Eigen::Index mu, Eigen::Index nu, cplx c) {
    if (mu == nu) return;
    w(mu, nu) += c;
    w(nu, mu) -= c;
  };
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index bb = 0; bb < k; ++bb) {
      const cplx c = b(a, bb);
      // dt*^a ^ dt^b = du_a^du_b + dv_a^dv_b + i (du_a^dv_b - dv_a^du_b)
      add(2 * a, 2 * bb, c);
      add(2 * a + 1, 2 * bb + 1, c);
      add(2 * a, 2 * bb + 1, I * c);
      add(2 * a + 1, 2 * bb, -I * c);
    }
  return w;
}

// Largest |dW| over the elementary cubes anchored at node, from corner
// averages on each face.
double closedness(const CoordinateChart& chart, std::size_t node, const std::vector<int>& axes,
                  const std::function<CMatrix(std::size_t)>& b_at) {
  std::vector<int> dims;
  for (int a : axes) {
    dims.push_back(2 * a);
    dims.push_back(2 * a + 1);
  }
  const int m = static_cast<int>(dims.size());
  NodeCache<CMatrix> w([&](std::size_t n) { return real_two_form(b_at(n)); });
  double worst = 0.0;
  for (int l = 0; l < m; ++l)
    for (int p = l + 1; p < m; ++p)
      for (int q = p + 1; q < m; ++q) {
        const int local[3] = {l, p, q};
        // corner(bits) with bit k set meaning +1 along local[k]
        auto corner = [&](int bits) {
          std::size_t n = node;
          for (int k = 0; k < 3; ++k)
            if (bits & (1 << k)) n = chart.shift(n, dims[local[k]], 1);
          return n;
        };
        // average of W over the face normal to local[k] at side s
        auto face = [&](int k, int s) {
          const int i = local[(k + 1) % 3], j = local[(k + 2) % 3];
          const int lo = std::min(i, j), hi = std::max(i, j);
          cplx acc = 0.0;
          for (int bits = 0; bits < 8; ++bits)
            if (((bits >> k) & 1) == s) acc += w(corner(bits))(lo, hi);
          return acc / 4.0;
        };
        // dW_{lpq} = d_l W_pq - d_p W_lq + d_q W_lp
        const cplx dw = (face(0, 1) - face(0, 0)) / chart.step(dims[l]) -
                        (face(1, 1) - face(1, 0)) / chart.step(dims[p]) +
                        (face(2, 1) - face(2, 0)) / chart.step(dims[q]);
        worst = std::max(worst, std::abs(dw));
      }
  return worst;
}

}  // namespace

Connection connection(const MetricField& h, std::size_t node) {
  const auto& chart = h.chart;
  Connection out;
  out.axes = space_axes(chart);
  auto at = [&](std::size_t n) -> const CMatrix& { return h.values[n].matrix(); };
  for (int a : out.axes) {
    const CMatrix dh = wirtinger_at<CMatrix>(chart, node, a, Wirtinger::Holomorphic, at);
    out.gamma.push_back(solve(h.values[node], dh));
  }
  return out;
}

HermitianMatrix ricci(const MetricField& h, std::size_t node, double drift_tol) {
  const auto& chart = h.chart;
  const auto axes = space_axes(chart);
  require_margin(chart, node, axes, 2);
  auto at = [&](std::size_t n) -> const CMatrix& { return h.values[n].matrix(); };
  const auto k = static_cast<Eigen::Index>(axes.size());
  CMatrix r(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    // gbar_i(n) = tr(h^-1 d_{i*} h) at n
    NodeCache<cplx> gbar([&](std::size_t n) {
      const CMatrix dh = wirtinger_at<CMatrix>(chart, n, axes[i], Wirtinger::Antiholomorphic, at);
      return trace_solve(h.values[n], dh);
    });
    for (Eigen::Index j = 0; j < k; ++j)
      r(i, j) = -wirtinger_at<cplx>(chart, node, axes[j], Wirtinger::Holomorphic, gbar);
  }
  const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
  return HermitianMatrix::from(r, drift_tol * scale);
}

Extrinsic extrinsic(const MetricField& h, std::size_t node) {
  const auto& chart = h.chart;
  Extrinsic out;
  out.axes = time_axes(chart);
  auto at = [&](std::size_t n) -> const CMatrix& { return h.values[n].matrix(); };
  NodeCache<cplx> ld([&](std::size_t n) { return linalg::logdet(h.values[n]); });
  for (int a : out.axes) {
    const CMatrix k = 0.5 * wirtinger_at<CMatrix>(chart, node, a, Wirtinger::Holomorphic, at);
    out.k_trace.push_back(trace_solve(h.values[node], k));
    out.k_log.push_back(0.5 * wirtinger_at<cplx>(chart, node, a, Wirtinger::Holomorphic, ld));
    out.k_ext.push_back(k);
    out.identity_gap = std::max(out.identity_gap, std::abs(out.k_trace.back() - out.k_log.back()));
  }
  return out;
}

CMatrix recompose(const Eigen::MatrixXd& G, const Eigen::MatrixXd& Omega) {
  return G.cast<cplx>() + 0.5 * I * Omega.cast<cplx>();
}

CMatrix inertial_force(const std::vector<ScalarField>& k, std::size_t node) {
  require(!k.empty(), ErrorKind::InvalidInput, "no K components given");
  const auto& chart = k.front().chart;
  const auto axes = time_axes(chart);
  require(axes.size() == k.size(), ErrorKind::InvalidInput, "one K component per Time axis is required");
  const auto m = static_cast<Eigen::Index>(axes.size());
  CMatrix f(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      f(a, b) = wirtinger_at<cplx>(chart, node, axes[a], Wirtinger::Antiholomorphic,
                                   [&](std::size_t n) { return k[b].values[n]; });
  return f;
}

RelativeMetric relative_metric(const BasisField& x, std::size_t node) {
  const auto& chart = x.chart;
  RelativeMetric out;
  out.axes = time_axes(chart);
  require_margin(chart, node, out.axes, 2);
  const std::size_t n_kets = x.kets.front().size();
  const auto m = static_cast<Eigen::Index>(out.axes.size());

  NodeCache<std::vector<CVector>> duals(
      [&](std::size_t n) { return linalg::dual_basis(x.kets[n], Signature::Spacelike); });
  NodeCache<cplx> ld([&](std::size_t n) { return linalg::logdet(linalg::gram(x.kets[n])); });

  out.g = CMatrix::Zero(m, m);
  for (std::size_t i = 0; i < n_kets; ++i) {
    std::vector<CVector> d_ket, d_dual;
    for (int a : out.axes) {
      d_ket.push_back(wirtinger_at<CVector>(chart, node, a, Wirtinger::Holomorphic,
                                            [&](std::size_t n) -> const CVector& { return x.kets[n][i]; }));
      d_dual.push_back(wirtinger_at<CVector>(chart, node, a, Wirtinger::Holomorphic,
                                             [&](std::size_t n) -> const CVector& { return duals(n)[i]; }));
    }
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) out.g(a, b) += d_dual[a].dot(d_ket[b]);
  }
  out.G = out.g.real();
  out.Omega = 2.0 * out.g.imag();

  out.F.resize(m, m);
  for (Eigen::Index b = 0; b < m; ++b) {
    NodeCache<cplx> kb([&](std::size_t n) {
      return 0.5 * wirtinger_at<cplx>(chart, n, out.axes[b], Wirtinger::Holomorphic, ld);
    });
    for (Eigen::Index a = 0; a < m; ++a)
      out.F(a, b) = wirtinger_at<cplx>(chart, node, out.axes[a], Wirtinger::Antiholomorphic, kb);
  }
  out.B = out.F - out.F.adjoint();
  out.f_minus_g = (out.F - out.g).cwiseAbs().maxCoeff();
  return out;
}

KahlerDiagnostics kahler_check(const MetricField& h, std::size_t node) {
  const auto& chart = h.chart;
  const auto axes = time_axes(chart);
  require_margin(chart, node, axes, 2);
  const auto m = static_cast<Eigen::Index>(axes.size());
  auto at = [&](std::size_t n) -> const CMatrix& { return h.values[n].matrix(); };

  // Trace route: K_b = (1/2) tr(h^-1 d_b h), then F = d_{a*} K_b.
  std::vector<NodeCache<cplx>> kb;
  for (Eigen::Index b = 0; b < m; ++b)
    kb.emplace_back([&, b](std::size_t n) {
      const CMatrix dh = wirtinger_at<CMatrix>(chart, n, axes[b], Wirtinger::Holomorphic, at);
      return 0.5 * trace_solve(h.values[n], dh);
    });
  auto f_at = [&](std::size_t n) {
    CMatrix f(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b)
        f(a, b) = wirtinger_at<cplx>(chart, n, axes[a], Wirtinger::Antiholomorphic, kb[b]);
    return f;
  };

  // Potential route: direct second differences of phi = (1/2) ln det h.
  NodeCache<cplx> phi([&](std::size_t n) { return 0.5 * linalg::logdet(h.values[n]); });
  auto second = [&](int d, int e) -> cplx {
    if (d == e) {
      const double s = chart.step(d);
      return (phi(chart.shift(node, d, 1)) - 2.0 * phi(node) + phi(chart.shift(node, d, -1))) / (s * s);
    }
    auto corner = [&](int sd, int se) { return phi(chart.shift(chart.shift(node, d, sd), e, se)); };
    return (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) / (4.0 * chart.step(d) * chart.step(e));
  };
  CMatrix pot(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      const int ua = 2 * axes[a], va = ua + 1, ub = 2 * axes[b], vb = ub + 1;
      pot(a, b) = 0.25 * (second(ua, ub) - I * second(ua, vb) + I * second(va, ub) + second(va, vb));
    }

  KahlerDiagnostics out;
  out.potential_gap = (f_at(node) - pot).cwiseAbs().maxCoeff();
  if (2 * m >= 3) {
    out.closedness_defined = true;
    out.closedness = closedness(chart, node, axes, [&](std::size_t n) {
      const CMatrix f = f_at(n);
      return CMatrix(f - f.adjoint());
    });
  }
  return out;
}

KahlerDiagnostics kahler_check(const std::vector<ScalarField>& k, std::size_t node) {
  require(!k.empty(), ErrorKind::InvalidInput, "no K components given");
  const auto& chart = k.front().chart;
  const auto axes = time_axes(chart);
  KahlerDiagnostics out;
  if (2 * axes.size() >= 3) {
    out.closedness_defined = true;
    out.closedness = closedness(chart, node, axes, [&](std::size_t n) {
      const CMatrix f = inertial_force(k, n);
      return CMatrix(f - f.adjoint());
    });
  }
  return out;
}

GeometryReport report(const MetricField& h, std::size_t node, const BasisField* x) {
  GeometryReport out;
  const auto& chart = h.chart;
  if (!chart.axes_with_role(AxisRole::Space).empty()) {
    out.gamma = connection(h, node);
    bool room = true;
    for (int a : chart.axes_with_role(AxisRole::Space))
      room = room && chart.margin(node, 2 * a) >= 2 && chart.margin(node, 2 * a + 1) >= 2;
    if (room) out.ricci = ricci(h, node);
  }
  if (!chart.axes_with_role(AxisRole::Time).empty()) out.extrinsic = extrinsic(h, node);
  if (x) out.relative = relative_metric(*x, node);
  return out;
}

}  // namespace relstate::geometry
