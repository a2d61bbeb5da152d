#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "relstate/geometry.hpp"
#include "test_support.hpp"

using namespace relstate;
using namespace relstate::geometry;
using testing_support::max_abs;

namespace {

ComplexAxis axis(const std::string& label, AxisRole role, int n, double half_width, double center_re = 0.0,
                 double center_im = 0.0) {
  ComplexAxis a;
  a.label = label;
  a.role = role;
  a.re_min = center_re - half_width;
  a.re_max = center_re + half_width;
  a.im_min = center_im - half_width;
  a.im_max = center_im + half_width;
  a.re_count = a.im_count = n;
  return a;
}

CoordinateChart plane(AxisRole role, int n, double half_width, double cre = 0.0, double cim = 0.0) {
  return CoordinateChart({axis(role == AxisRole::Space ? "x" : "t", role, n, half_width, cre, cim)});
}

std::size_t center_node(const CoordinateChart& c) {
  std::vector<int> idx;
  for (int d = 0; d < c.real_dims(); ++d) idx.push_back(c.extent(d) / 2);
  return c.node_at(idx);
}

CMatrix scalar(cplx v) { return CMatrix::Constant(1, 1, v); }

// Fubini-Study metric of CP^N in affine coordinates, from the potential ln(1 + |z|^2).
CMatrix fubini_study(std::span<const cplx> z) {
  const auto n = static_cast<Eigen::Index>(z.size());
  double r2 = 0.0;
  for (auto v : z) r2 += std::norm(v);
  CMatrix h(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      h(i, j) = (i == j ? 1.0 / (1.0 + r2) : 0.0) - z[i] * std::conj(z[j]) / ((1.0 + r2) * (1.0 + r2));
  return h;
}

}  // namespace

TEST_CASE("chart validation") {
  CHECK_THROWS_AS(plane(AxisRole::Space, 4, 1.0), Error);
  ComplexAxis bad = axis("x", AxisRole::Space, 6, 1.0);
  bad.re_max = bad.re_min;
  CHECK_THROWS_AS(CoordinateChart({bad}), Error);
  const auto c = plane(AxisRole::Space, 5, 1.0);
  CHECK(c.node_count() == 25);
  CHECK(c.step(0) == doctest::Approx(0.5));
  const std::size_t n = center_node(c);
  CHECK(c.coordinate(n, 0) == cplx(0.0, 0.0));
  CHECK_THROWS_AS(c.shift(c.node_at(std::vector<int>{4, 0}), 0, 1), Error);
}

TEST_CASE("wirtinger derivatives of monomials") {
  const auto c = plane(AxisRole::Space, 7, 1.0, 0.3, -0.2);
  auto z = ScalarField::sample(c, [](std::span<const cplx> p) { return p[0]; });
  auto r2 = ScalarField::sample(c, [](std::span<const cplx> p) { return cplx(std::norm(p[0])); });
  auto k = ScalarField::sample(c, [](std::span<const cplx>) { return cplx(3.0, 1.0); });
  const auto dz = wirtinger(z, 0, Wirtinger::Holomorphic);
  const auto dzb = wirtinger(z, 0, Wirtinger::Antiholomorphic);
  const auto dr = wirtinger(r2, 0, Wirtinger::Holomorphic);
  const auto drb = wirtinger(r2, 0, Wirtinger::Antiholomorphic);
  const auto dk = wirtinger(k, 0, Wirtinger::Holomorphic);
  // Second-order stencils are exact on quadratics, boundaries included.
  for (std::size_t n = 0; n < c.node_count(); ++n) {
    const cplx p = c.coordinate(n, 0);
    CHECK(std::abs(dz[n] - 1.0) < 1e-13);
    CHECK(std::abs(dzb[n]) < 1e-13);
    CHECK(std::abs(dr[n] - std::conj(p)) < 1e-13);
    CHECK(std::abs(drb[n] - p) < 1e-13);
    CHECK(std::abs(dk[n]) < 1e-13);
  }
}

TEST_CASE("wirtinger stencil is second order, interior and boundary") {
  auto f = [](std::span<const cplx> p) { return std::exp(p[0]) * std::sin(std::conj(p[0])); };
  auto df = [](cplx z) { return std::exp(z) * std::sin(std::conj(z)); };  // d/dz
  double err[2][2] = {};
  for (int level = 0; level < 2; ++level) {
    const int n = level == 0 ? 11 : 21;
    const auto c = plane(AxisRole::Space, n, 0.5);
    const auto d = wirtinger(ScalarField::sample(c, f), 0, Wirtinger::Holomorphic);
    const std::size_t interior = center_node(c);
    const std::size_t corner = c.node_at(std::vector<int>{0, 0});
    err[level][0] = std::abs(d[interior] - df(c.coordinate(interior, 0)));
    err[level][1] = std::abs(d[corner] - df(c.coordinate(corner, 0)));
  }
  for (int where = 0; where < 2; ++where) {
    const double ratio = err[0][where] / err[1][where];
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.0);
  }
}

TEST_CASE("connection coefficients") {
  const auto c = plane(AxisRole::Space, 9, 0.04, 0.1, 0.2);
  const std::size_t n = center_node(c);
  SUBCASE("flat") {
    auto h = MetricField::sample(c, [](std::span<const cplx>) { return CMatrix(CMatrix::Identity(2, 2)); });
    const auto g = connection(h, n);
    CHECK(max_abs(g.gamma[0]) == 0.0);
  }
  SUBCASE("exponential") {
    auto h = MetricField::sample(c, [](std::span<const cplx> p) { return scalar(std::exp(2.0 * p[0].real())); });
    const auto g = connection(h, n);
    CHECK(std::abs(g.gamma[0](0, 0) - 1.0) < 1e-3);
    CHECK(std::abs(g.barred(0)(0, 0) - 1.0) < 1e-3);
  }
  SUBCASE("Fubini-Study N=1") {
    auto h = MetricField::sample(c, fubini_study);
    const cplx x = c.coordinate(n, 0);
    const auto g = connection(h, n);
    CHECK(std::abs(g.gamma[0](0, 0) - (-2.0 * std::conj(x) / (1.0 + std::norm(x)))) < 2e-4);
  }
}

TEST_CASE("ricci on flat, Fubini-Study and exponential fixtures") {
  const auto c = plane(AxisRole::Space, 33, 1.0);
  auto flat = MetricField::sample(c, [](std::span<const cplx>) { return CMatrix(CMatrix::Identity(1, 1)); });
  auto fs = MetricField::sample(c, fubini_study);
  auto ex = MetricField::sample(c, [](std::span<const cplx> p) { return scalar(std::exp(std::norm(p[0]))); });
  double worst_fs = 0.0, worst_ex = 0.0;
  for (std::size_t n = 0; n < c.node_count(); ++n) {
    if (c.margin(n, 0) < 2 || c.margin(n, 1) < 2) continue;
    CHECK(max_abs(ricci(flat, n).matrix()) <= 1e-10);
    worst_fs = std::max(worst_fs, std::abs(ricci(fs, n)(0, 0) - 2.0 * fs.values[n](0, 0)));
    worst_ex = std::max(worst_ex, std::abs(ricci(ex, n)(0, 0) + 1.0));
  }
  CHECK(worst_fs < 5e-2);
  CHECK(worst_ex < 1e-2);
  CHECK_THROWS_AS(ricci(fs, c.node_at(std::vector<int>{1, 10})), Error);
}

TEST_CASE("ricci of CP^2 is three times the metric and Hermitian") {
  const CoordinateChart c({axis("x1", AxisRole::Space, 9, 0.1, 0.1, -0.1), axis("x2", AxisRole::Space, 9, 0.1, 0.2)});
  auto h = MetricField::sample(c, fubini_study);
  const std::size_t n = center_node(c);
  const auto r = ricci(h, n);
  CHECK(max_abs(r.matrix() - 3.0 * h.values[n].matrix()) < 1e-2);
}

TEST_CASE("ricci anti-Hermitian drift is truncation error") {
  // Coarse grids show an O(d^2) drift before symmetrization; a tight local
  // patch brings it under 10 fd_tol.
  double drift[2];
  for (int level = 0; level < 2; ++level) {
    const double w = level ? 0.2 : 0.4;
    const CoordinateChart c({axis("x1", AxisRole::Space, 9, w, 0.3, -0.1), axis("x2", AxisRole::Space, 9, w, 0.2)});
    drift[level] = ricci(MetricField::sample(c, fubini_study), center_node(c)).drift();
  }
  CHECK(drift[0] / drift[1] > 3.0);
  CHECK(drift[0] / drift[1] < 5.0);
  const CoordinateChart fine({axis("x1", AxisRole::Space, 5, 2e-3, 0.3, -0.1), axis("x2", AxisRole::Space, 5, 2e-3, 0.2)});
  const auto r = ricci(MetricField::sample(fine, fubini_study), center_node(fine));
  CHECK(r.drift() <= 10 * 1e-6);
  CHECK(linalg::hermiticity_drift(r.matrix()) == 0.0);
}

TEST_CASE("ricci agrees with the nested logdet route") {
  // Local patch with spacing 1e-3 so that truncation sits below 10 fd_tol.
  const CoordinateChart c({axis("x1", AxisRole::Space, 5, 2e-3, 0.1, -0.1), axis("x2", AxisRole::Space, 5, 2e-3, 0.2)});
  auto h = MetricField::sample(c, [](std::span<const cplx> p) {
    CMatrix m = fubini_study(p);
    m(0, 0) *= 1.0 + 0.3 * std::norm(p[1]);
    m(1, 1) *= 1.0 + 0.2 * p[0].real();
    return CMatrix(0.5 * (m + m.adjoint()));
  });
  ScalarField logdet_field{c, std::vector<cplx>(c.node_count())};
  for (std::size_t n = 0; n < c.node_count(); ++n) logdet_field.values[n] = linalg::logdet(h.values[n]);
  const std::size_t n = center_node(c);
  const auto r = ricci(h, n);
  for (int i = 0; i < 2; ++i) {
    const auto dbar = wirtinger(logdet_field, i, Wirtinger::Antiholomorphic);
    for (int j = 0; j < 2; ++j) {
      const auto ddbar = wirtinger(dbar, j, Wirtinger::Holomorphic);
      CHECK(std::abs(r(i, j) + ddbar[n]) < 1e-5);
    }
  }
}

TEST_CASE("extrinsic curvature fixtures") {
  const auto c = plane(AxisRole::Time, 9, 0.02, 0.2, 0.1);
  const std::size_t n = center_node(c);
  SUBCASE("t-constant") {
    auto h = MetricField::sample(c, [](std::span<const cplx>) { return CMatrix(2.0 * CMatrix::Identity(2, 2)); });
    const auto e = extrinsic(h, n);
    CHECK(max_abs(e.k_ext[0]) == 0.0);
    CHECK(std::abs(e.k_trace[0]) == 0.0);
    CHECK(std::abs(e.k_log[0]) == 0.0);
  }
  SUBCASE("exponential in Re t") {
    const double lambda = 0.7;
    auto h = MetricField::sample(c, [&](std::span<const cplx> p) {
      return CMatrix(std::exp(2.0 * lambda * p[0].real()) * CMatrix::Identity(3, 3));
    });
    const auto e = extrinsic(h, n);
    CHECK(std::abs(e.k_log[0] - 1.5 * lambda) < 1e-12);  // logdet is linear here
    CHECK(std::abs(e.k_trace[0] - 1.5 * lambda) < 1e-5);
    CHECK(e.identity_gap < 1e-5);
  }
  SUBCASE("linear perturbation") {
    for (double eps : {1e-2, 1e-3}) {
      auto h = MetricField::sample(c, [&](std::span<const cplx> p) { return scalar(1.0 + eps * p[0].real()); });
      const auto e = extrinsic(h, n);
      CHECK(std::abs(e.k_log[0] - eps / 4.0) < 2.0 * eps * eps);
    }
  }
}

TEST_CASE("extrinsic identity gap is second order") {
  auto f = [](std::span<const cplx> p) {
    CMatrix m(2, 2);
    m << 2.0 + std::sin(p[0].real()), 0.3 * std::exp(I * p[0].imag()), 0.3 * std::exp(-I * p[0].imag()),
        1.5 + std::norm(p[0]);
    return m;
  };
  double gap[2];
  for (int level = 0; level < 2; ++level) {
    const auto c = plane(AxisRole::Time, level ? 17 : 9, 0.4);
    gap[level] = extrinsic(MetricField::sample(c, f), center_node(c)).identity_gap;
  }
  CHECK(gap[0] / gap[1] > 3.0);
  CHECK(gap[0] / gap[1] < 5.0);
}

TEST_CASE("relative metric fixtures") {
  const auto c = plane(AxisRole::Time, 9, 0.02, 0.3, 0.1);
  const std::size_t n = center_node(c);
  SUBCASE("t-constant basis") {
    auto x = BasisField::sample(c, [](std::span<const cplx>) {
      return std::vector<CVector>{CVector::Unit(2, 0), CVector::Unit(2, 1)};
    });
    const auto r = relative_metric(x, n);
    CHECK(max_abs(r.g) == 0.0);
    CHECK(max_abs(r.F) == 0.0);
    CHECK(max_abs(r.B) == 0.0);
  }
  SUBCASE("carrier phase gives omega^2/4") {
    const double omega = 3.0;
    auto x = BasisField::sample(c, [&](std::span<const cplx> p) {
      CVector e(2);
      e << 0.6, 0.8 * I;
      return std::vector<CVector>{std::exp(-I * omega * p[0].real()) * e};
    });
    const auto r = relative_metric(x, n);
    CHECK(std::abs(r.g(0, 0) - omega * omega / 4.0) < 5e-4);
    CHECK(max_abs(r.F) < 1e-12);
    CHECK(r.f_minus_g == doctest::Approx(std::abs(r.g(0, 0))));
  }
  SUBCASE("decomposition identities") {
    std::mt19937_64 rng(3);
    const CMatrix m = testing_support::random_matrix(rng, 2, 3);
    const CoordinateChart c2({axis("t1", AxisRole::Time, 7, 0.2), axis("t2", AxisRole::Time, 7, 0.2, 0.1)});
    auto x = BasisField::sample(c2, [&](std::span<const cplx> p) {
      CVector a = m.row(0).transpose() + p[0] * m.row(1).transpose();
      CVector b = m.row(1).transpose() + std::conj(p[1]) * p[0] * m.row(0).transpose();
      return std::vector<CVector>{a, b};
    });
    const auto r = relative_metric(x, center_node(c2));
    CHECK(recompose(r.G, r.Omega) == r.g);
    CHECK(CMatrix(r.B + r.B.adjoint()) == CMatrix::Zero(2, 2));
    CHECK(CMatrix(r.B - (r.F - r.F.adjoint())) == CMatrix::Zero(2, 2));
  }
}

TEST_CASE("relative metric of the ket (1, t)") {
  auto basis = [](std::span<const cplx> p) {
    CVector v(2);
    v << 1.0, p[0];
    return std::vector<CVector>{v};
  };
  double err_f[2], err_g[2];
  for (int level = 0; level < 2; ++level) {
    const auto c = plane(AxisRole::Time, level ? 17 : 9, 0.4, 0.3, -0.2);
    const std::size_t n = center_node(c);
    const double h = 1.0 + std::norm(c.coordinate(n, 0));
    const auto r = relative_metric(BasisField::sample(c, basis), n);
    err_g[level] = std::abs(r.g(0, 0) - 1.0 / (h * h));
    err_f[level] = std::abs(r.F(0, 0) - 0.5 / (h * h));
    CHECK(std::abs(r.f_minus_g - 0.5 / (h * h)) < 1e-2);
  }
  CHECK(err_g[0] / err_g[1] > 3.0);
  CHECK(err_g[0] / err_g[1] < 5.0);
  CHECK(err_f[0] / err_f[1] > 3.0);
  CHECK(err_f[0] / err_f[1] < 5.0);
}

TEST_CASE("kahler_check") {
  SUBCASE("constant determinant") {
    const auto c = plane(AxisRole::Time, 7, 0.3);
    auto h = MetricField::sample(c, [](std::span<const cplx> p) {
      CMatrix m(2, 2);
      m << 1.0, 0.5 * std::exp(I * p[0].real()), 0.5 * std::exp(-I * p[0].real()), 1.0;
      return m;
    });
    // det = 0.75 everywhere
    const auto k = kahler_check(h, center_node(c));
    CHECK(k.potential_gap < 1e-3);
    CHECK(!k.closedness_defined);
  }
  SUBCASE("Fubini-Study potential identity is second order") {
    double gap[2];
    for (int level = 0; level < 2; ++level) {
      const auto c = plane(AxisRole::Time, level ? 17 : 9, 0.4, 0.2, 0.1);
      gap[level] = kahler_check(MetricField::sample(c, fubini_study), center_node(c)).potential_gap;
    }
    CHECK(gap[1] < 1e-2);
    CHECK(gap[0] / gap[1] > 3.0);
    CHECK(gap[0] / gap[1] < 5.0);
  }
  SUBCASE("closed for CP^2, not closed for a seeded non-integrable K") {
    const CoordinateChart c({axis("t1", AxisRole::Time, 7, 0.3, 0.1), axis("t2", AxisRole::Time, 7, 0.3, -0.1, 0.2)});
    const std::size_t n = center_node(c);
    // From a metric, B = F - F^dagger is pure truncation error, so |dB| is too.
    const CoordinateChart fine({axis("t1", AxisRole::Time, 7, 0.003, 0.1), axis("t2", AxisRole::Time, 7, 0.003, -0.1, 0.2)});
    const auto fs = kahler_check(MetricField::sample(fine, fubini_study), center_node(fine));
    CHECK(fs.closedness_defined);
    CHECK(fs.closedness < 1e-5);

    std::vector<ScalarField> k{
        ScalarField::sample(c, [](std::span<const cplx> p) { return cplx(p[0].real() * p[1].real()); }),
        ScalarField::sample(c, [](std::span<const cplx>) { return cplx(0.0); })};
    const auto bad = kahler_check(k, n);
    CHECK(bad.closedness > 10 * 1e-6);
    CHECK(bad.closedness == doctest::Approx(1.0).epsilon(1e-6));

    // K = d phi for a complex potential: B is d d*-exact, hence closed.
    auto phi_d = [](int b) {
      return [b](std::span<const cplx> p) {
        const cplx t1 = p[0], t2 = p[1];
        // phi = |t1|^2 |t2|^2 + i t1 conj(t2)^2
        return b == 0 ? std::conj(t1) * std::norm(t2) + I * std::conj(t2) * std::conj(t2)
                      : std::conj(t2) * std::norm(t1);
      };
    };
    std::vector<ScalarField> good{ScalarField::sample(c, phi_d(0)), ScalarField::sample(c, phi_d(1))};
    CHECK(kahler_check(good, n).closedness < 1e-8);
  }
}

TEST_CASE("geometry report bundles the node objects") {
  const CoordinateChart c({axis("x", AxisRole::Space, 9, 0.04), axis("t", AxisRole::Time, 9, 0.04)});
  auto h = MetricField::sample(c, [](std::span<const cplx> p) {
    return scalar(std::exp(std::norm(p[0])) * (1.0 + 0.1 * p[1].real()));
  });
  const auto r = report(h, center_node(c));
  REQUIRE(r.ricci.has_value());
  CHECK(std::abs((*r.ricci)(0, 0) + 1.0) < 1e-3);
  CHECK(r.extrinsic.k_log.size() == 1);
  CHECK(!r.relative.has_value());
}
