#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "relstate/phase.hpp"
#include "test_support.hpp"

using namespace relstate;
using namespace relstate::phase;

namespace {

ComplexAxis time_axis(const std::string& label, int n, double half, double centre = 0.0) {
  ComplexAxis a;
  a.label = label;
  a.role = AxisRole::Time;
  a.re_min = a.im_min = centre - half;
  a.re_max = a.im_max = centre + half;
  a.re_count = a.im_count = n;
  return a;
}

std::vector<ScalarField> sample_k(const CoordinateChart& c, const std::vector<std::function<cplx(std::span<const cplx>)>>& fs) {
  std::vector<ScalarField> out;
  for (const auto& f : fs) out.push_back(ScalarField::sample(c, f));
  return out;
}

KField single(std::function<cplx(cplx)> f) {
  return [f = std::move(f)](std::span<const cplx> p) { return std::vector<cplx>{f(p[0])}; };
}

// Spin-1/2 state along the direction (theta, phi).
CVector spinor(double theta, double phi) {
  CVector v(2);
  v << std::cos(theta / 2), std::exp(I * phi) * std::sin(theta / 2);
  return v;
}

std::vector<CVector> cone_loop(double theta, int samples) {
  std::vector<CVector> s;
  for (int k = 0; k < samples; ++k) s.push_back(spinor(theta, 2 * M_PI * k / samples));
  return s;
}

// Stokes gap for K_a = d_a phi with a real potential phi on an n x n patch.
double integrable_gap(int n) {
  const CoordinateChart c({time_axis("t", n, 0.5, 0.3)});
  auto k = sample_k(c, {[](std::span<const cplx> p) {
                          // phi = |t|^2 + Re(t^3)/3, K = d phi = conj(t) + t^2/2
                          return std::conj(p[0]) + 0.5 * p[0] * p[0];
                        }});
  // add a phase-like part with nonzero B
  for (std::size_t m = 0; m < c.node_count(); ++m) {
    const cplx t = c.coordinate(m, 0);
    k[0].values[m] += I * std::conj(t) * std::exp(0.7 * t.real() + 0.3 * t.imag());
  }
  return stokes_check(k, Path::rectangle(c, 0, 0, n, 1, n)).gap;
}

}  // namespace

TEST_CASE("zero K gives zero phase") {
  const auto rec = accumulate_phase(single([](cplx) { return cplx(0.0); }), Path::circle(0.0, 1.0, 16));
  CHECK(rec.theta == cplx(0.0));
  CHECK(rec.increments.size() == 16);
}

TEST_CASE("path validation") {
  CHECK_THROWS_AS(Path::from_points({cplx(0.0)}, false), Error);
  CHECK_THROWS_AS(Path::from_points({cplx(0.0), cplx(1.0)}, true), Error);
  CHECK_THROWS_AS(Path::make({{cplx(0.0)}, {cplx(1.0), cplx(2.0)}}, false), Error);
  const CoordinateChart c({time_axis("t", 5, 1.0)});
  const auto k = sample_k(c, {[](std::span<const cplx>) { return cplx(1.0); }});
  const auto outside = Path::from_points({cplx(0.0), cplx(2.0, 0.0)}, false);
  try {
    accumulate_phase(k, outside);
    FAIL("expected InvalidPath");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidPath);
  }
}

TEST_CASE("holomorphic gradient field gives zero closed-loop phase") {
  // K = d/dt (sin t + t^3)
  const auto k = single([](cplx t) { return std::cos(t) + 3.0 * t * t; });
  const auto rec = accumulate_phase(k, Path::circle(cplx(0.2, -0.1), 0.8, 10000));
  CHECK(std::abs(rec.theta) <= 1e-8);

  // a linear K sampled on a grid is integrated exactly around a rectangle
  const CoordinateChart c({time_axis("t", 9, 1.0)});
  const auto grid = sample_k(c, {[](std::span<const cplx> p) { return cplx(0.3, 0.2) * p[0] + cplx(1.0, -1.0); }});
  const auto loop = Path::rectangle(c, c.node_at(std::vector<int>{1, 2}), 0, 5, 1, 4);
  CHECK(std::abs(accumulate_phase(grid, loop).theta) <= 1e-12);
}

TEST_CASE("reversal and concatenation") {
  const auto k = single([](cplx t) { return std::exp(t) + I * std::conj(t); });
  std::vector<cplx> pts1, pts2;
  for (int i = 0; i <= 50; ++i) pts1.push_back(cplx(0.02 * i, 0.01 * i * i * 0.02));
  for (int i = 0; i <= 30; ++i) pts2.push_back(pts1.back() + cplx(-0.01 * i, 0.03 * i));
  const auto p1 = Path::from_points(pts1, false), p2 = Path::from_points(pts2, false);
  const auto a = accumulate_phase(k, p1), b = accumulate_phase(k, p2);
  CHECK(std::abs(accumulate_phase(k, p1.reversed()).theta + a.theta) <= 1e-14);
  const auto joined = accumulate_phase(k, concatenate(p1, p2));
  CHECK(std::abs(joined.theta - (a.theta + b.theta)) <= 1e-14);
  CHECK(joined.re_part == joined.theta.real());
  CHECK(joined.im_part == joined.theta.imag());
  CHECK_THROWS_AS(concatenate(p2, p2), Error);
}

TEST_CASE("gauge: adding a holomorphic gradient") {
  auto base = [](cplx t) { return std::conj(t) * t + I * std::conj(t); };
  auto phi = [](cplx t) { return std::sin(2.0 * t) + t * t; };
  auto dphi = [](cplx t) { return 2.0 * std::cos(2.0 * t) + 2.0 * t; };
  const auto k = single(base);
  const auto kg = single([&](cplx t) { return base(t) + dphi(t); });

  std::vector<cplx> pts;
  for (int i = 0; i <= 20000; ++i) {
    const double s = i / 20000.0;
    pts.push_back(cplx(s, 0.5 * std::sin(3 * s)));
  }
  const auto open = Path::from_points(pts, false);
  const cplx shift = accumulate_phase(kg, open).theta - accumulate_phase(k, open).theta;
  CHECK(std::abs(shift - 0.5 * (phi(pts.back()) - phi(pts.front()))) <= 1e-8);

  const auto loop = Path::circle(cplx(0.1, 0.1), 0.7, 10000);
  CHECK(std::abs(accumulate_phase(kg, loop).theta - accumulate_phase(k, loop).theta) <= 1e-8);
}

TEST_CASE("norm stretch: exp(Re Theta) is the norm ratio of the transported state") {
  // dX/ds = (1/2) K(s) X along the real axis, integrated independently by RK4.
  auto kf = [](double s) { return cplx(0.3 + 0.5 * std::sin(s), 0.4 * std::cos(2 * s)); };
  const double end = 2.0;
  const int n = 20000;
  cplx x = 1.0;
  const double h = end / n;
  for (int i = 0; i < n; ++i) {
    const double s = i * h;
    const cplx k1 = 0.5 * kf(s) * x;
    const cplx k2 = 0.5 * kf(s + h / 2) * (x + 0.5 * h * k1);
    const cplx k3 = 0.5 * kf(s + h / 2) * (x + 0.5 * h * k2);
    const cplx k4 = 0.5 * kf(s + h) * (x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  std::vector<cplx> pts;
  for (int i = 0; i <= 100000; ++i) pts.push_back(cplx(end * i / 100000.0, 0.0));
  const auto rec = accumulate_phase(single([&](cplx t) { return kf(t.real()); }), Path::from_points(pts, false));
  CHECK(std::abs(std::exp(rec.re_part) - std::abs(x)) <= 1e-8);
  CHECK(std::exp(rec.re_part) > 0.0);
}

TEST_CASE("spin-1/2 cone: geometric phase is minus half the solid angle") {
  for (double theta : {M_PI / 3, 0.4, 2.0}) {
    const double solid = 2 * M_PI * (1 - std::cos(theta));
    const auto states = cone_loop(theta, 10000);
    const auto rec = accumulate_phase(states, true);
    INFO("theta " << theta);
    CHECK(std::abs(rec.im_part - (-solid / 2)) <= 1e-4);
    CHECK(std::abs(berry_phase_connection(states) - rec.im_part) <= 1e-6);
    CHECK(rec.re_part >= 0.0);
    CHECK(rec.re_part <= 1e-3);
  }
  // the overlap route does not care about the gauge of each sample
  auto states = cone_loop(M_PI / 3, 10000);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 2 * M_PI);
  for (auto& s : states) s *= std::exp(I * u(rng));
  // equal up to a multiple of 2 pi, since each increment takes the principal log
  CHECK(std::abs(std::remainder(accumulate_phase(states, true).im_part + M_PI / 2, 2 * M_PI)) <= 1e-4);
}

TEST_CASE("Stokes: zero field") {
  const CoordinateChart c({time_axis("t", 7, 1.0)});
  const auto k = sample_k(c, {[](std::span<const cplx>) { return cplx(0.0); }});
  const auto rep = stokes_check(k, Path::rectangle(c, 0, 0, 7, 1, 7));
  CHECK(rep.line == cplx(0.0));
  CHECK(rep.surface == 0.0);
  CHECK(rep.gap == 0.0);
}

TEST_CASE("Stokes: B flux matches the loop for a constant field strength") {
  // K = i conj(t)/2 has F = i/2 and B = i everywhere: (1/4) flux = -area/2.
  const CoordinateChart c({time_axis("t", 9, 1.0)});
  const auto k = sample_k(c, {[](std::span<const cplx> p) { return 0.5 * I * std::conj(p[0]); }});
  const auto loop = Path::rectangle(c, 0, 0, 9, 1, 9);
  const auto rep = stokes_check(k, loop);
  CHECK(rep.surface == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(rep.gap <= 1e-12);
  // clockwise traversal flips both sides
  const auto rev = stokes_check(k, loop.reversed());
  CHECK(rev.surface == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rev.gap <= 1e-12);
}

TEST_CASE("Stokes: integrable field converges at second order") {
  const double g1 = integrable_gap(9), g2 = integrable_gap(17), g3 = integrable_gap(33);
  INFO(g1 << " " << g2 << " " << g3);
  CHECK(g1 / g2 >= 3.0);
  CHECK(g1 / g2 <= 5.0);
  CHECK(g2 / g3 >= 3.0);
  CHECK(g2 / g3 <= 5.0);
}

TEST_CASE("Stokes: non-closed field leaves a large gap") {
  const int n = 9;
  const CoordinateChart c({time_axis("t1", n, 0.5, 0.6), time_axis("t2", n, 0.5, 0.6)});
  // K_1 = Re t1 Re t2, K_2 = 0 has dB != 0
  const auto bad = sample_k(c, {[](std::span<const cplx> p) { return cplx(p[0].real() * p[1].real()); },
                                [](std::span<const cplx>) { return cplx(0.0); }});
  // K_a = d_a phi with phi = |t1|^2 |t2|^2 + Re t1 Re t2 is integrable
  const auto good = sample_k(c, {[](std::span<const cplx> p) {
                                   return std::conj(p[0]) * std::norm(p[1]) + 0.5 * p[1].real();
                                 },
                                 [](std::span<const cplx> p) {
                                   return std::conj(p[1]) * std::norm(p[0]) + 0.5 * p[0].real();
                                 }});
  const auto loop = Path::rectangle(c, 0, 0, n, 2, n);
  const auto bad_rep = stokes_check(bad, loop);
  const auto good_rep = stokes_check(good, loop);
  INFO(bad_rep.gap << " " << good_rep.gap);
  CHECK(bad_rep.gap > 10.0 * good_rep.gap);
  CHECK(bad_rep.gap > 1e-3);
}

TEST_CASE("Stokes: loop must be a grid rectangle") {
  const CoordinateChart c({time_axis("t", 9, 1.0)});
  const auto k = sample_k(c, {[](std::span<const cplx> p) { return p[0]; }});
  CHECK_THROWS_AS(stokes_check(k, Path::circle(0.0, 0.5, 12)), Error);
  auto loop = Path::rectangle(c, 0, 0, 4, 1, 4);
  loop.samples[2][0] += cplx(0.01, 0.0);
  CHECK_THROWS_AS(stokes_check(k, loop), Error);
  CHECK_THROWS_AS(stokes_check(k, Path::from_points({cplx(-1, -1), cplx(-0.75, -1)}, false)), Error);
}

TEST_CASE("Anandan-Aharonov: stationary state") {
  CMatrix h = CMatrix::Zero(3, 3);
  h.diagonal() << 1.0, 2.0, 5.0;
  CVector psi = CVector::Zero(3);
  psi(1) = 1.0;
  const auto aa = anandan_aharonov(h, psi, 1e-3, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(aa.fs_speed2[i] <= 1e-12);
    CHECK(aa.energy_variance[i] <= 1e-12);
  }
}

TEST_CASE("Anandan-Aharonov: two-level closed form") {
  const double e1 = 0.5, e2 = 2.0;
  CMatrix h = CMatrix::Zero(2, 2);
  h.diagonal() << e1, e2;
  CVector psi(2);
  psi << 1.0, 1.0;
  psi /= std::sqrt(2.0);
  const double var = (e1 - e2) * (e1 - e2) / 4;
  double prev = 0.0;
  for (double dt : {1e-2, 5e-3}) {
    const auto aa = anandan_aharonov(h, psi, dt, 3);
    CHECK(aa.energy_variance[0] == doctest::Approx(var).epsilon(1e-12));
    // |<psi|psi'>| = |cos((e1-e2) dt/2)|, so fs^2 = 2 (1 - cos(w dt/2)) / dt^2
    const double closed = 2.0 * (1.0 - std::cos((e2 - e1) * dt / 2)) / (dt * dt);
    CHECK(aa.fs_speed2[0] == doctest::Approx(closed).epsilon(1e-8));
    const double gap = std::abs(aa.fs_speed2[0] - var);
    if (prev > 0.0) CHECK(prev / gap == doctest::Approx(4.0).epsilon(0.05));
    prev = gap;
  }
}

TEST_CASE("Anandan-Aharonov: random five-level generators") {
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const CMatrix h = testing_support::random_hermitian(rng, 5);
    const CVector psi = testing_support::random_unit(rng, 5);
    const auto aa = anandan_aharonov(h, psi, 1e-4, 10);
    CHECK(aa.max_gap <= 1e-6);
  }
}

TEST_CASE("Anandan-Aharonov: non-Hermitian generator is rejected") {
  CMatrix h = CMatrix::Zero(2, 2);
  h(0, 1) = 1.0;
  CVector psi(2);
  psi << 1.0, 0.0;
  try {
    anandan_aharonov(h, psi, 1e-3, 2);
    FAIL("expected InvalidInput");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
  }
}
