// Acceptance run: one line per criterion, PASS or FAIL, with the measured
// numbers next to their pinned limits. Every reference value comes from a
// test-side oracle rather than from the library routine under test.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "ambient_oracle.hpp"
#include "relstate/bridge.hpp"
#include "relstate/clockworks.hpp"
#include "relstate/evolution.hpp"
#include "relstate/geometry.hpp"
#include "relstate/phase.hpp"
#include "test_support.hpp"

using namespace relstate;
using testing_support::max_abs;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream notes;

  // value <= limit
  void upper(const char* name, double value, double limit) {
    const bool ok = value <= limit;
    pass = pass && ok;
    notes << " " << name << "=" << value << (ok ? "<=" : ">") << limit;
  }
  void range(const char* name, double value, double lo, double hi) {
    const bool ok = value >= lo && value <= hi;
    pass = pass && ok;
    notes << " " << name << "=" << value << (ok ? " in " : " outside ") << "[" << lo << "," << hi << "]";
  }
  void flag(const char* name, bool ok) {
    pass = pass && ok;
    notes << " " << name << "=" << (ok ? "yes" : "no");
  }
};

int failures = 0;

void criterion(int id, const char* title, double time_limit, const std::function<void(Verdict&)>& body) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.notes << " exception: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit > 0) v.upper("runtime_s", secs, time_limit);
  if (!v.pass) ++failures;
  std::cout << "[" << (v.pass ? "PASS" : "FAIL") << "] " << id << ". " << title << " |" << v.notes.str() << std::endl;
}

std::vector<CVector> identity_basis(Eigen::Index n) {
  std::vector<CVector> b;
  for (Eigen::Index i = 0; i < n; ++i) b.push_back(CVector::Unit(n, i));
  return b;
}

// Ensemble shared by the first two criteria.
struct Instance {
  EntangledState state;
  CVector condition;
};

std::vector<Instance> ensemble() {
  std::mt19937_64 rng(20240601);
  std::vector<Instance> out;
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index n = 1 + k % 6;
    const Eigen::Index d = n + k % 2;
    auto state = testing_support::random_state(rng, n, d);
    out.push_back({std::move(state), testing_support::random_vector(rng, n)});
  }
  return out;
}

CMatrix fubini_study(std::span<const cplx> z) {
  return CMatrix::Constant(1, 1, 1.0 / ((1.0 + std::norm(z[0])) * (1.0 + std::norm(z[0]))));
}

double fs_error(int base, int scale) {
  ComplexAxis a;
  a.label = "x";
  a.re_min = a.im_min = -1.0;
  a.re_max = a.im_max = 1.0;
  a.re_count = a.im_count = base * scale + 1;
  const CoordinateChart c({a});
  const auto h = MetricField::sample(c, fubini_study);
  double worst = 0.0;
  for (int i = 2; i < base - 1; ++i)
    for (int j = 2; j < base - 1; ++j) {
      const std::size_t node = c.node_at(std::vector<int>{i * scale, j * scale});
      const double r2 = std::norm(c.coordinate(node, 0));
      worst = std::max(worst, std::abs(geometry::ricci(h, node)(0, 0) - 2.0 / ((1.0 + r2) * (1.0 + r2))));
    }
  return worst;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RELSTATE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

int main() {
  std::cout.precision(3);
  const auto cases = ensemble();

  criterion(1, "relative-probability oracle (200 states, N<=6)", 10.0, [&](Verdict& v) {
    double proj = 0.0, sep = 0.0;
    std::mt19937_64 rng(99);
    for (const auto& in : cases) {
      const auto dist = conditional_project(in.state, {in.condition});
      const CVector oracle = ambient_oracle::projected_coefficients(in.state, in.condition);
      for (Eigen::Index i = 0; i < in.state.size(); ++i)
        proj = std::max(proj, std::abs(dist.amplitudes[static_cast<std::size_t>(i)] - oracle(i)));
      // separable instance on the same bases: C = a b, conditioned on a
      const Eigen::Index n = in.state.size();
      const CVector a = testing_support::random_vector(rng, n);
      CVector b = testing_support::random_vector(rng, n);
      b /= a.cwiseProduct(b).norm();
      const EntangledState s(a.cwiseProduct(b), in.state.x_basis(), in.state.t_basis());
      const auto sd = conditional_project(s, {a});
      for (Eigen::Index i = 0; i < n; ++i)
        sep = std::max(sep, std::abs(sd.probabilities[static_cast<std::size_t>(i)] - std::norm(b(i))));
    }
    v.upper("projection_dev", proj, 1e-10);
    v.upper("separable_dev", sep, 1e-12);
  });

  criterion(2, "metric partial trace", 0.0, [&](Verdict& v) {
    double diag = 0.0, full = 0.0, textbook = 0.0;
    for (const auto& in : cases) {
      const CMatrix m = partial_trace_metric(in.state, Subsystem::T);
      // raw relative probabilities at the condition |a_i|^2 = 1 / (G^-1)_ii,
      // with G and the projection both evaluated in the product space
      const CMatrix bt = ambient_oracle::stack(in.state.t_basis().vectors());
      const CMatrix ginv = (bt.adjoint() * bt).inverse();
      CVector a(in.state.size());
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = 1.0 / std::sqrt(ginv(i, i).real());
      const CVector amp = ambient_oracle::projected_coefficients(in.state, a);
      for (Eigen::Index i = 0; i < a.size(); ++i) diag = std::max(diag, std::abs(m(i, i) - std::norm(amp(i))));
      full = std::max(full, max_abs(m - ambient_oracle::metric_partial_trace(in.state)));
      const EntangledState ortho(in.state.coefficients(), in.state.x_basis(),
                                 BasisFamily(identity_basis(in.state.size()), Signature::Timelike));
      if (in.state.x_basis().ambient_dim() == in.state.size())
        textbook = std::max(textbook, max_abs(partial_trace_metric(ortho) - ambient_oracle::textbook_partial_trace(ortho)));
    }
    v.upper("diagonal_vs_raw", diag, 1e-10);
    v.upper("contraction_dev", full, 1e-10);
    v.upper("orthonormal_vs_textbook", textbook, 1e-12);
  });

  criterion(3, "curvature engine (Fubini-Study R = 2h, flat)", 30.0, [&](Verdict& v) {
    const double e32 = fs_error(32, 1), e64 = fs_error(32, 2);
    v.range("ratio_33_to_65_nodes", e32 / e64, 3.0, 5.0);
    ComplexAxis a;
    a.label = "x";
    a.re_count = a.im_count = 64;
    const CoordinateChart c({a});
    const auto flat = MetricField::sample(c, [](std::span<const cplx>) { return CMatrix(CMatrix::Identity(1, 1)); });
    double worst = 0.0;
    for (std::size_t n = 0; n < c.node_count(); ++n)
      if (c.margin(n, 0) >= 2 && c.margin(n, 1) >= 2) worst = std::max(worst, max_abs(geometry::ricci(flat, n).matrix()));
    v.upper("flat_ricci", worst, 1e-10);
  });

  criterion(4, "Gauss-Codazzi integrator", 0.0, [&](Verdict& v) {
    using namespace relstate::evolution;
    auto w = [](double t) { return 1.0 + 0.5 * std::sin(t); };
    double err[3];
    const int steps[3] = {20, 40, 80};
    for (int k = 0; k < 3; ++k) {
      GaussCodazziIntegrator gc([&](const HermitianMatrix&, double t) { return CMatrix::Constant(1, 1, 0.5 * w(t) * std::sin(t)); });
      EvolutionState s;
      s.h = HermitianMatrix::from(CMatrix::Constant(1, 1, 1.0));
      s.hdot = CMatrix::Constant(1, 1, 1.0);
      s.step = 2.0 / steps[k];
      err[k] = std::abs(gc.run(s, steps[k]).h.matrix()(0, 0) - w(2.0) * w(2.0));
    }
    v.range("order_20_40", std::log2(err[0] / err[1]), 3.5, 4.5);
    v.range("order_40_80", std::log2(err[1] / err[2]), 3.5, 4.5);

    // rotated two-level metric U diag(f1^2, f2^2) U^dagger; R from the equation
    std::mt19937_64 rng(8);
    const CMatrix u = testing_support::random_matrix(rng, 2, 2).householderQr().householderQ();
    auto exact = [&](double t, int d) {
      const double f[2] = {1.0 + 0.3 * std::sin(t), 1.0 + 0.2 * std::sin(1.7 * t)};
      const double fp[2] = {0.3 * std::cos(t), 0.34 * std::cos(1.7 * t)};
      const double fpp[2] = {-0.3 * std::sin(t), -0.578 * std::sin(1.7 * t)};
      CMatrix dm = CMatrix::Zero(2, 2);
      for (int i = 0; i < 2; ++i) dm(i, i) = d == 0 ? f[i] * f[i] : d == 1 ? 2 * f[i] * fp[i] : 2 * (fp[i] * fp[i] + f[i] * fpp[i]);
      return CMatrix(u * dm * u.adjoint());
    };
    GaussCodazziIntegrator gc([&](const HermitianMatrix&, double t) {
      const CMatrix h = exact(t, 0), hd = exact(t, 1), hdd = exact(t, 2);
      const CMatrix hinv = h.inverse();
      // hdd = -2R - (1/2) tr(h^-1 hd) hd + hd h^-1 hd, solved for R
      return CMatrix(0.5 * (hd * hinv * hd - 0.5 * (hinv * hd).trace() * hd - hdd));
    });
    EvolutionState s;
    s.h = HermitianMatrix::from(linalg::hermitize(exact(0, 0)));
    s.hdot = exact(0, 1);
    s.step = 0.025;
    gc.run(s, 80);
    double drift = 0.0;
    for (const auto& rec : gc.trajectory()) drift = std::max(drift, rec.hermiticity_drift);
    v.upper("drift_per_step", drift, 1e-10);

    double r_only = 0.0, k_only = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 1 + trial % 4;
      const auto h = HermitianMatrix::from(testing_support::random_positive_definite(rng, n));
      const CMatrix r = testing_support::random_hermitian(rng, n), hd = testing_support::random_hermitian(rng, n);
      const CMatrix z = CMatrix::Zero(n, n), hinv = h.matrix().inverse();
      r_only = std::max(r_only, max_abs(gc_rhs(h, z, r) + 2.0 * r));
      k_only = std::max(k_only, max_abs(gc_rhs(h, hd, z) - (hd * hinv * hd - 0.5 * (hinv * hd).trace() * hd)));
    }
    v.upper("isolation_R", r_only, 1e-8);
    v.upper("isolation_K", k_only, 1e-8);
  });

  criterion(5, "Schrodinger limit (gap halves per omega octave)", 120.0, [&](Verdict& v) {
    using namespace relstate::bridge;
    std::vector<LimitReport> reps;
    for (double omega : {20.0, 40.0, 80.0, 160.0}) {
      const auto fx = gaussian_fixture(omega);
      CarrierRunOptions o;
      o.omega = omega;
      o.dt = 0.05 / omega;
      o.record_every = 10;
      o.samples = static_cast<int>(std::lround(1.0 / (o.dt * o.record_every)));
      const auto fast = run_carrier(fx.chart, fx.e0, o);
      const ReferenceSchrodinger ref(fx.chart, omega, o.dt);
      reps.push_back(limit_comparison(fast, omega, ref.run(fx.e0, o.samples, o.record_every)));
    }
    v.range("ratio_20_40", reps[0].max_l2 / reps[1].max_l2, 1.5, 2.5);
    v.range("ratio_40_80", reps[1].max_l2 / reps[2].max_l2, 1.5, 2.5);
    v.range("ratio_80_160", reps[2].max_l2 / reps[3].max_l2, 1.5, 2.5);
  });

  criterion(6, "phase suite", 0.0, [&](Verdict& v) {
    using namespace relstate::phase;
    const KField k = [](std::span<const cplx> p) { return std::vector<cplx>{std::cos(p[0]) + 3.0 * p[0] * p[0]}; };
    v.upper("integrable_loop", std::abs(accumulate_phase(k, Path::circle(cplx(0.2, -0.1), 0.8, 10000)).theta), 1e-8);

    double solid = 0.0, routes = 0.0;
    for (double theta : {M_PI / 3, 0.4, 2.0}) {
      std::vector<CVector> states;
      for (int j = 0; j < 10000; ++j) {
        CVector s(2);
        s << std::cos(theta / 2), std::exp(I * (2 * M_PI * j / 10000)) * std::sin(theta / 2);
        states.push_back(s);
      }
      const auto rec = accumulate_phase(states, true);
      solid = std::max(solid, std::abs(rec.im_part + M_PI * (1 - std::cos(theta))));
      routes = std::max(routes, std::abs(berry_phase_connection(states) - rec.im_part));
    }
    v.upper("spin_half_vs_solid_angle", solid, 1e-4);
    v.upper("pancharatnam_vs_connection", routes, 1e-6);

    auto gap = [](int n) {
      ComplexAxis a;
      a.label = "t";
      a.role = AxisRole::Time;
      a.re_min = a.im_min = -0.2;
      a.re_max = a.im_max = 0.8;
      a.re_count = a.im_count = n;
      const CoordinateChart c({a});
      std::vector<ScalarField> kf{ScalarField::sample(c, [](std::span<const cplx> p) {
        return std::conj(p[0]) + 0.5 * p[0] * p[0] + I * std::conj(p[0]) * std::exp(0.7 * p[0].real() + 0.3 * p[0].imag());
      })};
      return stokes_check(kf, Path::rectangle(c, 0, 0, n, 1, n)).gap;
    };
    const double g9 = gap(9), g17 = gap(17), g33 = gap(33);
    v.range("stokes_ratio_9_17", g9 / g17, 3.0, 5.0);
    v.range("stokes_ratio_17_33", g17 / g33, 3.0, 5.0);
  });

  criterion(7, "Anandan-Aharonov (100 five-level generators)", 0.0, [&](Verdict& v) {
    double worst = 0.0;
    for (int seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(5000 + seed);
      const CMatrix h = testing_support::random_hermitian(rng, 5);
      const CVector psi = testing_support::random_unit(rng, 5);
      worst = std::max(worst, phase::anandan_aharonov(h, psi, 1e-4, 10).max_gap);
    }
    v.upper("max_gap", worst, 1e-6);
  });

  criterion(8, "clockworks (ideal clock, D_x = D_t = 128)", 120.0, [&](Verdict& v) {
    using namespace relstate::clock;
    ClockSystemModel m;
    m.kinetic = Kinetic::SpectralRing;
    m.x_count = m.t_count = 128;
    m.x_min = -10.0;
    m.x_max = 10.0;
    const double k1 = 2.0 * M_PI / 20.0;
    m.t_span = 2.0 * M_PI / (0.5 * k1 * k1);
    CVector g(m.x_count);
    for (int i = 0; i < m.x_count; ++i) {
      const double x = m.x_at(i) + 2.0;
      g(i) = std::exp(-x * x / 9.0 + I * 0.8 * x);
    }
    CVector psi0 = band_limit(m, g / g.norm());
    psi0 /= psi0.norm();
    const auto sol = solve_constraint(m, psi0);

    // plane-wave oracle: c_k from a direct DFT, phases exp(-i k^2 t / 2)
    std::vector<double> ks;
    std::vector<cplx> ck;
    for (int j = 0; j < m.x_count; ++j) {
      const int s = j < m.x_count / 2 ? j : j - m.x_count;
      const double k = k1 * s;
      cplx c = 0.0;
      for (int a = 0; a < m.x_count; ++a) c += std::exp(-I * k * m.x_at(a)) * psi0(a);
      ks.push_back(k);
      ck.push_back(c / static_cast<double>(m.x_count));
    }
    double worst = 1.0;
    for (int j = 0; j < m.t_count; ++j) {
      const double t = m.t_at(j);
      CVector ref = CVector::Zero(m.x_count);
      for (std::size_t q = 0; q < ks.size(); ++q)
        for (int a = 0; a < m.x_count; ++a) ref(a) += ck[q] * std::exp(I * (ks[q] * m.x_at(a) - 0.5 * ks[q] * ks[q] * t));
      const CVector slice = condition_on_clock(sol, m, t);
      worst = std::min(worst, std::norm(ref.dot(slice)) / (ref.squaredNorm() * slice.squaredNorm()));
    }
    v.range("min_fidelity", worst, 1.0 - 1e-6, 1.0 + 1e-12);

    const CVector hpsi = apply_total(build_hamiltonians(m), sol.psi);
    v.upper("abs_mean_energy", std::abs(sol.psi.dot(hpsi)) / sol.psi.squaredNorm(), 1e-8);

    const double tc = m.t_at(8);
    const CVector exact = condition_on_clock(sol, m, tc);
    double dev[3];
    const double widths[3] = {0.5, 1.0, 2.0};
    for (int i = 0; i < 3; ++i) dev[i] = 1.0 - fidelity(condition_on_window(sol, m, tc, widths[i] * m.dt()), exact);
    v.flag("window_monotonic", dev[0] > 0.0 && dev[0] < dev[1] && dev[1] < dev[2]);
  });

  criterion(9, "determinism (repeated CLI runs)", 0.0, [&](Verdict& v) {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "relstate_acceptance";
    fs::remove_all(root);
    bool same = true;
    for (const char* fixture : {"relative_probability", "ideal_clock", "anandan_aharonov"}) {
      for (const char* run : {"a", "b"})
        if (run_cli(std::string("run ") + fixture + " --label det --out " + (root / run).string()) != 0) same = false;
      for (const char* ext : {".csv", ".json"}) {
        std::string engine = std::string(fixture) == "ideal_clock" ? "clock" : std::string(fixture) == "anandan_aharonov" ? "phase" : "relstate";
        const auto name = engine + "_det" + ext;
        const std::string x = slurp(root / "a" / name), y = slurp(root / "b" / name);
        same = same && !x.empty() && x == y;
      }
    }
    v.flag("byte_identical", same);
  });

  std::cout << (failures ? "acceptance: FAILED " + std::to_string(failures) + " of 9" : std::string("acceptance: all 9 passed"))
            << std::endl;
  return failures ? 1 : 0;
}
