#include "relstate/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace relstate::scenario {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* type_label(const Json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "a boolean";
  if (v.is_number()) return "a number";
  if (v.is_string()) return "a string";
  if (v.is_array()) return "an array";
  return "an object";
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Strict view of one JSON object. Every getter marks its key as consumed and
// writes the default back when the key is missing, so that the document ends
// up fully resolved. finish() rejects whatever was not consumed.
class Reader {
 public:
  Reader(Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw SchemaError(path_, std::string("expected an object, got ") + type_label(obj_));
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return obj_.contains(key); }

  double real(const std::string& key, double def, double lo = -kInf, double hi = kInf) {
    const Json& v = slot(key, def);
    if (!v.is_number()) throw SchemaError(where(key), std::string("expected a number, got ") + type_label(v));
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi)
      throw SchemaError(where(key), "value " + fmt(x) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
    return x;
  }

  double positive(const std::string& key, double def) {
    const double x = real(key, def);
    if (!(x > 0.0)) throw SchemaError(where(key), "must be positive");
    return x;
  }

  int integer(const std::string& key, int def, int lo, int hi) {
    const Json& v = slot(key, def);
    if (!v.is_number_integer()) throw SchemaError(where(key), std::string("expected an integer, got ") + type_label(v));
    const auto x = v.get<long long>();
    if (x < lo || x > hi)
      throw SchemaError(where(key), "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                                        std::to_string(hi) + "]");
    return static_cast<int>(x);
  }

  bool boolean(const std::string& key, bool def) {
    const Json& v = slot(key, def);
    if (!v.is_boolean()) throw SchemaError(where(key), std::string("expected a boolean, got ") + type_label(v));
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& def) {
    const Json& v = slot(key, def);
    if (!v.is_string()) throw SchemaError(where(key), std::string("expected a string, got ") + type_label(v));
    return v.get<std::string>();
  }

  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& options) {
    const std::string s = text(key, def);
    for (const auto& o : options)
      if (s == o) return s;
    std::string list;
    for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
    throw SchemaError(where(key), "'" + s + "' is not one of {" + list + "}");
  }

  std::vector<double> reals(const std::string& key, const std::vector<double>& def, std::size_t min_size) {
    const Json& v = slot(key, def);
    if (!v.is_array()) throw SchemaError(where(key), std::string("expected an array, got ") + type_label(v));
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw SchemaError(where(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
      if (!std::isfinite(out.back())) throw SchemaError(where(key) + "[" + std::to_string(i) + "]", "not finite");
    }
    if (out.size() < min_size)
      throw SchemaError(where(key), "needs at least " + std::to_string(min_size) + " entries");
    return out;
  }

  std::vector<int> integers(const std::string& key, const std::vector<int>& def, std::size_t min_size, int lo) {
    const Json& v = slot(key, def);
    if (!v.is_array()) throw SchemaError(where(key), std::string("expected an array, got ") + type_label(v));
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() || v[i].get<long long>() < lo)
        throw SchemaError(where(key) + "[" + std::to_string(i) + "]", "expected an integer >= " + std::to_string(lo));
      out.push_back(v[i].get<int>());
    }
    if (out.size() < min_size)
      throw SchemaError(where(key), "needs at least " + std::to_string(min_size) + " entries");
    return out;
  }

  cplx complex(const std::string& key, cplx def) {
    const Json& v = slot(key, Json::array({def.real(), def.imag()}));
    return to_complex(v, where(key));
  }

  CVector complex_vector(const std::string& key) {
    const Json& v = required(key);
    return to_complex_vector(v, where(key));
  }

  std::vector<CVector> complex_vectors(const std::string& key) {
    const Json& v = required(key);
    if (!v.is_array() || v.empty()) throw SchemaError(where(key), "expected a non-empty array of complex vectors");
    std::vector<CVector> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(to_complex_vector(v[i], where(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  Reader object(const std::string& key) {
    Json& v = slot(key, Json::object());
    return Reader(v, where(key));
  }

  const Json& value(const std::string& key, const Json& def) { return slot(key, def); }

  const Json& required(const std::string& key) {
    if (!obj_.contains(key)) throw SchemaError(where(key), "required field missing");
    seen_.insert(key);
    return obj_[key];
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw SchemaError(where(it.key()), "unknown field");
  }

 private:
  Json& slot(const std::string& key, const Json& def) {
    seen_.insert(key);
    if (!obj_.contains(key)) obj_[key] = def;
    return obj_[key];
  }

  static cplx to_complex(const Json& v, const std::string& at) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw SchemaError(at, "expected a complex number written as [re, im]");
    return {v[0].get<double>(), v[1].get<double>()};
  }

  static CVector to_complex_vector(const Json& v, const std::string& at) {
    if (!v.is_array() || v.empty()) throw SchemaError(at, "expected a non-empty array of [re, im] pairs");
    CVector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
      out(static_cast<Eigen::Index>(i)) = to_complex(v[i], at + "[" + std::to_string(i) + "]");
    return out;
  }

  Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

const std::vector<std::string> kEngineNames{"relstate", "geometry", "evolve", "bridge", "phase", "clock"};

RelStateConfig parse_relstate(Reader r) {
  RelStateConfig c;
  const auto mode = r.choice("mode", "ensemble", {"ensemble", "separable", "explicit"});
  c.mode = mode == "ensemble"    ? RelStateConfig::Mode::Ensemble
           : mode == "separable" ? RelStateConfig::Mode::Separable
                                 : RelStateConfig::Mode::Explicit;
  if (c.mode == RelStateConfig::Mode::Explicit) {
    c.coefficients = r.complex_vector("coefficients");
    c.x_basis = r.complex_vectors("x_basis");
    c.t_basis = r.complex_vectors("t_basis");
    c.condition = r.complex_vector("condition");
    c.renormalize = r.choice("normalization", "raw", {"raw", "renormalized"}) == "renormalized";
    if (r.has("expected")) {
      const auto e = r.reals("expected", {}, 1);
      c.expected = Eigen::Map<const RVector>(e.data(), static_cast<Eigen::Index>(e.size()));
    }
    const auto n = c.coefficients.size();
    if (static_cast<Eigen::Index>(c.x_basis.size()) != n) throw SchemaError(r.where("x_basis"), "needs one ket per coefficient");
    if (static_cast<Eigen::Index>(c.t_basis.size()) != n) throw SchemaError(r.where("t_basis"), "needs one ket per coefficient");
    if (c.condition.size() != n) throw SchemaError(r.where("condition"), "needs one amplitude per coefficient");
    if (c.expected.size() != 0 && c.expected.size() != n)
      throw SchemaError(r.where("expected"), "needs one probability per coefficient");
  } else {
    c.count = r.integer("count", c.count, 1, 100000);
    c.max_n = r.integer("max_n", c.max_n, 1, 16);
    c.cond_bound = r.real("cond_bound", c.cond_bound, 1.0 + 1e-9);
  }
  auto t = r.object("tolerances");
  c.tol_projection = t.positive("projection", c.tol_projection);
  c.tol_separable = t.positive("separable", c.tol_separable);
  c.tol_trace = t.positive("trace", c.tol_trace);
  c.tol_textbook = t.positive("textbook", c.tol_textbook);
  t.finish();
  r.finish();
  return c;
}

GeometryConfig parse_geometry(Reader r) {
  GeometryConfig c;
  c.fixture = r.choice("fixture", "fubini_study", {"fubini_study", "flat"}) == "flat" ? GeometryConfig::Fixture::Flat
                                                                                     : GeometryConfig::Fixture::FubiniStudy;
  c.base_nodes = r.integer("base_nodes", c.base_nodes, 4, 512);
  c.levels = r.integer("levels", c.levels, 1, 4);
  c.half_width = r.positive("half_width", c.half_width);
  c.centre = r.complex("centre", c.centre);
  auto t = r.object("tolerances");
  c.ratio_min = t.positive("ratio_min", c.ratio_min);
  c.ratio_max = t.positive("ratio_max", c.ratio_max);
  c.tol_flat = t.positive("flat", c.tol_flat);
  t.finish();
  r.finish();
  return c;
}

EvolveConfig parse_evolve(Reader r) {
  EvolveConfig c;
  c.amplitude = r.real("amplitude", c.amplitude, -0.9, 0.9);
  c.t_end = r.positive("t_end", c.t_end);
  c.steps = r.integers("steps", c.steps, 2, 1);
  c.isolation_trials = r.integer("isolation_trials", c.isolation_trials, 0, 10000);
  auto t = r.object("tolerances");
  c.order_min = t.real("order_min", c.order_min);
  c.order_max = t.real("order_max", c.order_max);
  c.tol_drift = t.positive("drift", c.tol_drift);
  c.tol_isolation = t.positive("isolation", c.tol_isolation);
  t.finish();
  r.finish();
  return c;
}

BridgeConfig parse_bridge(Reader r) {
  BridgeConfig c;
  c.omegas = r.reals("omegas", c.omegas, 2);
  for (std::size_t i = 0; i < c.omegas.size(); ++i)
    if (!(c.omegas[i] > 0.0)) throw SchemaError(r.where("omegas") + "[" + std::to_string(i) + "]", "must be positive");
  c.horizon = r.positive("horizon", c.horizon);
  c.dt_scale = r.positive("dt_scale", c.dt_scale);
  c.record_every = r.integer("record_every", c.record_every, 1, 100000);
  c.nodes = r.integer("nodes", c.nodes, 5, 512);
  c.box = r.positive("box", c.box);
  c.width = r.positive("width", c.width);
  c.momentum = r.real("momentum", c.momentum);
  auto t = r.object("tolerances");
  c.ratio_target = t.positive("ratio_target", c.ratio_target);
  c.ratio_tolerance = t.real("ratio_tolerance", c.ratio_tolerance, 0.0, 1.0);
  t.finish();
  r.finish();
  return c;
}

PhaseConfig parse_phase(Reader r) {
  PhaseConfig c;
  c.spin_half = r.boolean("spin_half", c.spin_half);
  c.integrable_loop = r.boolean("integrable_loop", c.integrable_loop);
  c.stokes = r.boolean("stokes", c.stokes);
  c.anandan_aharonov = r.boolean("anandan_aharonov", c.anandan_aharonov);
  c.cone_angles = r.reals("cone_angles", c.cone_angles, 1);
  c.loop_samples = r.integer("loop_samples", c.loop_samples, 8, 10000000);
  c.stokes_nodes = r.integers("stokes_nodes", c.stokes_nodes, 2, 5);
  c.aa_levels = r.integer("aa_levels", c.aa_levels, 2, 64);
  c.aa_seeds = r.integer("aa_seeds", c.aa_seeds, 1, 100000);
  c.aa_dt = r.positive("aa_dt", c.aa_dt);
  c.aa_steps = r.integer("aa_steps", c.aa_steps, 1, 1000000);
  auto t = r.object("tolerances");
  c.tol_loop = t.positive("loop", c.tol_loop);
  c.tol_solid_angle = t.positive("solid_angle", c.tol_solid_angle);
  c.tol_routes = t.positive("routes", c.tol_routes);
  c.stokes_ratio_min = t.positive("stokes_ratio_min", c.stokes_ratio_min);
  c.stokes_ratio_max = t.positive("stokes_ratio_max", c.stokes_ratio_max);
  c.tol_aa = t.positive("anandan_aharonov", c.tol_aa);
  t.finish();
  r.finish();
  if (!(c.spin_half || c.integrable_loop || c.stokes || c.anandan_aharonov))
    throw SchemaError("phase", "every sub-check is disabled");
  return c;
}

ClockConfig parse_clock(Reader r) {
  ClockConfig c;
  c.mode = r.choice("mode", "ideal", {"ideal", "generic"}) == "ideal" ? ClockConfig::Mode::Ideal
                                                                      : ClockConfig::Mode::Generic;
  {
    auto x = r.object("x");
    c.x_count = x.integer("count", c.x_count, 3, 4096);
    c.x_min = x.real("min", c.x_min);
    c.x_max = x.real("max", c.x_max);
    if (!(c.x_max > c.x_min)) throw SchemaError(x.where("max"), "must exceed min");
    c.spectral_ring = x.choice("kinetic", "spectral_ring", {"spectral_ring", "stencil"}) == "spectral_ring";
    c.m_x = x.positive("mass", c.m_x);
    x.finish();
  }
  {
    auto v = r.object("potential");
    const auto form = v.choice("form", "zero", {"zero", "harmonic", "samples"});
    if (form == "harmonic") {
      c.potential = ClockConfig::Potential::Harmonic;
      c.potential_omega = v.positive("omega", c.potential_omega);
    } else if (form == "samples") {
      c.potential = ClockConfig::Potential::Samples;
      const auto s = v.reals("samples", {}, 1);
      if (static_cast<int>(s.size()) != c.x_count) throw SchemaError(v.where("samples"), "needs one value per x node");
      c.potential_samples = Eigen::Map<const RVector>(s.data(), static_cast<Eigen::Index>(s.size()));
    }
    v.finish();
  }
  {
    auto t = r.object("t");
    c.t_count = t.integer("count", c.t_count, 2, 4096);
    c.t_span = t.real("span", c.t_span, 0.0);
    c.ideal_clock = t.choice("clock", "ideal", {"ideal", "massive"}) == "ideal";
    if (!c.ideal_clock) {
      c.m_t = t.positive("mass", c.m_t);
      c.clock_offset = t.real("offset", c.clock_offset);
    }
    t.finish();
  }
  if (c.mode == ClockConfig::Mode::Ideal) {
    if (!c.ideal_clock) throw SchemaError(r.where("t.clock"), "ideal mode needs the ideal clock");
    auto p = r.object("packet");
    c.packet_centre = p.real("centre", c.packet_centre);
    c.packet_width = p.positive("width", c.packet_width);
    c.packet_momentum = p.real("momentum", c.packet_momentum);
    c.band_limit = p.boolean("band_limit", c.band_limit);
    p.finish();
    auto w = r.object("window");
    c.window_widths = w.reals("widths", c.window_widths, 1);
    for (double s : c.window_widths)
      if (!(s > 0.0)) throw SchemaError(w.where("widths"), "widths must be positive");
    c.window_index = w.integer("centre_index", c.window_index, 0, c.t_count - 1);
    w.finish();
  } else {
    c.zero_window = r.real("zero_window", c.zero_window);
  }
  auto t = r.object("tolerances");
  c.tol_fidelity = t.positive("fidelity", c.tol_fidelity);
  c.tol_energy = t.positive("mean_energy", c.tol_energy);
  c.tol_residual = t.positive("residual", c.tol_residual);
  t.finish();
  r.finish();
  return c;
}

}  // namespace

std::string engine_name(Engine e) { return kEngineNames[static_cast<std::size_t>(e)]; }

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SchemaError("", "syntax error at line " + std::to_string(line) + ", column " + std::to_string(col));
  }
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str());
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw SchemaError("", "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  Json parsed;
  try {
    parsed = Json::parse(value);
  } catch (const Json::parse_error&) {
    parsed = value;
  }
  Json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw SchemaError(key, "empty path component in override");
    if (!node->is_object()) throw SchemaError(key, "override descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

Scenario parse_scenario(Json doc) {
  Scenario s;
  Reader top(doc, "");
  if (!doc.contains("engine")) throw SchemaError("engine", "required field missing");
  const std::string name = top.choice("engine", "", kEngineNames);
  s.engine = static_cast<Engine>(std::find(kEngineNames.begin(), kEngineNames.end(), name) - kEngineNames.begin());
  const Json& seed = top.required("seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    throw SchemaError("seed", "expected a non-negative integer");
  s.seed = seed.get<std::uint64_t>();
  s.description = top.text("description", "");
  {
    auto out = top.object("output");
    s.output.directory = out.text("directory", s.output.directory);
    const Json formats = out.value("formats", Json::array({"csv", "json"}));
    if (!formats.is_array() || formats.empty()) throw SchemaError("output.formats", "expected a non-empty array");
    s.output.csv = s.output.json = false;
    for (const auto& f : formats) {
      if (f == "csv") s.output.csv = true;
      else if (f == "json") s.output.json = true;
      else throw SchemaError("output.formats", "unknown format " + f.dump());
    }
    s.output.verbosity = out.integer("verbosity", s.output.verbosity, 0, 3);
    out.finish();
  }
  for (const auto& other : kEngineNames)
    if (other != name && doc.contains(other))
      throw SchemaError(other, "exactly one engine block is allowed and the engine is '" + name + "'");
  if (!doc.contains(name)) throw SchemaError(name, "engine block missing");
  auto block = top.object(name);
  switch (s.engine) {
    case Engine::RelState: s.config = parse_relstate(block); break;
    case Engine::Geometry: s.config = parse_geometry(block); break;
    case Engine::Evolve: s.config = parse_evolve(block); break;
    case Engine::Bridge: s.config = parse_bridge(block); break;
    case Engine::Phase: s.config = parse_phase(block); break;
    case Engine::Clock: s.config = parse_clock(block); break;
  }
  top.finish();
  s.resolved = std::move(doc);
  return s;
}

}  // namespace relstate::scenario
