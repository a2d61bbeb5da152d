#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "relstate/linalg.hpp"

namespace relstate::scenario {

using Json = nlohmann::ordered_json;

// A scenario that does not match the schema. `field` is the dotted path of the
// offending entry ("" for whole-document problems such as syntax errors).
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Engine { RelState, Geometry, Evolve, Bridge, Phase, Clock };

std::string engine_name(Engine e);

struct OutputSpec {
  std::string directory = "out";
  bool csv = true;
  bool json = true;
  int verbosity = 1;
};

// ---- engine blocks ---------------------------------------------------------

struct RelStateConfig {
  enum class Mode { Ensemble, Separable, Explicit } mode = Mode::Ensemble;
  int count = 200;
  int max_n = 6;
  double cond_bound = 1e3;
  // explicit mode
  CVector coefficients;
  std::vector<CVector> x_basis;
  std::vector<CVector> t_basis;
  CVector condition;
  bool renormalize = false;
  RVector expected;  // optional expected probabilities
  // tolerances
  double tol_projection = 1e-10;
  double tol_separable = 1e-12;
  double tol_trace = 1e-10;
  double tol_textbook = 1e-12;
};

struct GeometryConfig {
  enum class Fixture { FubiniStudy, Flat } fixture = Fixture::FubiniStudy;
  int base_nodes = 32;  // coarsest grid has base_nodes + 1 nodes per real direction
  int levels = 2;
  double half_width = 1.0;
  cplx centre{0.0, 0.0};
  double ratio_min = 3.0;
  double ratio_max = 5.0;
  double tol_flat = 1e-10;
};

struct EvolveConfig {
  double amplitude = 0.5;  // h = (1 + a sin t)^2
  double t_end = 2.0;
  std::vector<int> steps{20, 40, 80};
  int isolation_trials = 20;
  double order_min = 3.5;
  double order_max = 4.5;
  double tol_drift = 1e-10;
  double tol_isolation = 1e-8;
};

struct BridgeConfig {
  std::vector<double> omegas{20.0, 40.0, 80.0, 160.0};
  double horizon = 1.0;
  double dt_scale = 0.05;  // dt = dt_scale / omega
  int record_every = 10;
  int nodes = 32;
  double box = 16.0;
  double width = 1.5;
  double momentum = 1.0;
  double ratio_target = 2.0;
  double ratio_tolerance = 0.25;  // relative
};

struct PhaseConfig {
  bool spin_half = true;
  bool integrable_loop = true;
  bool stokes = true;
  bool anandan_aharonov = true;
  std::vector<double> cone_angles{1.0471975511965976, 0.4, 2.0};
  int loop_samples = 10000;
  std::vector<int> stokes_nodes{9, 17, 33};
  int aa_levels = 5;
  int aa_seeds = 100;
  double aa_dt = 1e-4;
  int aa_steps = 10;
  double tol_loop = 1e-8;
  double tol_solid_angle = 1e-4;
  double tol_routes = 1e-6;
  double stokes_ratio_min = 3.0;
  double stokes_ratio_max = 5.0;
  double tol_aa = 1e-6;
};

struct ClockConfig {
  enum class Mode { Ideal, Generic } mode = Mode::Ideal;
  int x_count = 128;
  double x_min = -10.0;
  double x_max = 10.0;
  bool spectral_ring = true;
  double m_x = 1.0;
  enum class Potential { Zero, Harmonic, Samples } potential = Potential::Zero;
  double potential_omega = 1.0;
  RVector potential_samples;
  int t_count = 128;
  double t_span = 0.0;  // 0: one turn of the lowest nonzero object energy
  bool ideal_clock = true;
  double m_t = 1.0;
  double clock_offset = 0.0;
  double packet_centre = 0.0;
  double packet_width = 1.5;
  double packet_momentum = 0.0;
  bool band_limit = true;
  std::vector<double> window_widths{0.5, 1.0, 2.0};  // in units of the clock step
  int window_index = 8;
  double zero_window = -1.0;
  double tol_fidelity = 1e-6;
  double tol_energy = 1e-8;
  double tol_residual = 1e-8;
};

using EngineConfig = std::variant<RelStateConfig, GeometryConfig, EvolveConfig, BridgeConfig, PhaseConfig, ClockConfig>;

struct Scenario {
  Engine engine = Engine::RelState;
  std::uint64_t seed = 0;
  std::string description;
  OutputSpec output;
  EngineConfig config;
  Json resolved;  // the document after overrides, with every default filled in
};

// Parses JSON text. Syntax errors report line and column.
Json parse_json(const std::string& text);
Json load_json(const std::filesystem::path& path);

// key=value with a dotted key. The value is read as JSON when it parses,
// otherwise as a plain string. Intermediate objects are created as needed.
void apply_override(Json& doc, const std::string& assignment);

// Validates the document strictly (unknown fields are errors) and builds the
// typed scenario.
Scenario parse_scenario(Json doc);

}  // namespace relstate::scenario
