// relstate command-line front end.
//
//   relstate run <file> [--set key=value]... [--label NAME] [--out DIR]
//   relstate validate <file>
//   relstate list-fixtures
//
// Exit status: 0 when every scenario tolerance holds, 2 when a tolerance
// fails, 1 on schema or engine errors.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>

#include "relstate/engines.hpp"
#include "relstate/error.hpp"

namespace fs = std::filesystem;
using namespace relstate;

namespace {

std::string timestamp_label() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &utc);
  return buf;
}

fs::path fixture_dir() {
  if (const char* env = std::getenv("RELSTATE_FIXTURES")) return env;
  return RELSTATE_FIXTURE_DIR;
}

// A bare fixture name resolves to fixtures/<name>.json.
fs::path resolve_scenario_path(const std::string& arg) {
  fs::path p(arg);
  if (fs::exists(p)) return p;
  if (!p.has_parent_path()) {
    const fs::path candidate = fixture_dir() / (p.extension() == ".json" ? p : fs::path(arg + ".json"));
    if (fs::exists(candidate)) return candidate;
  }
  return p;
}

scenario::Scenario load(const std::string& file, const std::vector<std::string>& overrides,
                        const std::string& out_dir = {}) {
  auto doc = scenario::load_json(resolve_scenario_path(file));
  for (const auto& o : overrides) scenario::apply_override(doc, o);
  if (!out_dir.empty()) {
    if (!doc.contains("output") || !doc["output"].is_object()) doc["output"] = scenario::Json::object();
    doc["output"]["directory"] = out_dir;
  }
  return scenario::parse_scenario(std::move(doc));
}

int list_fixtures() {
  std::vector<fs::path> files;
  if (fs::is_directory(fixture_dir()))
    for (const auto& e : fs::directory_iterator(fixture_dir()))
      if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::string engine = "?", description;
    try {
      const auto doc = scenario::load_json(f);
      engine = doc.value("engine", "?");
      description = doc.value("description", "");
    } catch (const std::exception&) {
      description = "(unreadable)";
    }
    std::cout << f.stem().string() << "  [" << engine << "]  " << description << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relstate: relative-state numerics driven by scenario files"};
  app.require_subcommand(1);

  std::string file, label, out_dir;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "run a scenario file (or a fixture name)");
  run->add_option("file", file, "scenario file")->required();
  run->add_option("--set", overrides, "override a field, key=value with a dotted key")->take_all()->allow_extra_args(false);
  run->add_option("--label", label, "result file label (default: UTC timestamp)");
  run->add_option("--out", out_dir, "output directory (overrides output.directory)");

  std::string vfile;
  auto* validate = app.add_subcommand("validate", "check a scenario file against the schema");
  validate->add_option("file", vfile, "scenario file")->required();

  app.add_subcommand("list-fixtures", "list shipped fixtures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("list-fixtures")) return list_fixtures();
    if (app.got_subcommand("validate")) {
      const auto s = load(vfile, {});
      std::cout << "valid: engine " << scenario::engine_name(s.engine) << "\n";
      return 0;
    }
    const auto s = load(file, overrides, out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = engines::run(s);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto written = engines::write_artifacts(s, result, s.output.directory, label.empty() ? timestamp_label() : label);
    std::cout << engines::summary_line(s, result) << "\n";
    if (s.output.verbosity >= 1) {
      for (const auto& c : result.checks)
        std::cout << "  " << (c.pass() ? "ok   " : "FAIL ") << c.name << " = " << c.value << "\n";
      for (const auto& p : written) std::cout << "  wrote " << p.string() << "\n";
    }
    if (s.output.verbosity >= 2) std::cout << "  runtime " << secs << " s\n";
    return result.passed() ? 0 : 2;
  } catch (const scenario::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "engine error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
