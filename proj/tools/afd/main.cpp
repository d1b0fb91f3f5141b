#include "CLI11.hpp"
#include "commands.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

namespace {

using namespace afd::cli;

using Command = RunResult (*)(const json&, json&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table = {
      {"eigen", cmd_eigen},       {"pseudotrue", cmd_pseudotrue}, {"estimate", cmd_estimate},
      {"simulate", cmd_simulate}, {"effects", cmd_effects},       {"rates", cmd_rates},
  };
  return table;
}

std::size_t resolve_threads(int flag) {
  if (flag >= 0) return static_cast<std::size_t>(flag);
  if (const char* env = std::getenv("AFD_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("AFD_THREADS: expected a nonnegative integer, got '") + env + "'");
  }
  return 0;
}

struct OutputSpec {
  std::filesystem::path path;
  Format format = Format::csv;
  std::filesystem::path sidecar;
};

OutputSpec parse_output(const json& cfg, json& resolved, const std::string& sub, const std::string& out_flag) {
  Block b(child(cfg, "output"), resolved["output"], "output", {"path", "format", "sidecar"});
  OutputSpec o;
  const auto fmt = b.get<std::string>("format", "csv");
  if (fmt == "csv") o.format = Format::csv;
  else if (fmt == "json") o.format = Format::json;
  else throw ConfigError("output.format: expected 'csv' or 'json'");
  std::string path = b.get<std::string>("path", sub + (fmt == "csv" ? ".csv" : ".json"));
  if (!out_flag.empty()) {
    path = out_flag;
    b.resolved()["path"] = path;
  }
  o.path = path;
  o.sidecar = b.get<std::string>("sidecar", path + ".sidecar.json");
  if (!out_flag.empty()) {
    o.sidecar = path + ".sidecar.json";
    b.resolved()["sidecar"] = o.sidecar.string();
  }
  return o;
}

int run_command(const std::string& sub, const std::string& config_path, const std::string& out_flag,
                std::size_t threads) {
  const auto start = std::chrono::steady_clock::now();
  const json cfg = config_path.empty() ? json::object() : load_config(config_path);
  json resolved = json::object();
  resolved["schema"] = kSchema;
  const OutputSpec out = parse_output(cfg, resolved, sub, out_flag);
  if (!config_path.empty()) {
    const auto in = std::filesystem::weakly_canonical(config_path);
    if (std::filesystem::weakly_canonical(out.path) == in || std::filesystem::weakly_canonical(out.sidecar) == in) {
      throw ConfigError("output would overwrite the input config '" + config_path + "'; pass --out");
    }
  }
  const RunResult result = commands().at(sub)(cfg, resolved);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json sidecar = resolved;
  sidecar["run"] = {
      {"subcommand", sub},
      {"afd_version", afd::version()},
      {"threads", afd::thread_count()},
      {"threads_requested", threads},
      {"wall_time_seconds", wall},
      {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
      {"boost_version", BOOST_LIB_VERSION},
  };
  sidecar["diagnostics"] = result.diagnostics;
  sidecar["outputs"] = {{"table", out.path.string()}, {"rows", result.table.rows.size()}};

  emit_table(result.table, out.format, out.path);
  atomic_write(out.sidecar, sidecar.dump(2) + "\n");
  std::cerr << "afd: wrote " << out.path.string() << " (" << result.table.rows.size() << " rows) and "
            << out.sidecar.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"afd: bias-corrected moment estimation for short nonlinear panels"};
  app.set_version_flag("--version", std::string(afd::version()));
  app.require_subcommand(1);
  int threads_flag = -1;
  std::string config_path, out_flag;
  app.add_option("--threads", threads_flag, "worker threads (0 = all cores; falls back to AFD_THREADS)")
      ->check(CLI::NonNegativeNumber);
  for (const auto& [name, _] : commands()) {
    auto* sc = app.add_subcommand(name);
    sc->add_option("--config", config_path, "JSON config (afd-config/1)");
    sc->add_option("--out", out_flag, "output table path (overrides output.path)");
    sc->add_option("--threads", threads_flag, "worker threads");
  }
  auto* self = app.add_subcommand("selfcheck", "run the invariant suite");
  self->add_option("--threads", threads_flag, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    afd::set_thread_count(static_cast<unsigned>(resolve_threads(threads_flag)));
    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "selfcheck") return run_selfcheck(std::cout) ? 0 : 1;
    return run_command(sub, config_path, out_flag, afd::thread_count());
  } catch (const ConfigError& e) {
    std::cerr << "afd: config-error: " << e.what() << "\n";
    return 2;
  } catch (const afd::UnsupportedOperation& e) {
    std::cerr << "afd: config-error: " << e.what() << "\n";
    return 2;
  } catch (const afd::NumericalError& e) {
    std::cerr << "afd: numerical-error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "afd: config-error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "afd: config-error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "afd: error: " << e.what() << "\n";
    return 1;
  }
}
