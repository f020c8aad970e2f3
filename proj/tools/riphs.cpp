// riphs: command-line front end for the RIPHS optimal-control toolkit.
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration error,
// 3 solver failure (including non-converged solves), 4 IO failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riphs/config.hpp"
#include "riphs/diagnostics.hpp"
#include "riphs/equilibria.hpp"
#include "riphs/integrate.hpp"
#include "riphs/report.hpp"
#include "riphs/systems.hpp"

#ifndef RIPHS_EXPERIMENTS_DIR
#define RIPHS_EXPERIMENTS_DIR "experiments"
#endif

namespace {

using nlohmann::json;
using namespace riphs;

enum Exit { kOk = 0, kUnexpected = 1, kConfig = 2, kSolver = 3, kIO = 4 };

json parse_overrides(const std::string& text) {
  if (text.empty()) return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("--params is not valid JSON: ") + e.what());
  }
}

RIPHSModel build_system(const std::string& name, const json& overrides) {
  if (!systems::has_system(name)) throw ConfigError("unknown system '" + name + "'");
  try {
    return systems::make_system(name, overrides);
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
}

std::vector<std::filesystem::path> bundled_experiments() {
  namespace fs = std::filesystem;
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(RIPHS_EXPERIMENTS_DIR, ec)) {
    if (entry.path().extension() == ".json") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_list() {
  std::cout << "systems:\n";
  for (const auto& info : systems::registry()) {
    const RIPHSModel model = systems::make_system(info.name);
    std::cout << "  " << info.name << "  (n=" << model.state_dim() << ", m=" << model.input_dim()
              << ", N=" << model.num_irreversible() << ")  " << info.description << "\n";
  }
  std::cout << "experiments:\n";
  for (const auto& path : bundled_experiments()) {
    std::string system = "?";
    try {
      std::ifstream in(path);
      system = json::parse(in).value("system", "?");
    } catch (const std::exception&) {
    }
    std::cout << "  " << path.stem().string() << "  [" << system << "]  " << path.string() << "\n";
  }
  return kOk;
}

int cmd_describe(const std::string& name, const std::string& params) {
  const json overrides = parse_overrides(params);
  const RIPHSModel model = build_system(name, overrides);
  const DimensionReport dim = manifold_dimension(model);
  const json resolved = systems::resolve_parameters(name, overrides);
  const auto& info = systems::system_info(name);

  std::cout << "system: " << name << "\n" << info.description << "\n";
  std::cout << "n = " << model.state_dim() << "\n";
  std::cout << "m = " << model.input_dim() << "  (inputs)\n";
  std::cout << "N = " << model.num_irreversible() << "  (irreversible couplings)\n";
  std::cout << "rank [J_k e] = " << dim.rank << "\n";
  std::cout << "dim T = " << dim.dimension << (dim.regular() ? "" : "  (regularity not confirmed)")
            << "\n";
  std::cout << "state: ";
  for (std::size_t j = 0; j < model.state_names().size(); ++j) {
    std::cout << (j ? ", " : "") << model.state_names()[j];
  }
  std::cout << "\nco-energy: ";
  for (std::size_t j = 0; j < model.co_energy_names().size(); ++j) {
    std::cout << (j ? ", " : "") << model.co_energy_names()[j];
  }
  std::cout << "\ndefault control bounds: [" << -info.default_control_bound << ", "
            << info.default_control_bound << "] per channel\n";
  std::cout << "parameters:\n";
  for (const auto& [key, value] : resolved.items()) {
    std::cout << "  " << key << " = " << value.dump() << "\n";
  }
  if (name == "gas_piston") {
    const auto p = resolved.get<systems::GasPistonParams>();
    std::printf("  derived piston mass m = A P0 / g = %.4f\n", p.mass());
  }
  return kOk;
}

int cmd_equilibria(const std::string& name, const std::string& params) {
  const json overrides = parse_overrides(params);
  const RIPHSModel model = build_system(name, overrides);
  const EquilibriumSet set = equilibrium_set(model);
  const DimensionReport dim = manifold_dimension(model);
  json out;
  out["system"] = name;
  out["equilibrium_set"] = to_json(set);
  out["dimension"] = to_json(dim);
  if (!set.affine) {
    const Vector x = systems::default_state(name, overrides);
    out["likely_empty"] =
        likely_empty(set, model, x.array() - 1.0, x.array() + 1.0);
  }
  // Lossless steady state near the default state under pure entropy weighting.
  try {
    const auto& info = systems::system_info(name);
    const SteadyState ss = find_optimal_steady_state(
        model, CostWeights::entropy_extraction(),
        ControlBounds::symmetric(model.input_dim(), info.default_control_bound),
        systems::default_state(name, overrides));
    out["optimal_steady_state"] = to_json(ss);
  } catch (const nlp::SolverError& e) {
    out["optimal_steady_state"] = {{"error", e.what()}};
  }
  std::cout << out.dump(2) << "\n";
  return kOk;
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

void emit_run(const ExperimentConfig& config, const OCPSolution& sol, const EquilibriumSet& set,
              const TurnpikeReport& report, const std::string& dir, const std::string& stem) {
  const RIPHSModel& model = *config.spec.model;
  std::ostringstream csv;
  write_trajectory_csv(csv, model, sol.trajectory, report, &config.spec);
  write_file(join_path(dir, stem + ".csv"), csv.str());
  write_file(join_path(dir, stem + ".json"), run_report(config, sol, set, report).dump(2) + "\n");
  std::ostringstream svg;
  write_svg(svg, model, sol.trajectory, config.name + " (t_f = " + format_number(report.horizon) + ")");
  write_file(join_path(dir, stem + ".svg"), svg.str());
}

int cmd_run(const std::string& path, const std::string& out_dir) {
  const ExperimentConfig config = load_config(path);
  const std::string dir = out_dir.empty() ? config.output_dir : out_dir;
  const RIPHSModel& model = *config.spec.model;
  const EquilibriumSet set = equilibrium_set(model);

  std::cerr << "solving " << config.name << " (" << config.system << ", K = "
            << config.spec.horizon.steps << ")\n";
  const OCPSolution sol = solve_ocp(config.spec);
  const TurnpikeReport report =
      turnpike_metrics(sol.trajectory, model, set, config.spec.output, config.turnpike);
  emit_run(config, sol, set, report, dir, "trajectory");

  const SolverMetadata& meta = sol.trajectory.solver;
  std::cout << "status: " << meta.status << "\n"
            << "objective: " << format_number(sol.cost.objective) << "\n"
            << "constraint violation: " << format_number(meta.constraint_violation) << "\n"
            << "identity residual: " << format_number(sol.cost.identity_residual) << "\n"
            << "integral dist^2 to T: " << format_number(report.integral_dist_sq) << "\n"
            << "central max dist: " << format_number(report.central_max_dist) << "\n"
            << "active bounds: [" << config.spec.bounds.lower.transpose() << "] .. ["
            << config.spec.bounds.upper.transpose() << "]\n"
            << "artifacts: " << dir << "\n";
  return sol.status == nlp::Status::Converged ? kOk : kSolver;
}

int cmd_sweep(const std::string& path, std::vector<double> horizons, int threads,
              const std::string& out_dir) {
  const ExperimentConfig config = load_config(path);
  if (horizons.empty()) horizons = config.sweep_horizons;
  if (horizons.empty()) throw ConfigError("no horizons given (use --horizons or sweep.horizons)");
  for (double h : horizons) {
    if (!(h > 0.0)) throw ConfigError("horizons must be positive");
  }
  const std::string dir = out_dir.empty() ? config.output_dir : out_dir;
  const RIPHSModel& model = *config.spec.model;
  const EquilibriumSet set = equilibrium_set(model);
  const int workers = sweep_thread_count(threads > 0 ? threads : config.sweep_threads);
  std::cerr << "sweeping " << horizons.size() << " horizons with up to " << workers
            << " worker(s)\n";

  const SweepResult result = horizon_sweep(config.spec, horizons, config.turnpike, workers);
  json summary;
  summary["config"] = config.resolved;
  summary["ratio"] = result.ratio;
  summary["entries"] = json::array();
  bool all_ok = true;
  for (const SweepEntry& e : result.entries) {
    json je = {{"horizon", e.horizon}, {"ok", e.ok}, {"error", e.error}};
    if (!e.solution.trajectory.states.empty()) {
      const std::string stem = "sweep_tf_" + format_number(e.horizon);
      ExperimentConfig single = config;
      single.spec.horizon = HorizonSpec::make(e.horizon, config.spec.horizon.dt);
      single.resolved["horizon"] = {{"t_f", single.spec.horizon.t_final},
                                    {"dt", single.spec.horizon.dt},
                                    {"steps", single.spec.horizon.steps}};
      emit_run(single, e.solution, set, e.report, dir, stem);
      je["solver"] = to_json(e.solution.trajectory.solver);
      je["cost"] = to_json(e.solution.cost);
      je["turnpike"] = to_json(e.report);
      je["files"] = stem + ".{csv,json,svg}";
    }
    all_ok = all_ok && e.ok;
    std::cout << "t_f = " << format_number(e.horizon) << "  "
              << (e.ok ? "ok" : "FAILED: " + e.error) << "  integral dist^2 = "
              << format_number(e.report.integral_dist_sq) << "\n";
    summary["entries"].push_back(je);
  }
  write_file(join_path(dir, "sweep.json"), summary.dump(2) + "\n");
  std::cout << "max/min ratio: " << format_number(result.ratio) << "\n"
            << "artifacts: " << dir << "\n";
  return all_ok ? kOk : kSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal control and turnpike diagnostics for reversible-irreversible "
               "port-Hamiltonian systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string system;
  std::string params;
  std::vector<double> horizons;
  int threads = 0;

  auto* list = app.add_subcommand("list", "List built-in systems and bundled experiments");
  auto* describe = app.add_subcommand("describe", "Describe a built-in system");
  describe->add_option("system", system, "System name")->required();
  describe->add_option("--params", params, "Parameter overrides as a JSON object");
  auto* equilibria = app.add_subcommand("equilibria", "Equilibrium set of a system as JSON");
  equilibria->add_option("system", system, "System name")->required();
  equilibria->add_option("--params", params, "Parameter overrides as a JSON object");
  auto* run = app.add_subcommand("run", "Solve one experiment config");
  run->add_option("config", config_path, "Experiment JSON")->required();
  run->add_option("-o,--output-dir", out_dir, "Override output_dir");
  auto* sweep = app.add_subcommand("sweep", "Solve one config over several horizons");
  sweep->add_option("config", config_path, "Experiment JSON")->required();
  sweep->add_option("--horizons", horizons, "Comma-separated horizons")->delimiter(',');
  sweep->add_option("--threads", threads, "Worker count (capped by RIPHS_THREADS)");
  sweep->add_option("-o,--output-dir", out_dir, "Override output_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*list) return cmd_list();
    if (*describe) return cmd_describe(system, params);
    if (*equilibria) return cmd_equilibria(system, params);
    if (*run) return cmd_run(config_path, out_dir);
    if (*sweep) return cmd_sweep(config_path, horizons, threads, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IOError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIO;
  } catch (const nlp::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const ModelError& e) {
    // Configs are validated up front, so model errors here come from the solve.
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  }
  return kUnexpected;
}
