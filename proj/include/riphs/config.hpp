#pragma once

// JSON experiment configuration.  Schema (all keys optional unless marked):
//
//   name        string (required)
//   system      registry name (required)
//   parameters  object of parameter overrides
//   x0          numeric array or state preset (see systems::resolve_state)
//   horizon     {t_f (required), dt = 0.01}
//   weights     {alpha1 = 0, alpha2 = 1, T0 = 1}
//   bounds      {lower: [..], upper: [..]} or {limit: b}; default per system
//   output      {C: [[..], ..], y_ref: [..], weight = 1}
//   terminal    {kind: free | point | componentwise, target, components}
//   solver      {constraint_tolerance, gradient_tolerance, max_outer, max_inner,
//                initial_penalty, max_penalty, penalty_growth, tikhonov,
//                initial_guess: interpolate | warm_start, verbose}
//   turnpike    {epsilon = 0.1, central_fraction = 0.6}
//   sweep       {horizons: [..], threads = 0}
//   output_dir  string, default "results/<name>"
//
// Unknown keys anywhere are rejected.

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "riphs/diagnostics.hpp"
#include "riphs/ocp.hpp"

namespace riphs {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IOError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string name;
  std::string system;
  nlohmann::json parameters;  // resolved (defaults merged)
  OCPSpec spec;
  TurnpikeOptions turnpike;
  std::vector<double> sweep_horizons;
  int sweep_threads = 0;
  std::string output_dir;
  /// Every setting with defaults filled in and presets expanded.
  nlohmann::json resolved;
};

/// Throws ConfigError on any schema or model-construction problem.
ExperimentConfig parse_config(const nlohmann::json& j);

/// Reads and parses a file; unreadable files raise IOError, malformed JSON
/// ConfigError.
ExperimentConfig load_config(const std::string& path);

}  // namespace riphs
