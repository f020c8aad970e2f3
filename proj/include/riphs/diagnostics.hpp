#pragma once

// Turnpike and balance diagnostics over optimal trajectories.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "riphs/equilibria.hpp"
#include "riphs/ocp.hpp"
#include "riphs/trajectory.hpp"

namespace riphs {

struct TurnpikeOptions {
  double epsilon = 0.1;           // fraction_near threshold, model units
  double central_fraction = 0.6;  // "middle of the horizon" window
};

/// Intersection of an affine set with {x : C x = y}; nullopt when empty.
std::optional<AffineSubspace> intersect_with_output(const AffineSubspace& set,
                                                    const OutputSpec& output);

struct TurnpikeReport {
  double horizon = 0.0;
  double integral_dist_sq = 0.0;  // sum_i dist^2(x_i, T) dt_i
  std::optional<double> integral_output_dist_sq;        // against C^{-1}{y_ref}
  std::optional<double> integral_intersection_dist_sq;  // against T cap C^{-1}{y_ref}
  bool intersection_empty = false;
  /// Time fraction with distance <= epsilon to the turnpike set (the
  /// intersection when it exists, else T).
  double fraction_near = 0.0;
  double entropy_production_integral = 0.0;  // sum_i sigma(x_hat_i) dt_i
  Vector box_min;
  Vector box_max;
  // Central-window statistics.
  double central_max_dist = 0.0;  // to the turnpike set
  double central_max_sigma = 0.0;
  double central_min_sigma = 0.0;
  double central_max_rate = 0.0;  // max |x_{i+1} - x_i|_inf / dt_i
  int surrogate_nodes = 0;        // nodes where dist_T fell back to sqrt(sigma)
  // Per-node series for CSV output.
  std::vector<double> dist_T;
  std::vector<double> dist_output;  // NaN when no output is configured
};

/// Throws ModelError if the equilibrium set is flagged empty.
TurnpikeReport turnpike_metrics(const TrajectorySolution& traj, const RIPHSModel& model,
                                const EquilibriumSet& set, const std::optional<OutputSpec>& output,
                                const TurnpikeOptions& opts = {});

struct SweepEntry {
  double horizon = 0.0;
  bool ok = false;
  std::string error;
  OCPSolution solution;
  TurnpikeReport report;
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // ordered by horizon as given
  /// max / min of integral_dist_sq over successful entries.
  double ratio = 1.0;
};

/// Worker count: `requested` if positive, else hardware concurrency, in both
/// cases capped by the RIPHS_THREADS environment variable when set.
int sweep_thread_count(int requested = 0);

/// Solves the template spec for each horizon (same dt).  With
/// InitialGuess::WarmStart the horizons run sequentially in increasing order,
/// each warm-started from the previous solution; otherwise they run
/// concurrently.  Failures are recorded, not thrown.
SweepResult horizon_sweep(const OCPSpec& spec_template, const std::vector<double>& horizons,
                          const TurnpikeOptions& opts = {}, int threads = 0);

nlohmann::json to_json(const TurnpikeReport& r);

}  // namespace riphs
