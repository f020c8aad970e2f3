#pragma once

// Artifact emission: trajectory CSV, JSON run reports and SVG plots.

#include <ostream>
#include <string>

#include <json.hpp>

#include "riphs/config.hpp"
#include "riphs/diagnostics.hpp"
#include "riphs/equilibria.hpp"
#include "riphs/ocp.hpp"

namespace riphs {

/// Exactly 17 significant digits, '.' decimal; "nan" for undefined entries.
std::string format_number(double v);

/// Columns: t, x1..xn, co_energy1..n, u1..um, bracket1..N, sigma, dist_T,
/// dist_output, cum_cost.  The control of the last node is undefined (nan);
/// cum_cost is the left-rule stage-cost sum up to the node (nan without a spec).
void write_trajectory_csv(std::ostream& os, const RIPHSModel& model, const TrajectorySolution& traj,
                          const TurnpikeReport& report, const OCPSpec* spec = nullptr);

nlohmann::json to_json(const SolverMetadata& m);
nlohmann::json to_json(const CostBreakdown& c);
nlohmann::json to_json(const BalanceResiduals& b);

/// Run report: resolved config, solver metadata, cost breakdown, balance
/// residuals, equilibrium set and turnpike report.
nlohmann::json run_report(const ExperimentConfig& config, const OCPSolution& solution,
                          const EquilibriumSet& set, const TurnpikeReport& report);

/// Four stacked panels over time: states, co-energy, brackets, controls.
void write_svg(std::ostream& os, const RIPHSModel& model, const TrajectorySolution& traj,
               const std::string& title);

/// Writes text to a file, creating parent directories; throws IOError.
void write_file(const std::string& path, const std::string& contents);

}  // namespace riphs
