#pragma once

#include <string>
#include <vector>

#include "riphs/model.hpp"

namespace riphs {

/// Bookkeeping attached to a trajectory by whoever produced it.
struct SolverMetadata {
  std::string producer;  // "simulate" or "solve_ocp"
  std::string status = "ok";
  int outer_iterations = 0;
  int inner_iterations = 0;
  int newton_iterations = 0;
  int bisections = 0;
  double constraint_violation = 0.0;
  double projected_gradient = 0.0;
  double objective = 0.0;
  double tikhonov = 0.0;
  double identity_residual = 0.0;
  double wall_time_s = 0.0;
};

/// States on nodes t_0..t_K, controls held constant on [t_i, t_{i+1}).
struct TrajectorySolution {
  std::vector<double> time_grid;
  std::vector<Vector> states;
  std::vector<Vector> controls;
  std::vector<Vector> outputs_energy;
  std::vector<Vector> outputs_entropy;
  std::vector<double> entropy_production;
  SolverMetadata solver;

  [[nodiscard]] int steps() const { return static_cast<int>(controls.size()); }
  [[nodiscard]] double dt(int i) const {
    const auto k = static_cast<std::size_t>(i);
    return time_grid[k + 1] - time_grid[k];
  }
  [[nodiscard]] Vector midpoint(int i) const {
    const auto k = static_cast<std::size_t>(i);
    return 0.5 * (states[k] + states[k + 1]);
  }
};

/// Recomputes outputs and entropy production at every node.
void fill_node_diagnostics(const RIPHSModel& model, TrajectorySolution& traj);

/// Checks grid/series lengths; throws ModelError when inconsistent.
void check_consistent(const RIPHSModel& model, const TrajectorySolution& traj);

struct BalanceResiduals {
  double energy = 0.0;   // |H(x_K) - H(x_0) - sum_i y_H(xm_i)^T u_i dt_i|
  double entropy = 0.0;  // |S(x_K) - S(x_0) - sum_i (sigma(xm_i) + y_S(xm_i)^T u_i) dt_i|
  double energy_change = 0.0;
  double entropy_change = 0.0;
};

/// Discrete energy and entropy balances, evaluated at interval midpoints.
BalanceResiduals balance_residuals(const RIPHSModel& model, const TrajectorySolution& traj);

}  // namespace riphs
