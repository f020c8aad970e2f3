#include "riphs/trajectory.hpp"

#include <cmath>

namespace riphs {

void check_consistent(const RIPHSModel& model, const TrajectorySolution& traj) {
  const std::size_t nodes = traj.time_grid.size();
  if (nodes < 1 || traj.states.size() != nodes || traj.controls.size() + 1 != nodes) {
    throw ModelError("trajectory: mismatched grid, state and control lengths");
  }
  for (std::size_t i = 0; i + 1 < nodes; ++i) {
    if (!(traj.time_grid[i + 1] > traj.time_grid[i])) {
      throw ModelError("trajectory: time grid is not strictly increasing");
    }
  }
  for (const Vector& x : traj.states) {
    if (x.size() != model.state_dim()) throw ModelError("trajectory: state dimension mismatch");
  }
  for (const Vector& u : traj.controls) {
    if (u.size() != model.input_dim()) throw ModelError("trajectory: control dimension mismatch");
  }
}

void fill_node_diagnostics(const RIPHSModel& model, TrajectorySolution& traj) {
  const std::size_t nodes = traj.states.size();
  traj.outputs_energy.resize(nodes);
  traj.outputs_entropy.resize(nodes);
  traj.entropy_production.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const Evaluation ev = model.evaluate(traj.states[i]);
    const Outputs y = outputs(model, ev);
    traj.outputs_energy[i] = y.y_H;
    traj.outputs_entropy[i] = y.y_S;
    traj.entropy_production[i] = ev.entropy_production();
  }
}

BalanceResiduals balance_residuals(const RIPHSModel& model, const TrajectorySolution& traj) {
  check_consistent(model, traj);
  double energy_supply = 0.0;
  double entropy_supply = 0.0;
  for (int i = 0; i < traj.steps(); ++i) {
    const Evaluation ev = model.evaluate(traj.midpoint(i));
    const Outputs y = outputs(model, ev);
    const Vector& u = traj.controls[static_cast<std::size_t>(i)];
    energy_supply += y.y_H.dot(u) * traj.dt(i);
    entropy_supply += (ev.entropy_production() + y.y_S.dot(u)) * traj.dt(i);
  }
  BalanceResiduals out;
  out.energy_change = model.hamiltonian(traj.states.back()) - model.hamiltonian(traj.states.front());
  out.entropy_change = model.entropy(traj.states.back()) - model.entropy(traj.states.front());
  out.energy = std::abs(out.energy_change - energy_supply);
  out.entropy = std::abs(out.entropy_change - entropy_supply);
  return out;
}

}  // namespace riphs
