#include "riphs/integrate.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace riphs {

HorizonSpec HorizonSpec::make(double t_final, double dt) {
  if (!(dt > 0.0) || !(t_final > 0.0)) throw ModelError("horizon: t_f and dt must be positive");
  HorizonSpec h;
  h.steps = static_cast<int>(std::lround(t_final / dt));
  if (h.steps < 1) h.steps = 1;
  h.dt = dt;
  h.t_final = h.steps * dt;
  return h;
}

std::vector<double> HorizonSpec::grid() const {
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) t[static_cast<std::size_t>(i)] = i * dt;
  return t;
}

Vector midpoint_residual(const RIPHSModel& model, const Vector& x, const Vector& x_next,
                         const Vector& u, double dt) {
  return x_next - x - dt * rhs(model, 0.5 * (x + x_next), u);
}

Matrix rhs_state_jacobian(const RIPHSModel& model, const Vector& x, const Vector& u) {
  const int n = model.state_dim();
  const Vector f0 = rhs(model, x, u);
  Matrix jac(n, n);
  for (int j = 0; j < n; ++j) {
    const double h = 1e-7 * (1.0 + std::abs(x[j]));
    Vector xp = x;
    xp[j] += h;
    if (!model.domain().contains(xp)) {
      xp[j] = x[j] - h;
      jac.col(j) = (f0 - rhs(model, xp, u)) / h;
    } else {
      jac.col(j) = (rhs(model, xp, u) - f0) / h;
    }
  }
  return jac;
}

namespace {

// Newton solve of a single step of size dt.  Returns false on failure.
bool newton_step(const RIPHSModel& model, const Vector& x, const Vector& u, double dt,
                 const StepOptions& opt, Vector& out, int& iterations) {
  const int n = model.state_dim();
  const double tol = opt.tolerance * (1.0 + x.norm());
  Vector y = x;
  Vector res;
  try {
    res = midpoint_residual(model, x, y, u, dt);
  } catch (const ModelError&) {
    return false;
  }
  double rnorm = res.norm();
  iterations = 0;
  while (rnorm > tol) {
    if (iterations >= opt.max_newton) return false;
    ++iterations;
    Matrix jac;
    try {
      jac = Matrix::Identity(n, n) - 0.5 * dt * rhs_state_jacobian(model, 0.5 * (x + y), u);
    } catch (const ModelError&) {
      return false;
    }
    const Vector delta = jac.partialPivLu().solve(-res);
    if (!delta.allFinite()) return false;
    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h, step *= 0.5) {
      const Vector trial = y + step * delta;
      Vector trial_res;
      try {
        trial_res = midpoint_residual(model, x, trial, u, dt);
      } catch (const ModelError&) {
        continue;
      }
      const double tnorm = trial_res.norm();
      if (tnorm < rnorm) {
        y = trial;
        res = trial_res;
        rnorm = tnorm;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Stagnation at round-off level still counts as converged.
      if (rnorm <= 100.0 * tol) break;
      return false;
    }
  }
  out = y;
  return true;
}

bool step_recursive(const RIPHSModel& model, const Vector& x, const Vector& u, double dt,
                    const StepOptions& opt, int depth, Vector& out, StepStats& stats) {
  int iters = 0;
  if (newton_step(model, x, u, dt, opt, out, iters)) {
    stats.newton_iterations += iters;
    return true;
  }
  stats.newton_iterations += iters;
  if (depth >= opt.max_bisections) return false;
  ++stats.bisections;
  Vector half;
  if (!step_recursive(model, x, u, 0.5 * dt, opt, depth + 1, half, stats)) return false;
  return step_recursive(model, half, u, 0.5 * dt, opt, depth + 1, out, stats);
}

}  // namespace

Vector step_implicit_midpoint(const RIPHSModel& model, const Vector& x, const Vector& u, double dt,
                              const StepOptions& options, StepStats* stats) {
  model.require_in_domain(x);
  if (!(dt > 0.0)) throw ModelError("step size must be positive");
  StepStats local;
  Vector out;
  const bool ok = step_recursive(model, x, u, dt, options, 0, out, local);
  if (stats) {
    stats->newton_iterations += local.newton_iterations;
    stats->bisections += local.bisections;
  }
  if (!ok) throw IntegrationError(model.name() + ": implicit midpoint step failed", -1);
  return out;
}

TrajectorySolution simulate(const RIPHSModel& model, const Vector& x0,
                            const std::vector<Vector>& controls, const HorizonSpec& horizon,
                            const StepOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  model.require_in_domain(x0);
  if (static_cast<int>(controls.size()) != horizon.steps) {
    throw ModelError("simulate: need exactly one control per step");
  }
  TrajectorySolution traj;
  traj.time_grid = horizon.grid();
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(x0);
  traj.controls = controls;
  StepStats stats;
  for (int i = 0; i < horizon.steps; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      traj.states.push_back(
          step_implicit_midpoint(model, traj.states[k], controls[k], horizon.dt, options, &stats));
    } catch (const IntegrationError&) {
      std::ostringstream os;
      os << model.name() << ": integration failed at step " << i << " (t = " << traj.time_grid[k]
         << ")";
      throw IntegrationError(os.str(), i);
    }
  }
  fill_node_diagnostics(model, traj);
  traj.solver.producer = "simulate";
  traj.solver.newton_iterations = stats.newton_iterations;
  traj.solver.bisections = stats.bisections;
  traj.solver.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return traj;
}

}  // namespace riphs
