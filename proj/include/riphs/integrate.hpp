#pragma once

// Implicit midpoint time stepping
//   x_{i+1} = x_i + dt f((x_i + x_{i+1}) / 2, u_i)
// with zero-order-hold controls.  The same scheme is used as the dynamics
// constraint of the optimal-control transcription.

#include <vector>

#include "riphs/model.hpp"
#include "riphs/trajectory.hpp"

namespace riphs {

/// Uniform grid with K = round(t_f / dt) steps; t_f is snapped to K dt.
struct HorizonSpec {
  double t_final = 0.0;
  double dt = 0.0;
  int steps = 0;

  static HorizonSpec make(double t_final, double dt);
  [[nodiscard]] std::vector<double> grid() const;
};

struct StepOptions {
  double tolerance = 1e-12;  // scaled by (1 + |x_i|)
  int max_newton = 25;
  int max_halvings = 8;
  int max_bisections = 4;
};

struct StepStats {
  int newton_iterations = 0;
  int bisections = 0;
};

/// Raised when a step fails after all retries.
class IntegrationError : public ModelError {
 public:
  IntegrationError(const std::string& what, int step) : ModelError(what), step_(step) {}
  [[nodiscard]] int step() const { return step_; }

 private:
  int step_;
};

/// One implicit midpoint step.  Damped Newton on the step residual with a
/// forward-difference Jacobian of f; on failure the step is split in halves
/// (recursively, up to max_bisections levels) and the sub-steps composed.
Vector step_implicit_midpoint(const RIPHSModel& model, const Vector& x, const Vector& u, double dt,
                              const StepOptions& options = {}, StepStats* stats = nullptr);

/// Residual x_next - x - dt f((x + x_next)/2, u).
Vector midpoint_residual(const RIPHSModel& model, const Vector& x, const Vector& x_next,
                         const Vector& u, double dt);

/// Forward-difference Jacobian of f with respect to x (step 1e-7 (1 + |x_j|)).
Matrix rhs_state_jacobian(const RIPHSModel& model, const Vector& x, const Vector& u);

TrajectorySolution simulate(const RIPHSModel& model, const Vector& x0,
                            const std::vector<Vector>& controls, const HorizonSpec& horizon,
                            const StepOptions& options = {});

}  // namespace riphs
