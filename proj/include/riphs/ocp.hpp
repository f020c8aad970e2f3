#pragma once

// Energy / entropy / exergy optimal control of RIPHS by direct transcription.
//
//   min  int_0^tf [alpha1 y_H - alpha2 T0 y_S]^T u + w |C x - y_ref|^2 dt
//   s.t. implicit-midpoint dynamics, x(0) = x0, x(tf) in Phi, u in U
//
// The cost is discretised with the left-endpoint rectangular rule and the
// controls are held constant on each grid interval.

#include <memory>
#include <optional>
#include <vector>

#include "riphs/integrate.hpp"
#include "riphs/model.hpp"
#include "riphs/nlp.hpp"
#include "riphs/trajectory.hpp"

namespace riphs {

/// alpha1 weighs energy supply, alpha2 T0 entropy extraction.
struct CostWeights {
  double alpha1 = 0.0;
  double alpha2 = 1.0;
  double T0 = 1.0;

  static CostWeights energy_supply(double T0 = 1.0) { return {1.0, 0.0, T0}; }
  static CostWeights entropy_extraction(double T0 = 1.0) { return {0.0, 1.0, T0}; }
  static CostWeights exergy_supply(double T0 = 1.0) { return {1.0, 1.0, T0}; }

  void validate(bool has_output) const;
};

/// Output tracking term weight * |C x - y_ref|^2 with y_ref in im(C).
struct OutputSpec {
  Matrix C;
  Vector y_ref;
  double weight = 1.0;

  void validate(int state_dim) const;
  /// Preimage C^{-1}{y_ref} as an affine subspace.
  [[nodiscard]] AffineSubspace preimage() const;
};

struct TerminalSpec {
  enum class Kind { Free, Point, Componentwise };
  Kind kind = Kind::Free;
  std::vector<int> components;  // Componentwise: fixed coordinates
  Vector target;                // Point: full state; Componentwise: one value per component

  static TerminalSpec free() { return {}; }
  static TerminalSpec point(Vector x) { return {Kind::Point, {}, std::move(x)}; }
  static TerminalSpec componentwise(std::vector<int> comps, Vector values) {
    return {Kind::Componentwise, std::move(comps), std::move(values)};
  }

  void validate(const RIPHSModel& model) const;
  [[nodiscard]] int constraint_count(int state_dim) const;
  /// Fixed coordinates and their targets, for Point expanded to all of them.
  [[nodiscard]] std::vector<std::pair<int, double>> fixed(int state_dim) const;
};

struct ControlBounds {
  Vector lower;
  Vector upper;

  static ControlBounds symmetric(int m, double limit) {
    return {Vector::Constant(m, -limit), Vector::Constant(m, limit)};
  }
  void validate(int input_dim, bool require_origin_interior) const;
};

enum class InitialGuess { Interpolate, WarmStart };

struct OCPOptions {
  nlp::SolverOptions solver;
  /// Tikhonov weight rho on |u_i|^2 per stage; negative means 1e-6 * dt.
  double tikhonov = -1.0;
  InitialGuess initial_guess = InitialGuess::Interpolate;
  /// Source for InitialGuess::WarmStart (typically a shorter horizon).
  std::shared_ptr<const TrajectorySolution> warm_start;
};

struct OCPSpec {
  std::shared_ptr<const RIPHSModel> model;
  Vector x0;
  HorizonSpec horizon;
  CostWeights weights;
  std::optional<OutputSpec> output;
  TerminalSpec terminal;
  ControlBounds bounds;
  OCPOptions options;

  void validate() const;
  [[nodiscard]] double tikhonov() const;
};

/// Supply part [alpha1 y_H - alpha2 T0 y_S]^T u of the stage cost.
double supply_cost(const RIPHSModel& model, const CostWeights& weights, const Vector& x,
                   const Vector& u);

/// Full stage cost: supply part plus weight * |C x - y_ref|^2 when an output is given.
double stage_cost(const RIPHSModel& model, const CostWeights& weights,
                  const std::optional<OutputSpec>& output, const Vector& x, const Vector& u);

/// NLP plus the map between the decision vector and trajectory variables.
/// Layout: z = (x_1, ..., x_K, u_0, ..., u_{K-1}).
struct Transcription {
  nlp::NLPProblem problem;
  int state_dim = 0;
  int input_dim = 0;
  int steps = 0;

  [[nodiscard]] int state_index(int node, int j) const {  // node in 1..K
    return (node - 1) * state_dim + j;
  }
  [[nodiscard]] int control_index(int step, int j) const {  // step in 0..K-1
    return steps * state_dim + step * input_dim + j;
  }
  [[nodiscard]] int dynamics_constraint_count() const { return steps * state_dim; }
};

Transcription transcribe(const OCPSpec& spec);

/// Initial decision vector for the chosen policy.
Vector initial_guess(const OCPSpec& spec, const Transcription& tr);

struct CostBreakdown {
  double objective = 0.0;     // NLP objective including regularization
  double supply = 0.0;        // sum_i supply_cost(x_i, u_i) dt
  double tracking = 0.0;      // sum_i weight |C x_i - y_ref|^2 dt
  double regularization = 0.0;
  /// |supply - alpha1 dH - alpha2 T0 (S(x0) - S(xK) + sum_i sigma(xm_i) dt)|
  double identity_residual = 0.0;
};

struct OCPSolution {
  TrajectorySolution trajectory;
  CostBreakdown cost;
  nlp::Status status = nlp::Status::MaxIterations;
  Vector multipliers;
  double max_dynamics_violation = 0.0;
  Vector state_min;  // bounding box of the optimal state trajectory
  Vector state_max;
  bool merit_monotone = true;
};

/// Costs of a given trajectory under the spec (left-endpoint rule).
CostBreakdown evaluate_costs(const OCPSpec& spec, const TrajectorySolution& traj);

/// Transcribes, solves and unpacks.  Throws nlp::SolverError on hard failures;
/// iteration-limit exits are reported through `status`.
OCPSolution solve_ocp(const OCPSpec& spec);

/// Unpacks a decision vector into a trajectory with node diagnostics.
TrajectorySolution unpack(const OCPSpec& spec, const Transcription& tr, const Vector& z);

}  // namespace riphs
