#pragma once

// Thermodynamic equilibria T = {x : {S,H}_{J_k}(x) = 0 for all k}, the
// steady-state problem and the optimal steady states S / T_opt.

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "riphs/model.hpp"
#include "riphs/nlp.hpp"
#include "riphs/ocp.hpp"

namespace riphs {

/// Relative singular-value threshold for all rank decisions.
inline constexpr double kRankThreshold = 1e-10;

/// Numerical rank of A with threshold kRankThreshold * sigma_max.
int numerical_rank(const Matrix& a);

struct EquilibriumSet {
  enum class Kind { Affine, Implicit };
  Kind kind = Kind::Implicit;
  Matrix codim_vectors;  // columns v_k = J_k e
  Matrix normal_basis;   // orthonormal basis of span{v_k}; residual r(x) = basis^T H_x(x)
  int rank = 0;
  int dimension = 0;
  std::optional<AffineSubspace> affine;  // Kind::Affine only

  /// r(x); zero exactly on T.
  [[nodiscard]] Vector residual(const RIPHSModel& model, const Vector& x) const;
};

/// Uses the model's closed-form set when available (affine kind) unless
/// `force_implicit` is set.
EquilibriumSet equilibrium_set(const RIPHSModel& model, bool force_implicit = false);

struct DimensionReport {
  int state_dim = 0;
  int rank = 0;
  int dimension = 0;
  int regularity_samples = 0;
  int regular_samples = 0;  // points where rank[H_xx; H_x^T] = n
  [[nodiscard]] bool regular() const { return regular_samples == regularity_samples; }
};

/// dim T = n - rank[J_1 e ... J_N e]; regularity is checked at `samples`
/// points of T (affine kind) drawn with the given seed.
DimensionReport manifold_dimension(const RIPHSModel& model, int samples = 16,
                                   std::uint64_t seed = 7);

struct DistanceOptions {
  int max_iterations = 50;
  double residual_tolerance = 1e-10;
  double step_tolerance = 1e-12;
  /// Scale c in the surrogate c * sqrt(sigma(x)) used when projection fails.
  double surrogate_scale = 1.0;
};

struct DistanceResult {
  double distance = 0.0;
  Vector projection;       // nearest point found (empty for the surrogate)
  bool converged = true;
  bool surrogate = false;  // distance is c * sqrt(sigma), not a projection
  int iterations = 0;
};

/// Exact orthogonal distance for the affine kind; Gauss-Newton projection
/// otherwise, with the flagged sigma surrogate as a fallback.
DistanceResult distance_to_equilibria(const EquilibriumSet& set, const RIPHSModel& model,
                                      const Vector& x, const DistanceOptions& opts = {});

/// Projection-based emptiness probe from `starts` scattered points in the
/// box [lo, hi]; true means no start converged ("likely empty", no certificate).
bool likely_empty(const EquilibriumSet& set, const RIPHSModel& model, const Vector& lo,
                  const Vector& hi, int starts = 64, std::uint64_t seed = 11);

struct SteadyStateCost {
  double direct = 0.0;       // [alpha1 y_H - alpha2 T0 y_S]^T u
  double closed_form = 0.0;  // alpha2 T0 sum_k gamma_k {S,H}_{J_k}^2
  double residual_norm = 0.0;
};

/// Evaluates both sides of the steady-state cost identity.  Throws
/// ModelError if (x, u) is not a steady state (|f| > 1e-9 (1 + |x|)) or if
/// the two sides disagree beyond 1e-9 relative (plus the slack implied by
/// the residual of f).
SteadyStateCost steady_state_cost(const RIPHSModel& model, const Vector& x, const Vector& u,
                                  const CostWeights& weights);

struct SteadyState {
  Vector x;
  Vector u;
  double stage_cost = 0.0;
  double closed_form_cost = 0.0;
  double residual_norm = 0.0;
  bool certified = false;  // (x, u) in S: cost <= 1e-8, x in T, g u = -J0 H_x
  nlp::Status status = nlp::Status::MaxIterations;
};

/// min l(x, u) s.t. f(x, u) = 0, u in bounds, from the initial state guess.
/// Throws nlp::SolverError on non-convergence.
SteadyState find_optimal_steady_state(const RIPHSModel& model, const CostWeights& weights,
                                      const ControlBounds& bounds, const Vector& x_guess,
                                      const nlp::SolverOptions& opts = {});

struct SubspaceEquivalenceReport {
  int samples = 0;
  int informative_samples = 0;  // samples with dist(x, intersection) > 0
  double c_low = 0.0;           // c_low * LHS <= RHS
  double c_high = 0.0;          // RHS <= c_high * LHS
  bool trivial = false;         // intersection is the whole space
  int intersection_dim = 0;
};

/// dist(x, cap V_k) versus sum_k dist(x, V_k) on Gaussian samples, with
/// exact orthogonal projections.  Each matrix's columns span one V_k.
SubspaceEquivalenceReport subspace_distance_equivalence_check(const std::vector<Matrix>& subspaces,
                                                              int samples, std::uint64_t seed = 3);

/// Orthonormal basis of the intersection of the column spans.
Matrix subspace_intersection(const std::vector<Matrix>& subspaces);

nlohmann::json to_json(const EquilibriumSet& set);
nlohmann::json to_json(const DimensionReport& r);
nlohmann::json to_json(const SteadyState& s);

}  // namespace riphs
