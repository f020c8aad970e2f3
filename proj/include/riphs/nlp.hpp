#pragma once

// Bound-constrained augmented Lagrangian solver for partially separable NLPs
//
//   min  sum_e f_e(z_e)   s.t.  c_e(z_e) = 0 for every element e,  lo <= z <= hi
//
// where z_e gathers a handful of entries of the global decision vector z.
// Each element contributes a dense local block; the global Hessian and
// Jacobian are assembled sparsely from those blocks.

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace riphs::nlp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int element = -1)
      : std::runtime_error(what), element_(element) {}
  /// Offending element index, or -1.
  [[nodiscard]] int element() const { return element_; }

 private:
  int element_;
};

/// Local derivative data of one element at a point.
struct ElementDerivatives {
  Vector gradient;   // d f_e / d z_e
  Matrix jacobian;   // d c_e / d z_e, rows = constraint_count()
  Matrix hessian;    // d^2 (f_e + w^T c_e) / d z_e^2 for the weights w passed in
};

/// One term of the partially separable problem.  The default derivatives()
/// uses central finite differences; subclasses may override it.
class ElementFunction {
 public:
  virtual ~ElementFunction() = default;
  [[nodiscard]] virtual int size() const = 0;
  [[nodiscard]] virtual int constraint_count() const = 0;
  [[nodiscard]] virtual double objective(const Vector& z) const = 0;
  [[nodiscard]] virtual Vector constraints(const Vector& z) const = 0;
  virtual void derivatives(const Vector& z, const Vector& weights, bool need_hessian,
                           ElementDerivatives& out) const;
};

/// Binds an ElementFunction to global variables.  Slots with index -1 are
/// fixed at the corresponding entry of `fixed`.
struct Element {
  std::shared_ptr<const ElementFunction> fn;
  std::vector<int> index;
  Vector fixed;
  int constraint_offset = 0;
};

struct NLPProblem {
  int num_variables = 0;
  int num_constraints = 0;
  std::vector<Element> elements;
  Vector lower;  // +-inf for unbounded entries
  Vector upper;

  /// Appends an element, assigning its constraint rows.
  void add(std::shared_ptr<const ElementFunction> fn, std::vector<int> index, Vector fixed = {});
  /// Checks sizes, index ranges and bound ordering; throws SolverError.
  void validate() const;

  [[nodiscard]] Vector local(const Element& e, const Vector& z) const;
  [[nodiscard]] double objective(const Vector& z) const;
  [[nodiscard]] Vector constraints(const Vector& z) const;
  [[nodiscard]] Vector project(const Vector& z) const;
};

struct SolverOptions {
  double constraint_tolerance = 1e-8;  // max-norm of c
  double gradient_tolerance = 1e-6;    // max-norm of the projected gradient
  int max_outer = 50;
  int max_inner = 500;
  double initial_penalty = 10.0;
  double max_penalty = 1e12;
  double penalty_growth = 100.0;
  /// Initialise multipliers by least squares on the stationarity condition.
  bool least_squares_multipliers = true;
  bool verbose = false;
};

enum class Status { Converged, MaxIterations, Stalled };

const char* to_string(Status s);

struct Result {
  Vector z;
  Vector multipliers;
  Status status = Status::MaxIterations;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double objective = 0.0;
  double constraint_violation = 0.0;
  double projected_gradient = 0.0;
  double penalty = 0.0;
  /// True if the augmented Lagrangian never increased across an accepted
  /// inner step (per outer iteration, multipliers and penalty fixed).
  bool merit_monotone = true;
};

/// Solves the problem from z0 (projected onto the bounds first).
/// Throws SolverError if the objective or constraints are not finite at z0,
/// naming the offending element.
Result solve(const NLPProblem& problem, const Vector& z0, const SolverOptions& options = {});

/// Max-norm of P(z - g) - z.
double projected_gradient_norm(const NLPProblem& problem, const Vector& z, const Vector& g);

}  // namespace riphs::nlp
