#pragma once

// Coupled reversible-irreversible port-Hamiltonian systems (RIPHS).
//
//   dx/dt = (J0(x) + sum_k gamma_k(x, H_x) {S,H}_{J_k} J_k) H_x(x) + g(x, H_x) u
//   y_H   = g^T H_x,    y_S = g^T e,    S(x) = e^T x
//
// A model is a bundle of callables plus constant structure data.  Everything
// here is a pure function of its arguments; a constructed model is immutable
// and may be shared across threads.

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace riphs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a state lies outside the open state domain.
class DomainError : public ModelError {
 public:
  using ModelError::ModelError;
};

/// Open state domain {x : lower < M x < upper} shrunk by `margin`.
/// M defaults to the identity; coordinate transforms compose into it.
struct StateDomain {
  Vector lower;
  Vector upper;
  std::optional<Matrix> coordinate_map;
  double margin = 1e-9;

  static StateDomain unbounded(int n);

  [[nodiscard]] bool contains(const Vector& x) const;
  /// Box bounds usable by an optimizer, or nullopt if the domain is not a box
  /// in the model coordinates.
  [[nodiscard]] std::optional<std::pair<Vector, Vector>> box() const;
};

/// Affine set offset + span(basis); the basis is stored orthonormal.
struct AffineSubspace {
  Vector offset;
  Matrix basis;

  AffineSubspace() = default;
  AffineSubspace(Vector offset, const Matrix& spanning_vectors);

  [[nodiscard]] int ambient_dim() const { return static_cast<int>(offset.size()); }
  [[nodiscard]] int dim() const { return static_cast<int>(basis.cols()); }
  [[nodiscard]] Vector project(const Vector& x) const;
  [[nodiscard]] double distance(const Vector& x) const;
};

using MatrixField = std::function<Matrix(const Vector&)>;
using ScalarField = std::function<double(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;
using Modulation = std::function<double(const Vector& x, const Vector& co_energy)>;
using InputMap = std::function<Matrix(const Vector& x, const Vector& co_energy)>;

/// Plain description handed to the RIPHSModel constructor.
struct ModelDefinition {
  std::string name;
  int state_dim = 0;
  int input_dim = 0;
  MatrixField poisson_structure;  // empty means J0 == 0
  ScalarField hamiltonian;
  VectorField hamiltonian_gradient;
  MatrixField hamiltonian_hessian;  // optional
  Vector entropy_vector;
  std::vector<Matrix> irr_structures;
  std::vector<Modulation> modulations;
  InputMap input_map;  // empty means g == 0 (closed system)
  StateDomain domain;
  /// Closed-form equilibrium set, when known analytically.
  std::optional<AffineSubspace> equilibria;
  std::vector<std::string> state_names;
  std::vector<std::string> co_energy_names;
};

/// All quantities needed by rhs/outputs/diagnostics at one state.
struct Evaluation {
  Vector co_energy;  // H_x(x)
  Matrix poisson;    // J0(x)
  Vector brackets;   // {S,H}_{J_k}(x)
  Vector gammas;     // gamma_k(x, H_x(x))
  Matrix input;      // g(x, H_x(x)), n x m
  [[nodiscard]] double entropy_production() const;
};

class RIPHSModel {
 public:
  static constexpr double kSkewTolerance = 1e-12;

  /// Validates dimensions, constant skew-symmetry of the J_k and the domain.
  explicit RIPHSModel(ModelDefinition def);

  [[nodiscard]] const std::string& name() const { return def_.name; }
  [[nodiscard]] int state_dim() const { return def_.state_dim; }
  [[nodiscard]] int input_dim() const { return def_.input_dim; }
  [[nodiscard]] int num_irreversible() const {
    return static_cast<int>(def_.irr_structures.size());
  }
  [[nodiscard]] const Vector& entropy_vector() const { return def_.entropy_vector; }
  [[nodiscard]] const Matrix& irr_structure(int k) const;
  [[nodiscard]] const StateDomain& domain() const { return def_.domain; }
  [[nodiscard]] const std::optional<AffineSubspace>& known_equilibria() const {
    return def_.equilibria;
  }
  [[nodiscard]] const std::vector<std::string>& state_names() const { return def_.state_names; }
  [[nodiscard]] const std::vector<std::string>& co_energy_names() const {
    return def_.co_energy_names;
  }
  [[nodiscard]] bool has_poisson_structure() const { return bool(def_.poisson_structure); }
  [[nodiscard]] bool has_analytic_hessian() const { return bool(def_.hamiltonian_hessian); }
  [[nodiscard]] const ModelDefinition& definition() const { return def_; }

  [[nodiscard]] double hamiltonian(const Vector& x) const;
  [[nodiscard]] double entropy(const Vector& x) const { return def_.entropy_vector.dot(x); }
  [[nodiscard]] Vector co_energy(const Vector& x) const;
  /// Analytic Hessian if supplied, else central differences of H_x with
  /// step max(1e-6, 1e-8 |x|).
  [[nodiscard]] Matrix hamiltonian_hessian(const Vector& x) const;
  [[nodiscard]] Matrix poisson_structure(const Vector& x) const;

  /// Evaluates every structural quantity at x and enforces the pointwise
  /// invariants (J0 skew, J0 e = 0, gamma_k > 0, finiteness).
  /// Throws DomainError outside the domain, ModelError on violations.
  [[nodiscard]] Evaluation evaluate(const Vector& x) const;

  void require_in_domain(const Vector& x) const;

 private:
  ModelDefinition def_;
};

/// {S,H}_{J_k}(x) = e^T J_k H_x(x); k is zero-based.
double poisson_bracket(const RIPHSModel& model, int k, const Vector& x);

/// Right-hand side f(x, u).
Vector rhs(const RIPHSModel& model, const Vector& x, const Vector& u);
Vector rhs(const RIPHSModel& model, const Evaluation& ev, const Vector& u);

struct Outputs {
  Vector y_H;
  Vector y_S;
};
Outputs outputs(const RIPHSModel& model, const Vector& x);
Outputs outputs(const RIPHSModel& model, const Evaluation& ev);

/// sigma(x) = sum_k gamma_k {S,H}_{J_k}^2 >= 0.
double entropy_production(const RIPHSModel& model, const Vector& x);

/// Residuals of the structural invariants at a single state.
struct StructureCheck {
  double poisson_skew = 0.0;       // max |v^T J0 v| / (|v|^2 |J0|) over probes
  double irreversible_skew = 0.0;  // same for the J_k
  double casimir = 0.0;            // |J0 e| / (|J0| |e|)
  double min_gamma = 0.0;
  double entropy_production = 0.0;
  [[nodiscard]] bool ok(double tol = RIPHSModel::kSkewTolerance) const;
};
StructureCheck check_structure(const RIPHSModel& model, const Vector& x);

/// Linear change of coordinates z = V x.  The returned model evaluates in z;
/// its trajectories equal V times those of `model` for identical controls.
/// Throws ModelError if V is numerically singular.
RIPHSModel transform_model(const RIPHSModel& model, const Matrix& V,
                           double* condition_number = nullptr);

double condition_number(const Matrix& V);

}  // namespace riphs
