#include "riphs/ocp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "riphs/finite_difference.hpp"

namespace riphs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One transcription interval: local variables (x_i, x_{i+1}, u_i).
class DynamicsStage final : public nlp::ElementFunction {
 public:
  DynamicsStage(const OCPSpec& spec, double dt, double rho)
      : model_(spec.model),
        weights_(spec.weights),
        output_(spec.output),
        n_(spec.model->state_dim()),
        m_(spec.model->input_dim()),
        dt_(dt),
        rho_(rho) {}

  [[nodiscard]] int size() const override { return 2 * n_ + m_; }
  [[nodiscard]] int constraint_count() const override { return n_; }

  [[nodiscard]] double objective(const Vector& z) const override {
    return running_cost(z.head(n_), z.tail(m_));
  }

  [[nodiscard]] Vector constraints(const Vector& z) const override {
    const Vector mid = 0.5 * (z.head(n_) + z.segment(n_, n_));
    return z.segment(n_, n_) - z.head(n_) - dt_ * rhs(*model_, mid, z.tail(m_));
  }

  void derivatives(const Vector& z, const Vector& weights, bool need_hessian,
                   nlp::ElementDerivatives& out) const override {
    const int d = size();
    const int nm = n_ + m_;
    Vector mu(nm);
    mu << 0.5 * (z.head(n_) + z.segment(n_, n_)), z.tail(m_);
    Vector xu(nm);
    xu << z.head(n_), z.tail(m_);

    // Local variables map linearly to (x_i, u) for the cost, (midpoint, u) for f.
    Matrix to_mid = Matrix::Zero(nm, d);
    to_mid.topLeftCorner(n_, n_) = 0.5 * Matrix::Identity(n_, n_);
    to_mid.block(0, n_, n_, n_) = 0.5 * Matrix::Identity(n_, n_);
    to_mid.bottomRightCorner(m_, m_).setIdentity();
    Matrix to_cost = Matrix::Zero(nm, d);
    to_cost.topLeftCorner(n_, n_).setIdentity();
    to_cost.bottomRightCorner(m_, m_).setIdentity();

    auto cost = [this](const Vector& v) { return running_cost(v.head(n_), v.tail(m_)); };
    auto cost_vec = [&cost](const Vector& v) { return Vector::Constant(1, cost(v)); };
    auto dyn = [this](const Vector& v) { return rhs(*model_, v.head(n_), v.tail(m_)); };

    const double c0 = cost(xu);
    const Vector f0 = dyn(mu);
    const Matrix dcost = fd::jacobian(cost_vec, xu, Vector::Constant(1, c0));
    const Matrix df = fd::jacobian(dyn, mu, f0);

    out.gradient = to_cost.transpose() * dcost.row(0).transpose();
    const Matrix fx = df.leftCols(n_);
    const Matrix fu = df.rightCols(m_);
    out.jacobian.resize(n_, d);
    out.jacobian.leftCols(n_) = -Matrix::Identity(n_, n_) - 0.5 * dt_ * fx;
    out.jacobian.middleCols(n_, n_) = Matrix::Identity(n_, n_) - 0.5 * dt_ * fx;
    out.jacobian.rightCols(m_) = -dt_ * fu;
    if (!need_hessian) return;

    const Matrix hcost = fd::hessian(cost, xu, c0);
    auto psi = [&dyn, &weights](const Vector& v) { return weights.dot(dyn(v)); };
    const Matrix hpsi = fd::hessian(psi, mu, weights.dot(f0));
    out.hessian = to_cost.transpose() * hcost * to_cost - dt_ * (to_mid.transpose() * hpsi * to_mid);
  }

 private:
  double running_cost(const Vector& x, const Vector& u) const {
    return dt_ * stage_cost(*model_, weights_, output_, x, u) + rho_ * u.squaredNorm();
  }

  std::shared_ptr<const RIPHSModel> model_;
  CostWeights weights_;
  std::optional<OutputSpec> output_;
  int n_;
  int m_;
  double dt_;
  double rho_;
};

// Fixed terminal coordinates: x_K[j] - target_j = 0.
class TerminalConstraint final : public nlp::ElementFunction {
 public:
  explicit TerminalConstraint(Vector target) : target_(std::move(target)) {}
  [[nodiscard]] int size() const override { return static_cast<int>(target_.size()); }
  [[nodiscard]] int constraint_count() const override { return size(); }
  [[nodiscard]] double objective(const Vector&) const override { return 0.0; }
  [[nodiscard]] Vector constraints(const Vector& z) const override { return z - target_; }
  void derivatives(const Vector&, const Vector&, bool, nlp::ElementDerivatives& out) const override {
    const int d = size();
    out.gradient.setZero(d);
    out.jacobian = Matrix::Identity(d, d);
    out.hessian.setZero(d, d);
  }

 private:
  Vector target_;
};

Vector interpolate_state(const TrajectorySolution& traj, double t) {
  const auto& grid = traj.time_grid;
  if (t <= grid.front()) return traj.states.front();
  if (t >= grid.back()) return traj.states.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  const auto k = static_cast<std::size_t>(std::distance(grid.begin(), it)) - 1;
  const double w = (t - grid[k]) / (grid[k + 1] - grid[k]);
  return (1.0 - w) * traj.states[k] + w * traj.states[k + 1];
}

Vector control_at(const TrajectorySolution& traj, double t) {
  const auto& grid = traj.time_grid;
  if (traj.controls.empty()) return {};
  if (t <= grid.front()) return traj.controls.front();
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  auto k = static_cast<std::size_t>(std::distance(grid.begin(), it));
  k = std::min(k == 0 ? 0 : k - 1, traj.controls.size() - 1);
  return traj.controls[k];
}

}  // namespace

void CostWeights::validate(bool has_output) const {
  if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0)) throw ModelError("cost weights must be non-negative");
  if (!(T0 > 0.0)) throw ModelError("reference temperature T0 must be positive");
  if (alpha1 == 0.0 && alpha2 == 0.0 && !has_output) {
    throw ModelError("both cost weights are zero and no output term is present");
  }
}

void OutputSpec::validate(int state_dim) const {
  if (C.cols() != state_dim || C.rows() == 0) throw ModelError("output matrix C has wrong shape");
  if (y_ref.size() != C.rows()) throw ModelError("y_ref has wrong size");
  if (!(weight >= 0.0)) throw ModelError("output weight must be non-negative");
  const Vector x = C.completeOrthogonalDecomposition().solve(y_ref);
  if ((C * x - y_ref).norm() > 1e-10 * (1.0 + y_ref.norm())) {
    throw ModelError("y_ref is not in the image of C");
  }
}

AffineSubspace OutputSpec::preimage() const {
  const Vector x = C.completeOrthogonalDecomposition().solve(y_ref);
  Eigen::FullPivLU<Matrix> lu(C);
  lu.setThreshold(1e-10);
  return AffineSubspace(x, lu.kernel().cols() == 1 && lu.kernel().norm() == 0.0
                               ? Matrix(C.cols(), 0)
                               : Matrix(lu.kernel()));
}

void TerminalSpec::validate(const RIPHSModel& model) const {
  const int n = model.state_dim();
  switch (kind) {
    case Kind::Free:
      return;
    case Kind::Point:
      if (target.size() != n) throw ModelError("terminal point has wrong size");
      if (!target.allFinite()) throw ModelError("terminal point is not finite");
      return;
    case Kind::Componentwise: {
      if (static_cast<Eigen::Index>(components.size()) != target.size() || components.empty()) {
        throw ModelError("componentwise terminal: components and targets differ in size");
      }
      std::vector<int> sorted = components;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ModelError("componentwise terminal: repeated component");
      }
      for (int c : components) {
        if (c < 0 || c >= n) throw ModelError("componentwise terminal: component out of range");
      }
      return;
    }
  }
}

int TerminalSpec::constraint_count(int state_dim) const {
  switch (kind) {
    case Kind::Free: return 0;
    case Kind::Point: return state_dim;
    case Kind::Componentwise: return static_cast<int>(components.size());
  }
  return 0;
}

std::vector<std::pair<int, double>> TerminalSpec::fixed(int state_dim) const {
  std::vector<std::pair<int, double>> out;
  if (kind == Kind::Point) {
    for (int j = 0; j < state_dim; ++j) out.emplace_back(j, target[j]);
  } else if (kind == Kind::Componentwise) {
    for (std::size_t k = 0; k < components.size(); ++k) {
      out.emplace_back(components[k], target[static_cast<Eigen::Index>(k)]);
    }
  }
  return out;
}

void ControlBounds::validate(int input_dim, bool require_origin_interior) const {
  if (lower.size() != input_dim || upper.size() != input_dim) {
    throw ModelError("control bounds have wrong size");
  }
  for (int j = 0; j < input_dim; ++j) {
    if (!(lower[j] < upper[j]) || !std::isfinite(lower[j]) || !std::isfinite(upper[j])) {
      throw ModelError("control bounds must be finite with lower < upper");
    }
    if (require_origin_interior && !(lower[j] < 0.0 && upper[j] > 0.0)) {
      throw ModelError("control bounds must contain the origin in their interior");
    }
  }
}

void OCPSpec::validate() const {
  if (!model) throw ModelError("OCP without model");
  model->require_in_domain(x0);
  if (horizon.steps < 1 || !(horizon.dt > 0.0)) throw ModelError("invalid horizon");
  weights.validate(output.has_value());
  if (output) output->validate(model->state_dim());
  terminal.validate(*model);
  bounds.validate(model->input_dim(), terminal.kind != TerminalSpec::Kind::Free);
}

double OCPSpec::tikhonov() const {
  return options.tikhonov < 0.0 ? 1e-6 * horizon.dt : options.tikhonov;
}

double supply_cost(const RIPHSModel& model, const CostWeights& weights, const Vector& x,
                   const Vector& u) {
  const Outputs y = outputs(model, x);
  return (weights.alpha1 * y.y_H - weights.alpha2 * weights.T0 * y.y_S).dot(u);
}

double stage_cost(const RIPHSModel& model, const CostWeights& weights,
                  const std::optional<OutputSpec>& output, const Vector& x, const Vector& u) {
  double cost = 0.0;
  if (u.size() != model.input_dim()) throw ModelError("control has wrong dimension");
  if (u.squaredNorm() > 0.0) {
    cost = supply_cost(model, weights, x, u);
  } else {
    model.require_in_domain(x);
  }
  if (output) cost += output->weight * (output->C * x - output->y_ref).squaredNorm();
  return cost;
}

Transcription transcribe(const OCPSpec& spec) {
  spec.validate();
  const RIPHSModel& model = *spec.model;
  Transcription tr;
  tr.state_dim = model.state_dim();
  tr.input_dim = model.input_dim();
  tr.steps = spec.horizon.steps;
  const int n = tr.state_dim;
  const int m = tr.input_dim;
  const int big_k = tr.steps;

  nlp::NLPProblem& p = tr.problem;
  p.num_variables = big_k * (n + m);
  p.lower = Vector::Constant(p.num_variables, -kInf);
  p.upper = Vector::Constant(p.num_variables, kInf);
  if (const auto box = model.domain().box()) {
    for (int i = 1; i <= big_k; ++i) {
      for (int j = 0; j < n; ++j) {
        p.lower[tr.state_index(i, j)] = box->first[j];
        p.upper[tr.state_index(i, j)] = box->second[j];
      }
    }
  }
  for (int i = 0; i < big_k; ++i) {
    for (int j = 0; j < m; ++j) {
      p.lower[tr.control_index(i, j)] = spec.bounds.lower[j];
      p.upper[tr.control_index(i, j)] = spec.bounds.upper[j];
    }
  }

  const auto stage = std::make_shared<DynamicsStage>(spec, spec.horizon.dt, spec.tikhonov());
  for (int i = 0; i < big_k; ++i) {
    std::vector<int> index(static_cast<std::size_t>(2 * n + m));
    Vector fixed = Vector::Zero(2 * n + m);
    for (int j = 0; j < n; ++j) {
      if (i == 0) {
        index[static_cast<std::size_t>(j)] = -1;
        fixed[j] = spec.x0[j];
      } else {
        index[static_cast<std::size_t>(j)] = tr.state_index(i, j);
      }
      index[static_cast<std::size_t>(n + j)] = tr.state_index(i + 1, j);
    }
    for (int j = 0; j < m; ++j) index[static_cast<std::size_t>(2 * n + j)] = tr.control_index(i, j);
    p.add(stage, std::move(index), std::move(fixed));
  }

  const auto fixed = spec.terminal.fixed(n);
  if (!fixed.empty()) {
    std::vector<int> index;
    Vector target(static_cast<Eigen::Index>(fixed.size()));
    for (std::size_t k = 0; k < fixed.size(); ++k) {
      index.push_back(tr.state_index(big_k, fixed[k].first));
      target[static_cast<Eigen::Index>(k)] = fixed[k].second;
    }
    p.add(std::make_shared<TerminalConstraint>(target), std::move(index));
  }
  p.validate();
  return tr;
}

Vector initial_guess(const OCPSpec& spec, const Transcription& tr) {
  const int n = tr.state_dim;
  const int big_k = tr.steps;
  Vector z = Vector::Zero(tr.problem.num_variables);
  const double tf = spec.horizon.t_final;

  if (spec.options.initial_guess == InitialGuess::WarmStart && spec.options.warm_start) {
    const TrajectorySolution& w = *spec.options.warm_start;
    const double tw = w.time_grid.back() - w.time_grid.front();
    auto source_time = [&](double t) {
      if (tf <= tw) return t * tw / tf;
      const double half = 0.5 * tw;
      if (t <= half) return t;
      if (t >= tf - half) return t - (tf - tw);
      return half;
    };
    for (int i = 1; i <= big_k; ++i) {
      z.segment(tr.state_index(i, 0), n) = interpolate_state(w, source_time(i * spec.horizon.dt));
    }
    for (int i = 0; i < big_k; ++i) {
      z.segment(tr.control_index(i, 0), tr.input_dim) =
          control_at(w, source_time((i + 0.5) * spec.horizon.dt));
    }
    return tr.problem.project(z);
  }

  Vector target = spec.x0;
  for (const auto& [j, v] : spec.terminal.fixed(n)) target[j] = v;
  for (int i = 1; i <= big_k; ++i) {
    const double s = static_cast<double>(i) / big_k;
    z.segment(tr.state_index(i, 0), n) = (1.0 - s) * spec.x0 + s * target;
  }
  return tr.problem.project(z);
}

TrajectorySolution unpack(const OCPSpec& spec, const Transcription& tr, const Vector& z) {
  TrajectorySolution traj;
  traj.time_grid = spec.horizon.grid();
  traj.states.push_back(spec.x0);
  for (int i = 1; i <= tr.steps; ++i) traj.states.push_back(z.segment(tr.state_index(i, 0), tr.state_dim));
  for (int i = 0; i < tr.steps; ++i) {
    traj.controls.push_back(z.segment(tr.control_index(i, 0), tr.input_dim));
  }
  fill_node_diagnostics(*spec.model, traj);
  return traj;
}

CostBreakdown evaluate_costs(const OCPSpec& spec, const TrajectorySolution& traj) {
  const RIPHSModel& model = *spec.model;
  check_consistent(model, traj);
  CostBreakdown c;
  const double rho = spec.tikhonov();
  double production = 0.0;
  for (int i = 0; i < traj.steps(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double dt = traj.dt(i);
    const Vector& x = traj.states[k];
    const Vector& u = traj.controls[k];
    c.supply += supply_cost(model, spec.weights, x, u) * dt;
    if (spec.output) {
      c.tracking += spec.output->weight * (spec.output->C * x - spec.output->y_ref).squaredNorm() * dt;
    }
    c.regularization += rho * u.squaredNorm();
    production += entropy_production(model, traj.midpoint(i)) * dt;
  }
  c.objective = c.supply + c.tracking + c.regularization;
  const Vector& x0 = traj.states.front();
  const Vector& xk = traj.states.back();
  const double energy = model.hamiltonian(xk) - model.hamiltonian(x0);
  const double entropy_term = model.entropy(x0) - model.entropy(xk) + production;
  c.identity_residual = std::abs(c.supply - spec.weights.alpha1 * energy -
                                 spec.weights.alpha2 * spec.weights.T0 * entropy_term);
  return c;
}

OCPSolution solve_ocp(const OCPSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  const Transcription tr = transcribe(spec);
  const Vector z0 = initial_guess(spec, tr);
  const nlp::Result res = nlp::solve(tr.problem, z0, spec.options.solver);

  OCPSolution out;
  out.trajectory = unpack(spec, tr, res.z);
  out.status = res.status;
  out.multipliers = res.multipliers;
  out.merit_monotone = res.merit_monotone;
  out.cost = evaluate_costs(spec, out.trajectory);
  const Vector c = tr.problem.constraints(res.z);
  out.max_dynamics_violation =
      tr.dynamics_constraint_count() > 0
          ? c.head(tr.dynamics_constraint_count()).lpNorm<Eigen::Infinity>()
          : 0.0;
  const int n = tr.state_dim;
  out.state_min = Vector::Constant(n, kInf);
  out.state_max = Vector::Constant(n, -kInf);
  for (const Vector& x : out.trajectory.states) {
    out.state_min = out.state_min.cwiseMin(x);
    out.state_max = out.state_max.cwiseMax(x);
  }

  SolverMetadata& meta = out.trajectory.solver;
  meta.producer = "solve_ocp";
  meta.status = nlp::to_string(res.status);
  meta.outer_iterations = res.outer_iterations;
  meta.inner_iterations = res.inner_iterations;
  meta.constraint_violation = res.constraint_violation;
  meta.projected_gradient = res.projected_gradient;
  meta.objective = res.objective;
  meta.tikhonov = spec.tikhonov();
  meta.identity_residual = out.cost.identity_residual;
  meta.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace riphs
