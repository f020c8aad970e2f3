#include "riphs/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SVD>

#include "riphs/finite_difference.hpp"

namespace riphs {

namespace {

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Matrix orthonormal_range(const Matrix& a) {
  if (a.cols() == 0) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const int r = numerical_rank(a);
  return svd.matrixU().leftCols(r);
}

// Steady-state single-element problem over z = (x, u).
class SteadyStateElement final : public nlp::ElementFunction {
 public:
  SteadyStateElement(const RIPHSModel& model, const CostWeights& weights)
      : model_(model), weights_(weights) {}
  [[nodiscard]] int size() const override { return model_.state_dim() + model_.input_dim(); }
  [[nodiscard]] int constraint_count() const override { return model_.state_dim(); }
  [[nodiscard]] double objective(const Vector& z) const override {
    return supply_cost(model_, weights_, z.head(model_.state_dim()), z.tail(model_.input_dim()));
  }
  [[nodiscard]] Vector constraints(const Vector& z) const override {
    return rhs(model_, z.head(model_.state_dim()), z.tail(model_.input_dim()));
  }

 private:
  const RIPHSModel& model_;
  CostWeights weights_;
};

}  // namespace

int numerical_rank(const Matrix& a) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > kRankThreshold * s[0]) ++r;
  }
  return r;
}

Vector EquilibriumSet::residual(const RIPHSModel& model, const Vector& x) const {
  return normal_basis.transpose() * model.co_energy(x);
}

EquilibriumSet equilibrium_set(const RIPHSModel& model, bool force_implicit) {
  const int n = model.state_dim();
  EquilibriumSet set;
  set.codim_vectors.resize(n, model.num_irreversible());
  for (int k = 0; k < model.num_irreversible(); ++k) {
    set.codim_vectors.col(k) = model.irr_structure(k) * model.entropy_vector();
  }
  set.rank = numerical_rank(set.codim_vectors);
  set.normal_basis = orthonormal_range(set.codim_vectors);
  set.dimension = n - set.rank;
  if (!force_implicit && model.known_equilibria()) {
    set.kind = EquilibriumSet::Kind::Affine;
    set.affine = model.known_equilibria();
    if (set.affine->dim() != set.dimension) {
      throw ModelError("closed-form equilibrium set of " + model.name() +
                       " disagrees with the rank formula");
    }
  }
  return set;
}

DimensionReport manifold_dimension(const RIPHSModel& model, int samples, std::uint64_t seed) {
  const EquilibriumSet set = equilibrium_set(model);
  DimensionReport rep;
  rep.state_dim = model.state_dim();
  rep.rank = set.rank;
  rep.dimension = set.dimension;
  if (!set.affine) return rep;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int n = model.state_dim();
  for (int attempt = 0; attempt < 50 * samples && rep.regularity_samples < samples; ++attempt) {
    Vector alpha(set.affine->dim());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha[i] = unif(rng);
    const Vector x = set.affine->offset + set.affine->basis * alpha;
    if (!model.domain().contains(x)) continue;
    Matrix stacked(n + 1, n);
    stacked.topRows(n) = model.hamiltonian_hessian(x);
    stacked.row(n) = model.co_energy(x).transpose();
    ++rep.regularity_samples;
    if (numerical_rank(stacked) == n) ++rep.regular_samples;
  }
  return rep;
}

DistanceResult distance_to_equilibria(const EquilibriumSet& set, const RIPHSModel& model,
                                      const Vector& x, const DistanceOptions& opts) {
  model.require_in_domain(x);
  DistanceResult out;
  if (set.kind == EquilibriumSet::Kind::Affine) {
    out.projection = set.affine->project(x);
    out.distance = (x - out.projection).norm();
    return out;
  }
  if (set.rank == 0) {  // T is the whole domain
    out.projection = x;
    return out;
  }

  // Gauss-Newton on min |xi - x|^2 s.t. r(xi) = 0: minimum-norm correction
  // of the linearised constraint relative to x, damped by halving.
  Vector xi = x;
  Vector r = set.residual(model, xi);
  bool done = false;
  for (int it = 0; it < opts.max_iterations && !done; ++it) {
    out.iterations = it + 1;
    const Matrix jac = set.normal_basis.transpose() * model.hamiltonian_hessian(xi);
    const Vector to_x = x - xi;
    const Vector delta =
        to_x - jac.completeOrthogonalDecomposition().solve(r + jac * to_x);
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= 8; ++h, t *= 0.5) {
      const Vector trial = xi + t * delta;
      if (!model.domain().contains(trial)) continue;
      Vector rt;
      try {
        rt = set.residual(model, trial);
      } catch (const ModelError&) {
        continue;
      }
      if (!rt.allFinite()) continue;
      if (rt.norm() < r.norm() || rt.norm() <= opts.residual_tolerance) {
        const double step = (t * delta).norm();
        xi = trial;
        r = rt;
        accepted = true;
        done = r.norm() <= opts.residual_tolerance &&
               step <= opts.step_tolerance * (1.0 + xi.norm());
        break;
      }
    }
    if (!accepted) break;
  }
  if (done) {
    out.projection = xi;
    out.distance = (x - xi).norm();
    return out;
  }
  out.converged = false;
  out.surrogate = true;
  out.projection.resize(0);
  out.distance = opts.surrogate_scale * std::sqrt(entropy_production(model, x));
  return out;
}

bool likely_empty(const EquilibriumSet& set, const RIPHSModel& model, const Vector& lo,
                  const Vector& hi, int starts, std::uint64_t seed) {
  if (set.kind == EquilibriumSet::Kind::Affine) return false;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < starts; ++s) {
    Vector x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = lo[i] + unif(rng) * (hi[i] - lo[i]);
    if (!model.domain().contains(x)) continue;
    if (distance_to_equilibria(set, model, x).converged) return false;
  }
  return true;
}

SteadyStateCost steady_state_cost(const RIPHSModel& model, const Vector& x, const Vector& u,
                                  const CostWeights& weights) {
  weights.validate(true);
  const Evaluation ev = model.evaluate(x);
  SteadyStateCost c;
  c.residual_norm = rhs(model, ev, u).norm();
  if (c.residual_norm > 1e-9 * (1.0 + x.norm())) {
    throw ModelError("not a steady state: |f(x, u)| = " + std::to_string(c.residual_norm));
  }
  const Outputs y = outputs(model, ev);
  c.direct = (weights.alpha1 * y.y_H - weights.alpha2 * weights.T0 * y.y_S).dot(u);
  c.closed_form = weights.alpha2 * weights.T0 * ev.entropy_production();
  // H_x^T f = y_H^T u and e^T f = sigma + y_S^T u vanish only up to |f|.
  const double slack = (weights.alpha1 * ev.co_energy.norm() +
                        weights.alpha2 * weights.T0 * model.entropy_vector().norm()) *
                       c.residual_norm;
  const double tol = 1e-9 * std::max(std::abs(c.direct), std::abs(c.closed_form)) + slack + 1e-15;
  if (std::abs(c.direct - c.closed_form) > tol) {
    throw ModelError("steady-state cost identity violated");
  }
  return c;
}

SteadyState find_optimal_steady_state(const RIPHSModel& model, const CostWeights& weights,
                                      const ControlBounds& bounds, const Vector& x_guess,
                                      const nlp::SolverOptions& opts) {
  const int n = model.state_dim();
  const int m = model.input_dim();
  bounds.validate(m, false);
  model.require_in_domain(x_guess);

  nlp::NLPProblem p;
  p.num_variables = n + m;
  p.lower = Vector::Constant(n + m, -std::numeric_limits<double>::infinity());
  p.upper = Vector::Constant(n + m, std::numeric_limits<double>::infinity());
  if (const auto box = model.domain().box()) {
    p.lower.head(n) = box->first;
    p.upper.head(n) = box->second;
  }
  p.lower.tail(m) = bounds.lower;
  p.upper.tail(m) = bounds.upper;
  std::vector<int> index(static_cast<std::size_t>(n + m));
  for (int i = 0; i < n + m; ++i) index[static_cast<std::size_t>(i)] = i;
  p.add(std::make_shared<SteadyStateElement>(model, weights), index);

  Vector z0(n + m);
  z0 << x_guess, Vector::Zero(m);
  const nlp::Result res = nlp::solve(p, z0, opts);
  if (res.status != nlp::Status::Converged) {
    throw nlp::SolverError(std::string("steady-state problem did not converge: ") +
                           nlp::to_string(res.status));
  }

  // Polish onto f = 0 with minimum-norm Gauss-Newton corrections; the NLP
  // tolerance alone leaves O(1e-8) slack that shows up as spurious negative cost.
  Vector z = res.z;
  auto f_of = [&](const Vector& w) { return rhs(model, w.head(n), w.tail(m)); };
  Vector fz = f_of(z);
  for (int it = 0; it < 10 && fz.norm() > 1e-14 * (1.0 + z.norm()); ++it) {
    const Matrix jac = fd::jacobian(f_of, z, fz, 1e-7);
    Vector trial = z - jac.completeOrthogonalDecomposition().solve(fz);
    trial.tail(m) = trial.tail(m).cwiseMax(bounds.lower).cwiseMin(bounds.upper);
    if (!model.domain().contains(trial.head(n))) break;
    const Vector f_trial = f_of(trial);
    if (!(f_trial.norm() < fz.norm())) break;
    z = trial;
    fz = f_trial;
  }

  SteadyState s;
  s.x = z.head(n);
  s.u = z.tail(m);
  s.status = res.status;
  const Evaluation ev = model.evaluate(s.x);
  s.residual_norm = rhs(model, ev, s.u).norm();
  const Outputs y = outputs(model, ev);
  s.stage_cost = (weights.alpha1 * y.y_H - weights.alpha2 * weights.T0 * y.y_S).dot(s.u);
  s.closed_form_cost = weights.alpha2 * weights.T0 * ev.entropy_production();
  if (s.stage_cost <= 1e-8) {
    const EquilibriumSet set = equilibrium_set(model);
    const bool in_t = distance_to_equilibria(set, model, s.x).distance <= 1e-7;
    Vector balance = ev.input * s.u;
    if (model.has_poisson_structure()) balance += ev.poisson * ev.co_energy;
    s.certified = in_t && balance.norm() <= 1e-7;
  }
  return s;
}

Matrix subspace_intersection(const std::vector<Matrix>& subspaces) {
  if (subspaces.empty()) throw ModelError("no subspaces given");
  const Eigen::Index n = subspaces.front().rows();
  // x lies in every V_k iff (I - P_k) x = 0 for all k.
  Matrix stacked(n * static_cast<Eigen::Index>(subspaces.size()), n);
  for (std::size_t k = 0; k < subspaces.size(); ++k) {
    if (subspaces[k].rows() != n) throw ModelError("subspaces live in different spaces");
    const Matrix q = orthonormal_range(subspaces[k]);
    stacked.middleRows(static_cast<Eigen::Index>(k) * n, n) =
        Matrix::Identity(n, n) - q * q.transpose();
  }
  Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double scale = std::max(1.0, s.size() ? s[0] : 0.0);
  int null_dim = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] <= kRankThreshold * scale) ++null_dim;
  }
  return svd.matrixV().rightCols(null_dim);
}

SubspaceEquivalenceReport subspace_distance_equivalence_check(const std::vector<Matrix>& subspaces,
                                                              int samples, std::uint64_t seed) {
  if (subspaces.size() < 2) throw ModelError("need at least two subspaces");
  const Eigen::Index n = subspaces.front().rows();
  std::vector<Matrix> q;
  for (const Matrix& v : subspaces) q.push_back(orthonormal_range(v));
  const Matrix cap = subspace_intersection(subspaces);

  SubspaceEquivalenceReport rep;
  rep.samples = samples;
  rep.intersection_dim = static_cast<int>(cap.cols());
  rep.trivial = cap.cols() == n;
  rep.c_low = std::numeric_limits<double>::infinity();
  rep.c_high = 0.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int s = 0; s < samples; ++s) {
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = normal(rng);
    const double lhs = (x - cap * (cap.transpose() * x)).norm();
    double rhs_sum = 0.0;
    for (const Matrix& b : q) rhs_sum += (x - b * (b.transpose() * x)).norm();
    if (lhs <= 1e-12 * x.norm()) continue;
    ++rep.informative_samples;
    rep.c_low = std::min(rep.c_low, rhs_sum / lhs);
    rep.c_high = std::max(rep.c_high, rhs_sum / lhs);
  }
  if (rep.informative_samples == 0) {
    rep.c_low = 1.0;
    rep.c_high = 1.0;
  }
  return rep;
}

nlohmann::json to_json(const EquilibriumSet& set) {
  nlohmann::json j;
  j["kind"] = set.kind == EquilibriumSet::Kind::Affine ? "affine" : "implicit";
  j["rank"] = set.rank;
  j["dimension"] = set.dimension;
  nlohmann::json cols = nlohmann::json::array();
  for (Eigen::Index k = 0; k < set.codim_vectors.cols(); ++k) {
    cols.push_back(to_vector(set.codim_vectors.col(k)));
  }
  j["codim_vectors"] = cols;
  if (set.affine) {
    nlohmann::json basis = nlohmann::json::array();
    for (Eigen::Index k = 0; k < set.affine->basis.cols(); ++k) {
      basis.push_back(to_vector(set.affine->basis.col(k)));
    }
    j["offset"] = to_vector(set.affine->offset);
    j["basis"] = basis;
  }
  return j;
}

nlohmann::json to_json(const DimensionReport& r) {
  return {{"state_dim", r.state_dim},
          {"rank", r.rank},
          {"dimension", r.dimension},
          {"regularity_samples", r.regularity_samples},
          {"regular_samples", r.regular_samples},
          {"regular", r.regular()}};
}

nlohmann::json to_json(const SteadyState& s) {
  return {{"x", to_vector(s.x)},
          {"u", to_vector(s.u)},
          {"stage_cost", s.stage_cost},
          {"closed_form_cost", s.closed_form_cost},
          {"residual_norm", s.residual_norm},
          {"certified", s.certified},
          {"status", nlp::to_string(s.status)}};
}

}  // namespace riphs
