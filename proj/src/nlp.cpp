#include "riphs/nlp.hpp"

#include "riphs/finite_difference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace riphs::nlp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LocalValue {
  double f = 0.0;
  Vector c;
  bool ok = false;
};

LocalValue try_eval(const ElementFunction& fn, const Vector& z) {
  LocalValue v;
  try {
    v.f = fn.objective(z);
    v.c = fn.constraints(z);
    v.ok = std::isfinite(v.f) && v.c.allFinite();
  } catch (const std::exception&) {
    v.ok = false;
  }
  return v;
}

// Projects a symmetric matrix onto the PSD cone.
Matrix psd_part(const Matrix& h) {
  if (h.size() == 0) return h;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
  Vector ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void ElementFunction::derivatives(const Vector& z, const Vector& weights, bool need_hessian,
                                  ElementDerivatives& out) const {
  const int nc = constraint_count();
  const LocalValue centre = try_eval(*this, z);
  if (!centre.ok) throw SolverError("element not finite at derivative point");
  // Objective and constraints share one stencil: stack them into one vector.
  auto stacked = [this, nc](const Vector& zz) {
    Vector v(nc + 1);
    v[0] = objective(zz);
    if (nc > 0) v.tail(nc) = constraints(zz);
    return v;
  };
  Vector f0(nc + 1);
  f0[0] = centre.f;
  if (nc > 0) f0.tail(nc) = centre.c;
  Matrix jac;
  try {
    jac = fd::jacobian(stacked, z, f0);
  } catch (const std::runtime_error& e) {
    throw SolverError(e.what());
  }
  out.gradient = jac.row(0).transpose();
  out.jacobian = jac.bottomRows(nc);
  if (!need_hessian) return;
  auto phi = [this, nc, &weights](const Vector& zz) {
    return objective(zz) + (nc > 0 ? weights.dot(constraints(zz)) : 0.0);
  };
  out.hessian = fd::hessian(phi, z, centre.f + (nc > 0 ? weights.dot(centre.c) : 0.0));
}

void NLPProblem::add(std::shared_ptr<const ElementFunction> fn, std::vector<int> index,
                     Vector fixed) {
  Element e;
  e.constraint_offset = num_constraints;
  num_constraints += fn->constraint_count();
  if (fixed.size() == 0) fixed = Vector::Zero(static_cast<Eigen::Index>(index.size()));
  e.fn = std::move(fn);
  e.index = std::move(index);
  e.fixed = std::move(fixed);
  elements.push_back(std::move(e));
}

void NLPProblem::validate() const {
  if (lower.size() != num_variables || upper.size() != num_variables) {
    throw SolverError("bounds have wrong size");
  }
  for (int i = 0; i < num_variables; ++i) {
    if (!(lower[i] <= upper[i])) throw SolverError("lower bound exceeds upper bound");
  }
  int rows = 0;
  for (std::size_t k = 0; k < elements.size(); ++k) {
    const Element& e = elements[k];
    const int id = static_cast<int>(k);
    if (!e.fn) throw SolverError("element without function", id);
    if (static_cast<int>(e.index.size()) != e.fn->size() || e.fixed.size() != e.fn->size()) {
      throw SolverError("element index map has wrong size", id);
    }
    for (int idx : e.index) {
      if (idx < -1 || idx >= num_variables) throw SolverError("element index out of range", id);
    }
    if (e.constraint_offset != rows) throw SolverError("constraint rows are not contiguous", id);
    rows += e.fn->constraint_count();
  }
  if (rows != num_constraints) throw SolverError("constraint count mismatch");
}

Vector NLPProblem::local(const Element& e, const Vector& z) const {
  Vector out = e.fixed;
  for (std::size_t j = 0; j < e.index.size(); ++j) {
    if (e.index[j] >= 0) out[static_cast<Eigen::Index>(j)] = z[e.index[j]];
  }
  return out;
}

double NLPProblem::objective(const Vector& z) const {
  double f = 0.0;
  for (const Element& e : elements) f += e.fn->objective(local(e, z));
  return f;
}

Vector NLPProblem::constraints(const Vector& z) const {
  Vector c(num_constraints);
  for (const Element& e : elements) {
    const int nc = e.fn->constraint_count();
    if (nc > 0) c.segment(e.constraint_offset, nc) = e.fn->constraints(local(e, z));
  }
  return c;
}

Vector NLPProblem::project(const Vector& z) const { return z.cwiseMax(lower).cwiseMin(upper); }

double projected_gradient_norm(const NLPProblem& problem, const Vector& z, const Vector& g) {
  if (z.size() == 0) return 0.0;
  return (problem.project(z - g) - z).lpNorm<Eigen::Infinity>();
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::MaxIterations: return "max_iterations";
    case Status::Stalled: return "stalled";
  }
  return "unknown";
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const NLPProblem& p) : p_(p) {}

  // Value at z; +inf if any element cannot be evaluated.
  double value(const Vector& z, const Vector& lambda, double mu, Vector* c_out = nullptr) const {
    double total = 0.0;
    Vector c(p_.num_constraints);
    for (const Element& e : p_.elements) {
      const LocalValue v = try_eval(*e.fn, p_.local(e, z));
      if (!v.ok) return kInf;
      total += v.f;
      const int nc = e.fn->constraint_count();
      if (nc > 0) c.segment(e.constraint_offset, nc) = v.c;
    }
    if (p_.num_constraints > 0) total += lambda.dot(c) + 0.5 * mu * c.squaredNorm();
    if (c_out) *c_out = std::move(c);
    return total;
  }

  // Objective gradient and constraint Jacobian (as triplets).
  void first_order(const Vector& z, Vector& grad,
                   std::vector<Eigen::Triplet<double>>& jac) const {
    grad.setZero(p_.num_variables);
    jac.clear();
    ElementDerivatives d;
    for (const Element& e : p_.elements) {
      const Vector zl = p_.local(e, z);
      const int nc = e.fn->constraint_count();
      e.fn->derivatives(zl, Vector::Zero(nc), false, d);
      for (std::size_t a = 0; a < e.index.size(); ++a) {
        const int ia = e.index[a];
        if (ia < 0) continue;
        const auto la = static_cast<Eigen::Index>(a);
        grad[ia] += d.gradient[la];
        for (int r = 0; r < nc; ++r) {
          if (d.jacobian(r, la) != 0.0) jac.emplace_back(e.constraint_offset + r, ia, d.jacobian(r, la));
        }
      }
    }
  }

  // Gradient and PSD Hessian model of the augmented Lagrangian.
  void linearize(const Vector& z, const Vector& lambda, double mu, Vector& grad,
                 std::vector<Eigen::Triplet<double>>& triplets) const {
    grad.setZero(p_.num_variables);
    triplets.clear();
    ElementDerivatives d;
    for (const Element& e : p_.elements) {
      const Vector zl = p_.local(e, z);
      const int nc = e.fn->constraint_count();
      Vector w;
      if (nc > 0) {
        const Vector c = e.fn->constraints(zl);
        w = lambda.segment(e.constraint_offset, nc) + mu * c;
      }
      e.fn->derivatives(zl, w, true, d);
      Vector g = d.gradient;
      Matrix h = psd_part(d.hessian);
      if (nc > 0) {
        g += d.jacobian.transpose() * w;
        h += mu * d.jacobian.transpose() * d.jacobian;
      }
      const auto dim = e.index.size();
      for (std::size_t a = 0; a < dim; ++a) {
        const int ia = e.index[a];
        if (ia < 0) continue;
        grad[ia] += g[static_cast<Eigen::Index>(a)];
        for (std::size_t b = 0; b < dim; ++b) {
          const int ib = e.index[b];
          if (ib < 0) continue;
          triplets.emplace_back(ia, ib, h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
        }
      }
    }
  }

 private:
  const NLPProblem& p_;
};

struct InnerResult {
  int iterations = 0;
  double projected_gradient = kInf;
  bool monotone = true;
  bool stalled = false;
  bool diverged = false;
};

InnerResult minimize_bound_constrained(const NLPProblem& p, const AugmentedLagrangian& al,
                                       Vector& z, const Vector& lambda, double mu, double omega,
                                       int max_inner, double violation_limit, bool verbose) {
  InnerResult out;
  const int n = p.num_variables;
  Vector grad(n);
  std::vector<Eigen::Triplet<double>> triplets;
  double value = al.value(z, lambda, mu);
  double damping = 0.0;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  bool analyzed = false;

  for (int it = 0; it < max_inner; ++it) {
    al.linearize(z, lambda, mu, grad, triplets);
    out.projected_gradient = projected_gradient_norm(p, z, grad);
    if (out.projected_gradient <= omega) return out;

    // Epsilon-active bounds with the gradient pointing outward are held fixed.
    const double eps = std::min(1e-6, out.projected_gradient);
    std::vector<char> active(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      const bool at_lo = z[i] - p.lower[i] <= eps && grad[i] > 0.0;
      const bool at_hi = p.upper[i] - z[i] <= eps && grad[i] < 0.0;
      active[static_cast<std::size_t>(i)] = (at_lo || at_hi) ? 1 : 0;
    }
    SparseMatrix h(n, n);
    h.setFromTriplets(triplets.begin(), triplets.end());
    double max_diag = 0.0;
    for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(h.coeff(i, i)));
    const double base_shift = 1e-12 * (1.0 + max_diag);

    // Decouple active variables: zero their rows/cols, unit diagonal.
    SparseMatrix eye(n, n);
    eye.setIdentity();
    h = h + eye * 0.0;  // ensure every diagonal entry is stored
    for (int k = 0; k < h.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator itr(h, k); itr; ++itr) {
        const auto r = static_cast<std::size_t>(itr.row());
        const auto c = static_cast<std::size_t>(itr.col());
        if (active[r] || active[c]) itr.valueRef() = (r == c) ? 1.0 : 0.0;
      }
    }
    Vector rhs = -grad;
    for (int i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)]) rhs[i] = 0.0;
    }

    Vector dir;
    for (int attempt = 0; attempt < 12; ++attempt) {
      const double shift = base_shift + damping;
      SparseMatrix hs = h;
      for (int i = 0; i < n; ++i) {
        if (!active[static_cast<std::size_t>(i)]) hs.coeffRef(i, i) += shift;
      }
      if (!analyzed) {
        ldlt.analyzePattern(hs);
        analyzed = true;
      }
      ldlt.factorize(hs);
      bool ok = ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all();
      if (ok) {
        dir = ldlt.solve(rhs);
        ok = dir.allFinite();
      }
      if (ok) break;
      damping = std::max(10.0 * damping, 1e-8 * (1.0 + max_diag));
      dir.resize(0);
    }
    if (dir.size() == 0) dir = rhs;

    // Armijo search along the projection arc.
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
      const Vector trial = p.project(z + step * dir);
      const double decrease = grad.dot(trial - z);
      if (decrease >= 0.0) {
        if ((trial - z).lpNorm<Eigen::Infinity>() == 0.0) break;
        continue;
      }
      Vector c_trial;
      const double tv = al.value(trial, lambda, mu, &c_trial);
      if (tv <= value + 1e-4 * decrease) {
        if (tv > value) out.monotone = false;
        z = trial;
        value = tv;
        accepted = true;
        if (c_trial.size() > 0 && c_trial.lpNorm<Eigen::Infinity>() > violation_limit) {
          out.diverged = true;
          ++out.iterations;
          return out;
        }
        break;
      }
    }
    ++out.iterations;
    if (!accepted) {
      // Fall back to a projected steepest-descent step before giving up.
      double s = 1.0 / (1.0 + max_diag);
      for (int ls = 0; ls < 60; ++ls, s *= 0.5) {
        const Vector trial = p.project(z - s * grad);
        const double decrease = grad.dot(trial - z);
        if (decrease >= 0.0) continue;
        const double tv = al.value(trial, lambda, mu);
        if (tv <= value + 1e-4 * decrease) {
          z = trial;
          value = tv;
          accepted = true;
          break;
        }
      }
      damping = std::max(10.0 * damping, 1e-6 * (1.0 + max_diag));
      if (!accepted) {
        out.stalled = true;
        return out;
      }
    } else if (step == 1.0) {
      damping *= 0.1;
      if (damping < 1e-14 * (1.0 + max_diag)) damping = 0.0;
    } else if (step < 0.1) {
      damping = std::max(4.0 * damping, 1e-10 * (1.0 + max_diag));
    }
    if (verbose) {
      std::fprintf(stderr, "    inner %3d  L=% .10e  |pg|=%.3e  step=%.3g\n", it, value,
                   out.projected_gradient, step);
    }
  }
  al.linearize(z, lambda, mu, grad, triplets);
  out.projected_gradient = projected_gradient_norm(p, z, grad);
  return out;
}

// lambda minimising |grad f + J^T lambda| over the variables off their bounds.
Vector least_squares_multipliers(const NLPProblem& p, const AugmentedLagrangian& al,
                                 const Vector& z) {
  Vector grad;
  std::vector<Eigen::Triplet<double>> trip;
  al.first_order(z, grad, trip);
  std::vector<Eigen::Triplet<double>> free_trip;
  for (const auto& t : trip) {
    const int j = t.col();
    if (z[j] > p.lower[j] && z[j] < p.upper[j]) free_trip.push_back(t);
  }
  Vector g = grad;
  for (int j = 0; j < p.num_variables; ++j) {
    if (!(z[j] > p.lower[j] && z[j] < p.upper[j])) g[j] = 0.0;
  }
  SparseMatrix jac(p.num_constraints, p.num_variables);
  jac.setFromTriplets(free_trip.begin(), free_trip.end());
  SparseMatrix normal = jac * jac.transpose();
  SparseMatrix eye(p.num_constraints, p.num_constraints);
  eye.setIdentity();
  normal += 1e-12 * eye;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(normal);
  if (ldlt.info() != Eigen::Success) return Vector::Zero(p.num_constraints);
  Vector lambda = ldlt.solve(-(jac * g));
  return lambda.allFinite() ? lambda : Vector::Zero(p.num_constraints);
}

}  // namespace

Result solve(const NLPProblem& problem, const Vector& z0, const SolverOptions& options) {
  problem.validate();
  if (z0.size() != problem.num_variables) throw SolverError("initial guess has wrong size");

  Result res;
  Vector z = problem.project(z0);
  for (std::size_t k = 0; k < problem.elements.size(); ++k) {
    const Element& e = problem.elements[k];
    const LocalValue v = try_eval(*e.fn, problem.local(e, z));
    if (!v.ok) {
      std::ostringstream os;
      os << "objective or constraints not finite at the initial guess (element " << k << ")";
      throw SolverError(os.str(), static_cast<int>(k));
    }
  }

  const AugmentedLagrangian al(problem);
  Vector lambda = options.least_squares_multipliers && problem.num_constraints > 0
                     ? least_squares_multipliers(problem, al, z)
                     : Vector::Zero(problem.num_constraints);
  double mu = options.initial_penalty;
  double omega = std::max(1.0 / mu, options.gradient_tolerance);
  double eta = std::max(1.0 / std::pow(mu, 0.1), options.constraint_tolerance);

  Vector best_z = z;
  double best_violation = kInf;
  Vector c;
  Vector grad;
  std::vector<Eigen::Triplet<double>> triplets;

  double previous_violation = problem.constraints(z).lpNorm<Eigen::Infinity>();
  for (int outer = 0; outer < options.max_outer; ++outer) {
    const Vector z_start = z;
    const InnerResult inner =
        minimize_bound_constrained(problem, al, z, lambda, mu, omega, options.max_inner,
                                   std::max(100.0 * previous_violation, 1.0), options.verbose);
    res.inner_iterations += inner.iterations;
    res.outer_iterations = outer + 1;
    res.merit_monotone = res.merit_monotone && inner.monotone;
    const double merit = al.value(z, lambda, mu, &c);
    const double viol = std::isfinite(merit) && c.size() ? c.lpNorm<Eigen::Infinity>() : 0.0;
    // The augmented Lagrangian can be unbounded below for small penalties
    // (e.g. costs growing exponentially in the state).  Retreat and tighten.
    if (inner.diverged || !std::isfinite(merit) || !std::isfinite(viol) ||
        viol > std::max(100.0 * previous_violation, 1.0)) {
      if (mu >= options.max_penalty) {
        throw SolverError("augmented Lagrangian diverged at the maximal penalty");
      }
      if (options.verbose) std::fprintf(stderr, "outer %2d  diverged, raising penalty\n", outer);
      z = z_start;
      mu = std::min(mu * options.penalty_growth, options.max_penalty);
      eta = std::max(1.0 / std::pow(mu, 0.1), options.constraint_tolerance);
      omega = std::max(1.0 / mu, options.gradient_tolerance);
      continue;
    }
    previous_violation = viol;
    if (viol <= best_violation) {
      best_violation = viol;
      best_z = z;
    }
    if (options.verbose) {
      std::fprintf(stderr, "outer %2d  mu=%.1e  |c|=%.3e  |pg|=%.3e  inner=%d\n", outer, mu, viol,
                   inner.projected_gradient, inner.iterations);
    }
    if (viol <= eta) {
      if (viol <= options.constraint_tolerance &&
          inner.projected_gradient <= options.gradient_tolerance) {
        res.status = Status::Converged;
        lambda += mu * c;
        best_z = z;
        break;
      }
      lambda += mu * c;
      eta = std::max(eta / std::pow(mu, 0.9), options.constraint_tolerance);
      omega = std::max(omega / mu, options.gradient_tolerance);
    } else {
      mu = std::min(mu * options.penalty_growth, options.max_penalty);
      eta = std::max(1.0 / std::pow(mu, 0.1), options.constraint_tolerance);
      omega = std::max(1.0 / mu, options.gradient_tolerance);
    }
    if (inner.stalled && viol <= options.constraint_tolerance) {
      res.status = Status::Stalled;
      best_z = z;
      break;
    }
  }

  res.z = best_z;
  res.multipliers = lambda;
  res.penalty = mu;
  res.objective = problem.objective(res.z);
  const Vector cf = problem.constraints(res.z);
  res.constraint_violation = cf.size() ? cf.lpNorm<Eigen::Infinity>() : 0.0;
  al.linearize(res.z, lambda, 0.0, grad, triplets);
  res.projected_gradient = projected_gradient_norm(problem, res.z, grad);
  return res;
}

}  // namespace riphs::nlp
