#include "riphs/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace riphs {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

// Relative skew defect |A + A^T| / |A|, zero for the zero matrix.
double skew_defect(const Matrix& a) {
  const double scale = a.norm();
  if (scale == 0.0) return 0.0;
  return (a + a.transpose()).norm() / scale;
}

}  // namespace

StateDomain StateDomain::unbounded(int n) {
  StateDomain d;
  d.lower = Vector::Constant(n, -std::numeric_limits<double>::infinity());
  d.upper = Vector::Constant(n, std::numeric_limits<double>::infinity());
  return d;
}

bool StateDomain::contains(const Vector& x) const {
  if (!x.allFinite()) return false;
  const Vector y = coordinate_map ? Vector(*coordinate_map * x) : x;
  if (y.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y[i] > lower[i] + margin && y[i] < upper[i] - margin)) return false;
  }
  return true;
}

std::optional<std::pair<Vector, Vector>> StateDomain::box() const {
  if (coordinate_map && !coordinate_map->isIdentity(0.0)) {
    // A transformed box is a box only when the map is diagonal and positive.
    const Matrix& m = *coordinate_map;
    if (!m.isDiagonal(0.0) || (m.diagonal().array() <= 0.0).any()) return std::nullopt;
    Vector lo = lower, hi = upper;
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      lo[i] = (lower[i] + 2 * margin) / m(i, i);
      hi[i] = (upper[i] - 2 * margin) / m(i, i);
    }
    return std::make_pair(lo, hi);
  }
  Vector lo = lower.array() + 2 * margin;
  Vector hi = upper.array() - 2 * margin;
  return std::make_pair(lo, hi);
}

AffineSubspace::AffineSubspace(Vector off, const Matrix& spanning_vectors)
    : offset(std::move(off)) {
  if (spanning_vectors.rows() != offset.size()) {
    throw ModelError("AffineSubspace: basis rows do not match offset size");
  }
  if (spanning_vectors.cols() == 0) {
    basis = Matrix(offset.size(), 0);
    return;
  }
  Eigen::JacobiSVD<Matrix> svd(spanning_vectors, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double tol = 1e-10 * s[0];
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s[i] > tol ? 1 : 0;
  basis = svd.matrixU().leftCols(r);
  // Minimal-norm offset, so equal sets compare equal.
  offset = offset - basis * (basis.transpose() * offset);
}

Vector AffineSubspace::project(const Vector& x) const {
  if (basis.cols() == 0) return offset;
  return offset + basis * (basis.transpose() * (x - offset));
}

double AffineSubspace::distance(const Vector& x) const { return (x - project(x)).norm(); }

double Evaluation::entropy_production() const {
  return (gammas.array() * brackets.array().square()).sum();
}

RIPHSModel::RIPHSModel(ModelDefinition def) : def_(std::move(def)) {
  const int n = def_.state_dim;
  if (n <= 0) throw ModelError("state_dim must be positive");
  if (def_.input_dim <= 0) throw ModelError("input_dim must be positive");
  if (!def_.hamiltonian || !def_.hamiltonian_gradient) {
    throw ModelError("hamiltonian and its gradient are required");
  }
  if (def_.entropy_vector.size() != n) throw ModelError("entropy vector has wrong size");
  if (def_.irr_structures.size() != def_.modulations.size()) {
    throw ModelError("one modulation function is required per irreversible structure");
  }
  for (std::size_t k = 0; k < def_.irr_structures.size(); ++k) {
    const Matrix& jk = def_.irr_structures[k];
    if (jk.rows() != n || jk.cols() != n) throw ModelError("J_k has wrong shape");
    if (skew_defect(jk) > kSkewTolerance) {
      std::ostringstream os;
      os << "J_" << (k + 1) << " is not skew-symmetric";
      throw ModelError(os.str());
    }
    if (!def_.modulations[k]) throw ModelError("empty modulation function");
  }
  if (def_.domain.lower.size() == 0) def_.domain = StateDomain::unbounded(n);
  if (def_.domain.lower.size() != def_.domain.upper.size()) {
    throw ModelError("domain bounds have mismatched sizes");
  }
  if (def_.equilibria && def_.equilibria->ambient_dim() != n) {
    throw ModelError("equilibrium subspace has wrong ambient dimension");
  }
  if (def_.state_names.empty()) {
    for (int i = 0; i < n; ++i) def_.state_names.push_back("x" + std::to_string(i + 1));
  }
  if (def_.co_energy_names.empty()) {
    for (int i = 0; i < n; ++i) def_.co_energy_names.push_back("dH" + std::to_string(i + 1));
  }
}

const Matrix& RIPHSModel::irr_structure(int k) const {
  if (k < 0 || k >= num_irreversible()) throw ModelError("structure index out of range");
  return def_.irr_structures[static_cast<std::size_t>(k)];
}

void RIPHSModel::require_in_domain(const Vector& x) const {
  if (x.size() != state_dim()) throw ModelError("state has wrong dimension");
  if (!def_.domain.contains(x)) {
    std::ostringstream os;
    os << def_.name << ": state outside domain: " << x.transpose();
    throw DomainError(os.str());
  }
}

double RIPHSModel::hamiltonian(const Vector& x) const {
  require_in_domain(x);
  return def_.hamiltonian(x);
}

Vector RIPHSModel::co_energy(const Vector& x) const {
  require_in_domain(x);
  return def_.hamiltonian_gradient(x);
}

Matrix RIPHSModel::poisson_structure(const Vector& x) const {
  const int n = state_dim();
  if (!def_.poisson_structure) return Matrix::Zero(n, n);
  return def_.poisson_structure(x);
}

Matrix RIPHSModel::hamiltonian_hessian(const Vector& x) const {
  require_in_domain(x);
  if (def_.hamiltonian_hessian) return def_.hamiltonian_hessian(x);
  const int n = state_dim();
  const double h = std::max(1e-6, 1e-8 * x.norm());
  Matrix hess(n, n);
  for (int j = 0; j < n; ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    hess.col(j) = (def_.hamiltonian_gradient(xp) - def_.hamiltonian_gradient(xm)) / (2 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

Evaluation RIPHSModel::evaluate(const Vector& x) const {
  require_in_domain(x);
  const int n = state_dim();
  const int big_n = num_irreversible();
  Evaluation ev;
  ev.co_energy = def_.hamiltonian_gradient(x);
  if (ev.co_energy.size() != n || !ev.co_energy.allFinite()) {
    throw ModelError(def_.name + ": non-finite or misshaped co-energy");
  }
  ev.poisson = poisson_structure(x);
  if (def_.poisson_structure) {
    if (ev.poisson.rows() != n || ev.poisson.cols() != n || !all_finite(ev.poisson)) {
      throw ModelError(def_.name + ": invalid J0(x)");
    }
    const double scale = ev.poisson.norm();
    if (scale > 0.0) {
      if (skew_defect(ev.poisson) > kSkewTolerance) {
        throw ModelError(def_.name + ": J0(x) is not skew-symmetric");
      }
      const Vector& e = def_.entropy_vector;
      if ((ev.poisson * e).norm() > kSkewTolerance * scale * e.norm()) {
        throw ModelError(def_.name + ": entropy is not a Casimir of J0(x)");
      }
    }
  }
  ev.brackets.resize(big_n);
  ev.gammas.resize(big_n);
  for (int k = 0; k < big_n; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    ev.brackets[k] = def_.entropy_vector.dot(def_.irr_structures[uk] * ev.co_energy);
    const double gamma = def_.modulations[uk](x, ev.co_energy);
    if (!std::isfinite(gamma) || !(gamma > 0.0)) {
      std::ostringstream os;
      os << def_.name << ": gamma_" << (k + 1) << " = " << gamma << " is not positive";
      throw ModelError(os.str());
    }
    ev.gammas[k] = gamma;
  }
  if (def_.input_map) {
    ev.input = def_.input_map(x, ev.co_energy);
    if (ev.input.rows() != n || ev.input.cols() != input_dim() || !all_finite(ev.input)) {
      throw ModelError(def_.name + ": invalid input map g(x, H_x)");
    }
  } else {
    ev.input = Matrix::Zero(n, input_dim());
  }
  return ev;
}

double poisson_bracket(const RIPHSModel& model, int k, const Vector& x) {
  const Matrix& jk = model.irr_structure(k);
  const Vector hx = model.co_energy(x);
  return model.entropy_vector().dot(jk * hx);
}

Vector rhs(const RIPHSModel& model, const Evaluation& ev, const Vector& u) {
  if (u.size() != model.input_dim()) throw ModelError("control has wrong dimension");
  Matrix jt = ev.poisson;
  for (int k = 0; k < model.num_irreversible(); ++k) {
    jt += ev.gammas[k] * ev.brackets[k] * model.irr_structure(k);
  }
  Vector f = jt * ev.co_energy + ev.input * u;
  if (!f.allFinite()) throw ModelError(model.name() + ": non-finite right-hand side");
  return f;
}

Vector rhs(const RIPHSModel& model, const Vector& x, const Vector& u) {
  return rhs(model, model.evaluate(x), u);
}

Outputs outputs(const RIPHSModel& model, const Evaluation& ev) {
  return {ev.input.transpose() * ev.co_energy,
          ev.input.transpose() * model.entropy_vector()};
}

Outputs outputs(const RIPHSModel& model, const Vector& x) {
  return outputs(model, model.evaluate(x));
}

double entropy_production(const RIPHSModel& model, const Vector& x) {
  return model.evaluate(x).entropy_production();
}

bool StructureCheck::ok(double tol) const {
  return poisson_skew <= tol && irreversible_skew <= tol && casimir <= tol &&
         min_gamma > 0.0 && entropy_production >= 0.0;
}

StructureCheck check_structure(const RIPHSModel& model, const Vector& x) {
  model.require_in_domain(x);
  const int n = model.state_dim();
  StructureCheck out;
  const Matrix j0 = model.poisson_structure(x);
  const Vector& e = model.entropy_vector();

  // Quadratic forms v^T J v over the coordinate and pairwise directions.
  auto quad_defect = [n](const Matrix& j) {
    const double scale = j.norm();
    if (scale == 0.0) return 0.0;
    double worst = 0.0;
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) {
        Vector v = Vector::Zero(n);
        v[a] += 1.0;
        v[b] += (a == b) ? 0.0 : 0.5;
        worst = std::max(worst, std::abs(v.dot(j * v)) / (v.squaredNorm() * scale));
      }
    }
    return std::max(worst, skew_defect(j));
  };
  out.poisson_skew = quad_defect(j0);
  for (int k = 0; k < model.num_irreversible(); ++k) {
    out.irreversible_skew = std::max(out.irreversible_skew, quad_defect(model.irr_structure(k)));
  }
  const double j0n = j0.norm();
  out.casimir = j0n == 0.0 ? 0.0 : (j0 * e).norm() / (j0n * e.norm());

  const Vector hx = model.definition().hamiltonian_gradient(x);
  out.min_gamma = std::numeric_limits<double>::infinity();
  out.entropy_production = 0.0;
  for (int k = 0; k < model.num_irreversible(); ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const double gamma = model.definition().modulations[uk](x, hx);
    const double br = e.dot(model.irr_structure(k) * hx);
    out.min_gamma = std::min(out.min_gamma, gamma);
    out.entropy_production += gamma * br * br;
  }
  return out;
}

double condition_number(const Matrix& V) {
  Eigen::JacobiSVD<Matrix> svd(V);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[s.size() - 1] == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / s[s.size() - 1];
}

RIPHSModel transform_model(const RIPHSModel& model, const Matrix& V, double* cond_out) {
  const int n = model.state_dim();
  if (V.rows() != n || V.cols() != n) throw ModelError("transform has wrong shape");
  const double cond = condition_number(V);
  if (cond_out) *cond_out = cond;
  if (!(cond < 1e12)) throw ModelError("coordinate transform is singular");

  const Matrix v_inv = V.inverse();
  const Matrix v_inv_t = v_inv.transpose();
  const Matrix v_t = V.transpose();
  const ModelDefinition& src = model.definition();

  ModelDefinition def;
  def.name = src.name + "~";
  def.state_dim = n;
  def.input_dim = src.input_dim;
  auto h = src.hamiltonian;
  auto hx = src.hamiltonian_gradient;
  def.hamiltonian = [h, v_inv](const Vector& z) { return h(v_inv * z); };
  def.hamiltonian_gradient = [hx, v_inv, v_inv_t](const Vector& z) -> Vector {
    return v_inv_t * hx(v_inv * z);
  };
  if (src.hamiltonian_hessian) {
    auto hxx = src.hamiltonian_hessian;
    def.hamiltonian_hessian = [hxx, v_inv, v_inv_t](const Vector& z) -> Matrix {
      return v_inv_t * hxx(v_inv * z) * v_inv;
    };
  }
  if (src.poisson_structure) {
    auto j0 = src.poisson_structure;
    def.poisson_structure = [j0, V, v_t, v_inv](const Vector& z) -> Matrix {
      return V * j0(v_inv * z) * v_t;
    };
  }
  def.entropy_vector = v_inv_t * src.entropy_vector;
  for (const Matrix& jk : src.irr_structures) def.irr_structures.push_back(V * jk * v_t);
  for (const Modulation& gk : src.modulations) {
    def.modulations.push_back([gk, v_inv, v_t](const Vector& z, const Vector& hz) {
      return gk(v_inv * z, v_t * hz);
    });
  }
  if (src.input_map) {
    auto g = src.input_map;
    def.input_map = [g, V, v_t, v_inv](const Vector& z, const Vector& hz) -> Matrix {
      return V * g(v_inv * z, v_t * hz);
    };
  }
  def.domain = src.domain;
  def.domain.coordinate_map = src.domain.coordinate_map ? Matrix(*src.domain.coordinate_map * v_inv)
                                                        : v_inv;
  if (src.equilibria) {
    def.equilibria = AffineSubspace(V * src.equilibria->offset, V * src.equilibria->basis);
  }
  for (int i = 0; i < n; ++i) {
    def.state_names.push_back("z" + std::to_string(i + 1));
    def.co_energy_names.push_back("dHz" + std::to_string(i + 1));
  }
  return RIPHSModel(std::move(def));
}

}  // namespace riphs
