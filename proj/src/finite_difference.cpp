#include "riphs/finite_difference.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace riphs::fd {

namespace {

std::optional<Vector> try_vec(const VectorFn& fn, const Vector& z) {
  try {
    Vector v = fn(z);
    if (v.allFinite()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

double try_scalar(const ScalarFn& fn, const Vector& z) {
  try {
    return fn(z);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

Matrix jacobian(const VectorFn& fn, const Vector& z, const Vector& f0, double rel_step) {
  const auto d = z.size();
  Matrix jac(f0.size(), d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = rel_step * (1.0 + std::abs(z[j]));
    Vector zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    const auto p = try_vec(fn, zp);
    const auto m = try_vec(fn, zm);
    if (p && m) {
      jac.col(j) = (*p - *m) / (2 * h);
    } else if (p) {
      jac.col(j) = (*p - f0) / h;
    } else if (m) {
      jac.col(j) = (f0 - *m) / h;
    } else {
      throw std::runtime_error("finite-difference probe left the domain on both sides");
    }
  }
  return jac;
}

Matrix hessian(const ScalarFn& fn, const Vector& z, double f0, double rel_step) {
  const auto d = z.size();
  Vector h(d);
  for (Eigen::Index j = 0; j < d; ++j) h[j] = rel_step * (1.0 + std::abs(z[j]));
  Matrix hess = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector zp = z, zm = z;
    zp[i] += h[i];
    zm[i] -= h[i];
    const double v = (try_scalar(fn, zp) - 2 * f0 + try_scalar(fn, zm)) / (h[i] * h[i]);
    hess(i, i) = std::isfinite(v) ? v : 0.0;
    for (Eigen::Index j = i + 1; j < d; ++j) {
      Vector a = z, b = z, c = z, e = z;
      a[i] += h[i]; a[j] += h[j];
      b[i] += h[i]; b[j] -= h[j];
      c[i] -= h[i]; c[j] += h[j];
      e[i] -= h[i]; e[j] -= h[j];
      const double w = (try_scalar(fn, a) - try_scalar(fn, b) - try_scalar(fn, c) +
                        try_scalar(fn, e)) / (4 * h[i] * h[j]);
      hess(i, j) = hess(j, i) = std::isfinite(w) ? w : 0.0;
    }
  }
  return hess;
}

}  // namespace riphs::fd
