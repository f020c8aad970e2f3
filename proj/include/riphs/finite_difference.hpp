#pragma once

// Central finite differences that fall back to one-sided stencils when a
// probe leaves the domain (signalled by an exception or a non-finite value).

#include <functional>

#include <Eigen/Dense>

namespace riphs::fd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using ScalarFn = std::function<double(const Vector&)>;
using VectorFn = std::function<Vector(const Vector&)>;

/// Jacobian of fn at z; columns use step rel_step * (1 + |z_j|).
/// `f0` must be fn(z).  Throws std::runtime_error if both sides fail.
Matrix jacobian(const VectorFn& fn, const Vector& z, const Vector& f0, double rel_step = 1e-6);

/// Hessian of a scalar function by second-order central differences with
/// step rel_step * (1 + |z_j|).  `f0` must be fn(z).  Entries whose stencil
/// leaves the domain are set to zero.
Matrix hessian(const ScalarFn& fn, const Vector& z, double f0, double rel_step = 1e-4);

}  // namespace riphs::fd
