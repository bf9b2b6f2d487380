#pragma once

#include <Eigen/Dense>
#include <vector>

#include "choicectl/errors.hpp"

namespace choicectl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Controllability Gramian of a pair (A, B) over a time interval,
/// W = integral of e^{-At} B B^T e^{-A^T t} dt.
struct Gramian {
  Matrix value;
  double t_start = 0.0;
  double t_end = 0.0;
  // Eigenvalue ratio lambda_max / lambda_min; +inf when numerically singular.
  double condition_estimate = 0.0;
};

struct ControllabilityReport {
  bool controllable = false;
  double condition_estimate = 0.0;
};

/// e^{Mt} by scaling-and-squaring with the degree-13 Pade approximant.
Matrix mat_exp(const Matrix& m, double t = 1.0);

/// Composite Gauss-Legendre evaluation of the Gramian integral, doubling the
/// node count from 32 until successive values agree to 1e-12 relative
/// Frobenius (cap 512 nodes).
Gramian gramian(const Matrix& a, const Matrix& b, double t_start, double t_end);

/// Solves M X = rhs with a rank-revealing factorization and iterative
/// refinement; guarantees ||M X - rhs||_inf <= 1e-10 ||rhs||_inf or throws
/// SingularityError carrying the condition estimate.
Matrix solve_linear(const Matrix& m, const Matrix& rhs);

/// Same factorization, but accepts any backward-stable result (residual
/// scaled by ||M|| ||X|| instead of ||rhs||). For the structured
/// remaining-horizon systems whose solutions legitimately dwarf the right
/// hand side near the horizon end.
Matrix solve_linear_relaxed(const Matrix& m, const Matrix& rhs);

/// Assumption-style controllability test: the Gramian over [t_start, t_end]
/// must have min eigenvalue > tol * max eigenvalue.
ControllabilityReport check_controllable(const Matrix& a, const Matrix& b,
                                         double t_start, double t_end,
                                         double tol = 1e-10);

/// Gauss-Legendre rule on [-1, 1]. Cached per order.
struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const QuadRule& gauss_legendre_rule(int order);

}  // namespace choicectl
