#include "choicectl/numerics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace choicectl {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

double rel_frobenius_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return (a - b).norm();
  return (a - b).norm() / scale;
}

double svd_condition(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

}  // namespace

Matrix mat_exp(const Matrix& m, double t) {
  if (m.rows() != m.cols())
    throw DimensionError("mat_exp: matrix must be square");
  if (!all_finite(m) || !std::isfinite(t))
    throw NumericError("mat_exp: non-finite input");

  const Eigen::Index n = m.rows();
  const Matrix scaled_arg = m * t;

  // Degree-13 Pade coefficients, p(x)/p(-x) form.
  static const double b[14] = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  const double theta13 = 5.371920351148152;

  const double norm1 = scaled_arg.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13)
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));

  const Matrix a = scaled_arg / std::ldexp(1.0, squarings);
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a2 * a4;

  const Matrix u =
      a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
           b[5] * a4 + b[3] * a2 + b[1] * ident);
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
                   b[4] * a4 + b[2] * a2 + b[0] * ident;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;

  if (!all_finite(r)) throw NumericError("mat_exp: overflow to non-finite");
  return r;
}

const QuadRule& gauss_legendre_rule(int order) {
  static std::map<int, QuadRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);

  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  // Newton iteration on P_n, nodes seeded by the Chebyshev approximation.
  QuadRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  auto [pos, inserted] = cache.emplace(order, std::move(rule));
  return pos->second;
}

namespace {

// One pass of the composite rule with `panels` 16-node panels.
Matrix gramian_pass(const Matrix& a, const Matrix& b, double t_start,
                    double t_end, int panels) {
  const QuadRule& rule = gauss_legendre_rule(16);
  const Eigen::Index n = a.rows();
  Matrix w = Matrix::Zero(n, n);
  const double width = (t_end - t_start) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = t_start + p * width;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double tau = lo + 0.5 * width * (rule.nodes[q] + 1.0);
      const Matrix x = mat_exp(a, -tau) * b;
      w.noalias() += (0.5 * width * rule.weights[q]) * (x * x.transpose());
    }
  }
  return w;
}

}  // namespace

Gramian gramian(const Matrix& a, const Matrix& b, double t_start,
                double t_end) {
  if (a.rows() != a.cols()) throw DimensionError("gramian: A must be square");
  if (b.rows() != a.rows())
    throw DimensionError("gramian: B row count must match A");
  if (!(t_start < t_end))
    throw DomainError("gramian: degenerate interval, need t_start < t_end");

  Matrix w = gramian_pass(a, b, t_start, t_end, 2);  // 32 nodes
  bool converged = false;
  for (int panels = 4; panels <= 32; panels *= 2) {  // up to 512 nodes
    Matrix refined = gramian_pass(a, b, t_start, t_end, panels);
    const double diff = rel_frobenius_diff(refined, w);
    w = std::move(refined);
    if (diff < 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NumericError("gramian: quadrature did not converge at 512 nodes");

  Gramian g;
  g.value = 0.5 * (w + w.transpose());
  g.t_start = t_start;
  g.t_end = t_end;

  Eigen::SelfAdjointEigenSolver<Matrix> es(g.value, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  g.condition_estimate = (lmin > 0.0 && lmax > 0.0)
                             ? lmax / lmin
                             : std::numeric_limits<double>::infinity();
  return g;
}

namespace {

Matrix solve_with_tolerance(const Matrix& m, const Matrix& rhs,
                            bool backward_stable_ok) {
  if (m.rows() != m.cols())
    throw DimensionError("solve_linear: matrix must be square");
  if (rhs.rows() != m.rows())
    throw DimensionError("solve_linear: rhs row count must match matrix size");

  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  if (!qr.isInvertible())
    throw SingularityError("solve_linear: matrix singular to tolerance",
                           svd_condition(m));

  Matrix x = qr.solve(rhs);
  const double rhs_scale = rhs.size() == 0 ? 0.0 : rhs.cwiseAbs().maxCoeff();
  const double m_scale = m.cwiseAbs().maxCoeff();
  // Residuals in extended precision make the refinement converge to a
  // forward-accurate solution whenever cond * eps < 1.
  using LongMatrix =
      Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LongMatrix m_long = m.cast<long double>();
  const LongMatrix rhs_long = rhs.cast<long double>();
  auto residual_of = [&](const Matrix& sol) {
    return Matrix((m_long * sol.cast<long double>() - rhs_long).cast<double>());
  };
  auto tolerance = [&](const Matrix& sol) {
    double tol = 1e-10 * rhs_scale;
    if (backward_stable_ok) {
      const double x_scale = sol.size() == 0 ? 0.0 : sol.cwiseAbs().maxCoeff();
      tol = std::max(tol, 64.0 * m.rows() *
                              std::numeric_limits<double>::epsilon() *
                              m_scale * x_scale);
    }
    return tol;
  };
  for (int refine = 0; refine < 4; ++refine) {
    const Matrix residual = residual_of(x);
    const double r = residual.size() == 0 ? 0.0 : residual.cwiseAbs().maxCoeff();
    if (r <= tolerance(x) || rhs_scale == 0.0) return x;
    x -= qr.solve(residual);
  }
  if (residual_of(x).cwiseAbs().maxCoeff() <= tolerance(x)) return x;
  throw SingularityError(
      "solve_linear: residual tolerance unreachable, matrix ill-conditioned",
      svd_condition(m));
}

}  // namespace

Matrix solve_linear(const Matrix& m, const Matrix& rhs) {
  return solve_with_tolerance(m, rhs, false);
}

Matrix solve_linear_relaxed(const Matrix& m, const Matrix& rhs) {
  return solve_with_tolerance(m, rhs, true);
}

ControllabilityReport check_controllable(const Matrix& a, const Matrix& b,
                                         double t_start, double t_end,
                                         double tol) {
  const Gramian g = gramian(a, b, t_start, t_end);
  Eigen::SelfAdjointEigenSolver<Matrix> es(g.value, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  ControllabilityReport report;
  report.condition_estimate = g.condition_estimate;
  report.controllable = lmax > 0.0 && lmin > tol * lmax;
  return report;
}

}  // namespace choicectl
