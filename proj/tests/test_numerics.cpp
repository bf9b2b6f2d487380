#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "choicectl/numerics.hpp"
#include "test_util.hpp"

using namespace choicectl;
using choicectl::testing::Rng;
using choicectl::testing::rel_diff;

TEST_CASE("mat_exp on the zero generator is the identity") {
  const Matrix z = Matrix::Zero(2, 2);
  CHECK(rel_diff(mat_exp(z, 3.7), Matrix::Identity(2, 2)) < 1e-15);
}

TEST_CASE("mat_exp truncates for nilpotent input") {
  Matrix m(2, 2);
  m << 0, 1, 0, 0;
  for (double t : {0.25, 1.0, -2.0, 10.0}) {
    Matrix expected(2, 2);
    expected << 1, t, 0, 1;
    CHECK(rel_diff(mat_exp(m, t), expected) < 1e-15);
  }
}

TEST_CASE("mat_exp matches the scalar exponential") {
  for (double a : {-3.0, -0.5, 0.0, 1.0, 4.0})
    for (double t : {0.1, 1.0, 2.5}) {
      Matrix m(1, 1);
      m << a;
      CHECK(mat_exp(m, t)(0, 0) == doctest::Approx(std::exp(a * t)).epsilon(1e-14));
    }
}

TEST_CASE("mat_exp rejects non-square input") {
  CHECK_THROWS_AS(mat_exp(Matrix::Zero(2, 3), 1.0), DimensionError);
}

TEST_CASE("mat_exp semigroup and inverse properties") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix m = rng.matrix(4, 4, 0.5);  // norm <= 2
    const double s = rng.uniform(-1.5, 1.5);
    const double t = rng.uniform(-1.5, 1.5);
    CHECK(rel_diff(mat_exp(m, s) * mat_exp(m, t), mat_exp(m, s + t)) < 1e-10);
    CHECK((mat_exp(m, t) * mat_exp(m, -t) - Matrix::Identity(4, 4)).norm() <
          1e-10);
  }
}

TEST_CASE("gramian with constant integrand") {
  Matrix a(1, 1), b(1, 1);
  a << 0;
  b << 1;
  const Gramian g = gramian(a, b, 0.0, 2.5);
  CHECK(g.value(0, 0) == doctest::Approx(2.5).epsilon(1e-13));
  CHECK(g.condition_estimate == doctest::Approx(1.0));
}

TEST_CASE("gramian matches the scalar closed form g = int e^{-2at} dt") {
  for (double aa : {-1.0, 0.3, 2.0}) {
    Matrix a(1, 1), b(1, 1);
    a << aa;
    b << 1;
    const double horizon = 1.3;
    const double expected = (1.0 - std::exp(-2.0 * aa * horizon)) / (2.0 * aa);
    CHECK(gramian(a, b, 0.0, horizon).value(0, 0) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gramian matches the double-integrator symbolic form") {
  Matrix a(2, 2), b(2, 1);
  a << 0, 1, 0, 0;
  b << 0, 1;
  for (double horizon : {0.5, 1.0, 2.0}) {
    Matrix expected(2, 2);
    expected << horizon * horizon * horizon / 3.0, -horizon * horizon / 2.0,
        -horizon * horizon / 2.0, horizon;
    CHECK(rel_diff(gramian(a, b, 0.0, horizon).value, expected) < 1e-12);

    // Independent cross-check: composite Simpson on the analytic integrand
    // e^{-At} B = [-t, 1]^T.
    const int panels = 4000;
    Matrix simpson = Matrix::Zero(2, 2);
    const double h = horizon / panels;
    auto integrand = [](double t) {
      Matrix m(2, 2);
      m << t * t, -t, -t, 1.0;
      return m;
    };
    for (int k = 0; k < panels; ++k) {
      const double lo = k * h;
      simpson += (h / 6.0) * (integrand(lo) + 4.0 * integrand(lo + h / 2) +
                              integrand(lo + h));
    }
    CHECK(rel_diff(gramian(a, b, 0.0, horizon).value, simpson) < 1e-11);
  }
}

TEST_CASE("gramian rejects degenerate intervals") {
  Matrix a(1, 1), b(1, 1);
  a << 0;
  b << 1;
  CHECK_THROWS_AS(gramian(a, b, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(gramian(a, b, 2.0, 1.0), DomainError);
}

TEST_CASE("gramian outputs are symmetric positive semidefinite") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(1, 5);
    const Matrix a = rng.matrix(n, n, 1.0);
    const Matrix b = rng.matrix(n, rng.uniform_int(1, 3), 1.0);
    const Gramian g = gramian(a, b, 0.0, rng.uniform(0.4, 1.6));
    CHECK(rel_diff(g.value, g.value.transpose()) < 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(g.value, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >=
          -1e-12 * std::max(es.eigenvalues().maxCoeff(), 0.0));
  }
}

TEST_CASE("gramian is additive over subintervals") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = rng.uniform_int(1, 4);
    const Matrix a = rng.matrix(n, n, 1.0);
    const Matrix b = rng.matrix(n, 1, 1.0);
    const double t0 = rng.uniform(0.0, 0.2);
    const double t2 = t0 + rng.uniform(0.8, 1.4);
    const double t1 = t0 + 0.37 * (t2 - t0);
    const Matrix whole = gramian(a, b, t0, t2).value;
    const Matrix split =
        gramian(a, b, t0, t1).value + gramian(a, b, t1, t2).value;
    CHECK(rel_diff(whole, split) < 1e-10);
  }
}

TEST_CASE("solve_linear identity and scaling shortcuts") {
  Rng rng(17);
  const Vector v = rng.vector(4, 3.0);
  CHECK((solve_linear(Matrix::Identity(4, 4), v) - v).norm() == 0.0);
  CHECK((solve_linear(2.0 * Matrix::Identity(4, 4), v) - 0.5 * v).norm() <
        1e-15);
}

TEST_CASE("solve_linear meets the residual contract on the Hilbert matrix") {
  Matrix hilbert(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) hilbert(r, c) = 1.0 / (r + c + 1);
  Vector e1 = Vector::Zero(3);
  e1(0) = 1.0;
  const Vector x = solve_linear(hilbert, e1);
  CHECK((hilbert * x - e1).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("solve_linear reports singular matrices with a condition estimate") {
  Matrix m(2, 2);
  m << 1, 2, 2, 4;
  const Vector v = Vector::Ones(2);
  CHECK_THROWS_AS(solve_linear(m, v), SingularityError);
  try {
    solve_linear(m, v);
  } catch (const SingularityError& err) {
    CHECK(err.condition_estimate() > 1e12);
  }
  CHECK_THROWS_AS(solve_linear(Matrix::Zero(2, 3), v), DimensionError);
  CHECK_THROWS_AS(solve_linear(Matrix::Identity(3, 3), v), DimensionError);
}

TEST_CASE("check_controllable accepts the double integrator for either sign") {
  Matrix a(2, 2), b(2, 1);
  a << 0, 1, 0, 0;
  b << 0, 1;
  CHECK(check_controllable(a, b, 0.0, 1.0).controllable);
  b << 0, -1;
  CHECK(check_controllable(a, b, 0.0, 1.0).controllable);
}

TEST_CASE("check_controllable rejects an unreachable state") {
  const Matrix a = Matrix::Zero(2, 2);
  Matrix b(2, 1);
  b << 1, 0;
  const auto report = check_controllable(a, b, 0.0, 1.0);
  CHECK_FALSE(report.controllable);
  CHECK(std::isinf(report.condition_estimate));
}

TEST_CASE("check_controllable accepts any scalar pair with nonzero gain") {
  Matrix a(1, 1), b(1, 1);
  a << -0.7;
  b << 0.3;
  CHECK(check_controllable(a, b, 0.0, 1.0).controllable);
}

TEST_CASE("gauss_legendre_rule integrates polynomials exactly") {
  const QuadRule& rule = gauss_legendre_rule(8);
  double moment = 0.0;  // int_-1^1 x^14 dx = 2/15
  for (std::size_t k = 0; k < rule.nodes.size(); ++k)
    moment += rule.weights[k] * std::pow(rule.nodes[k], 14);
  CHECK(moment == doctest::Approx(2.0 / 15.0).epsilon(1e-13));
}
