#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "choicectl/oracle.hpp"
#include "choicectl/sim.hpp"
#include "test_util.hpp"

using namespace choicectl;
using choicectl::testing::Rng;
using choicectl::testing::random_scenario;
using choicectl::testing::rel_diff;

namespace {

Scenario rendezvous() {
  Scenario sc;
  sc.system.a = Matrix::Zero(2, 2);
  sc.system.a(0, 1) = 1.0;
  Matrix b(2, 1), c(2, 1);
  b << 0, 1;
  c << 0, -1;
  sc.system.inputs = {b, c};
  sc.t0 = 0.0;
  sc.horizon_end = 1.0;
  sc.x0 = Vector(2);
  sc.x0 << 5, 0;
  std::vector<Vector> entries;
  for (double h : {10.0, 0.0, 0.0, -10.0}) {
    Vector v(2);
    v << h, 0;
    entries.push_back(v);
  }
  sc.targets = TargetTensor({2, 2}, entries);
  return sc;
}

class ZeroController : public Controller {
 public:
  explicit ZeroController(const LinearSystem& sys) {
    for (int l = 0; l < sys.agent_count(); ++l)
      zeros_.push_back(Vector::Zero(sys.input_dim(l)));
  }
  std::vector<Vector> controls(double, const Vector&) override {
    return zeros_;
  }

 private:
  std::vector<Vector> zeros_;
};

}  // namespace

TEST_CASE("zero dynamics and zero control hold the state") {
  Scenario sc;
  sc.system.a = Matrix::Zero(3, 3);
  sc.system.inputs = {Matrix::Identity(3, 3)};
  sc.t0 = 0.0;
  sc.horizon_end = 2.0;
  sc.x0 = Vector(3);
  sc.x0 << 1, -2, 0.5;
  sc.targets = TargetTensor({1}, {sc.x0});
  ZeroController zero(sc.system);
  const Trajectory traj = simulate(sc, zero, {0});
  for (const Vector& x : traj.states)
    CHECK((x - sc.x0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(traj.terminal_error.cwiseAbs().maxCoeff() == 0.0);
  CHECK(traj.measured_cost_contribution == 0.0);
}

TEST_CASE("rendezvous tuple (1,1) integrates to its target") {
  const Scenario sc = rendezvous();
  const auto law = std::make_shared<const OpenLoopLaw>(synthesize(sc));
  OpenLoopController controller(law, {0, 0});
  const Trajectory traj = simulate(sc, controller, {0, 0});
  const Vector closed = open_loop_terminal_closed_form(sc, *law, {0, 0});
  CHECK((traj.states.back() - closed).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(traj.states.back()(0) - 10.0) < 1e-6);
  CHECK(std::abs(traj.states.back()(1)) < 1e-6);
}

TEST_CASE("identical seeds give bit-identical noisy trajectories") {
  Scenario sc = rendezvous();
  sc.noise = NoiseConfig{0.5, 0.01, 42, {1}};
  const auto law = std::make_shared<const OpenLoopLaw>(synthesize(sc));
  OpenLoopController c1(law, {0, 1});
  OpenLoopController c2(law, {0, 1});
  const Trajectory a = simulate(sc, c1, {0, 1});
  const Trajectory b = simulate(sc, c2, {0, 1});
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t k = 0; k < a.states.size(); ++k)
    CHECK((a.states[k] - b.states[k]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("noise sampling is deterministic, held, and sized correctly") {
  NoiseConfig cfg{0.0, 0.1, 7, {}};
  NoiseProcess silent(cfg, 3, 0.0);
  CHECK(silent.sample(0.55).cwiseAbs().maxCoeff() == 0.0);

  cfg.sigma = 0.5;
  NoiseProcess noisy(cfg, 3, 0.0);
  CHECK((noisy.sample(0.33) - noisy.sample(0.39)).cwiseAbs().maxCoeff() ==
        0.0);  // same hold interval
  CHECK((noisy.sample(0.33) - noisy.sample(0.43)).cwiseAbs().maxCoeff() >
        0.0);  // next interval resamples
  NoiseProcess again(cfg, 3, 0.0);
  CHECK((noisy.sample(0.77) - again.sample(0.77)).cwiseAbs().maxCoeff() ==
        0.0);

  double acc = 0.0, acc_sq = 0.0;
  const int count = 100000;
  for (int k = 0; k < count; ++k) {
    const double v = noisy.sample(0.1 * k + 0.05)(1);
    acc += v;
    acc_sq += v * v;
  }
  const double mean = acc / count;
  const double variance = acc_sq / count - mean * mean;
  CHECK(std::abs(variance - 0.25) < 0.05 * 0.25);

  NoiseConfig masked{0.5, 0.1, 7, {2}};
  NoiseProcess channel(masked, 3, 0.0);
  CHECK(channel.sample(0.5)(0) == 0.0);
  CHECK(channel.sample(0.5)(1) == 0.0);
  CHECK(channel.sample(0.5)(2) != 0.0);
}

TEST_CASE("tuple sub-seeds keep tuple zero and distinguish the rest") {
  NoiseConfig base{0.5, 0.01, 1234, {}};
  CHECK(tuple_noise(base, 0).seed == base.seed);
  CHECK(tuple_noise(base, 1).seed != base.seed);
  CHECK(tuple_noise(base, 2).seed != tuple_noise(base, 1).seed);
}

TEST_CASE("integrator converges at fourth order against the closed form") {
  Rng rng(411);
  Scenario sc = random_scenario(rng, 3, 1, 1, 1e6);
  const auto law = std::make_shared<const OpenLoopLaw>(synthesize(sc));
  const Vector closed = open_loop_terminal_closed_form(sc, *law, {0});
  auto terminal_error = [&](int steps) {
    OpenLoopController controller(law, {0});
    SimOptions opts;
    opts.steps = steps;
    const Trajectory traj = simulate(sc, controller, {0}, opts);
    return (traj.states.back() - closed).norm();
  };
  const double coarse = terminal_error(40);
  const double fine = terminal_error(80);
  CHECK(coarse / fine > 11.0);
  CHECK(coarse / fine < 24.0);
}

TEST_CASE("ensemble of the zero-target scenario is silent") {
  Scenario sc = rendezvous();
  sc.x0 = Vector::Zero(2);
  std::vector<Vector> entries(4, Vector::Zero(2));
  sc.targets = TargetTensor({2, 2}, entries);
  const auto law = std::make_shared<const OpenLoopLaw>(synthesize(sc));
  const EnsembleReport report = run_ensemble(sc, open_loop_family(law));
  CHECK(report.average_cost == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(report.max_terminal_error < 1e-12);
}

TEST_CASE("ensemble cost matches the quadratic form of the law") {
  Scenario sc;
  sc.system.a = Matrix::Zero(1, 1);
  sc.system.inputs = {Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  sc.t0 = 0.0;
  sc.horizon_end = 1.0;
  sc.x0 = Vector::Zero(1);
  std::vector<Vector> entries;
  for (double h : {1.0, 0.0, 0.0, -1.0})
    entries.push_back(Vector::Constant(1, h));
  sc.targets = TargetTensor({2, 2}, entries);
  const auto law = std::make_shared<const OpenLoopLaw>(synthesize(sc));
  const EnsembleReport report = run_ensemble(sc, open_loop_family(law));
  CHECK(report.average_cost == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(rel_diff(report.average_cost, average_cost(*law)) < 1e-6);
}

TEST_CASE("rendezvous ensemble hits all four targets") {
  const Scenario sc = rendezvous();
  const auto law = std::make_shared<const OpenLoopLaw>(synthesize(sc));
  const EnsembleReport report = run_ensemble(sc, open_loop_family(law));
  CHECK(report.max_terminal_error < 1e-6);
  const double expected[4] = {10.0, 0.0, 0.0, -10.0};
  for (int k = 0; k < 4; ++k) {
    const Vector final_state =
        sc.targets.flat(k) + report.tuples[k].terminal_error;
    CHECK(final_state(0) == doctest::Approx(expected[k]).epsilon(1e-6));
  }
  CHECK(rel_diff(report.average_cost, average_cost(*law)) < 1e-6);
}

TEST_CASE("ensembles are reproducible and thread-count independent") {
  Scenario sc = rendezvous();
  sc.noise = NoiseConfig{0.5, 0.01, 99, {1}};
  sc.switch_time = 0.6;
  const auto law = std::make_shared<const OpenLoopLaw>(synthesize(sc));
  SimOptions serial;
  SimOptions parallel;
  parallel.threads = 4;
  const EnsembleReport a = run_ensemble(sc, open_loop_family(law), serial);
  const EnsembleReport b = run_ensemble(sc, open_loop_family(law), parallel);
  REQUIRE(a.tuples.size() == b.tuples.size());
  for (std::size_t k = 0; k < a.tuples.size(); ++k) {
    CHECK((a.tuples[k].terminal_error - b.tuples[k].terminal_error)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(a.tuples[k].cost_contribution == b.tuples[k].cost_contribution);
  }
}

TEST_CASE("the grid honors switch times and midpoint stages") {
  Scenario sc = rendezvous();
  sc.switch_time = 0.6;
  SimOptions opts;
  opts.steps = 10;
  const auto grid = simulation_grid(sc, opts);
  CHECK(std::find(grid.begin(), grid.end(), 0.6) != grid.end());
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 1.0);
  const auto stages = stage_times(grid);
  CHECK(stages.size() == 2 * grid.size() - 1);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k)
    CHECK(stages[2 * k + 1] == 0.5 * (grid[k] + grid[k + 1]));
}

TEST_CASE("state blow-up raises a numeric error naming the first bad step") {
  Scenario sc;
  sc.system.a = Matrix::Constant(1, 1, 2000.0);  // RK4-unstable at h = 1/100
  sc.system.inputs = {Matrix::Ones(1, 1)};
  sc.t0 = 0.0;
  sc.horizon_end = 1.0;
  sc.x0 = Vector::Ones(1);
  sc.targets = TargetTensor({1}, {Vector::Zero(1)});
  ZeroController zero(sc.system);
  SimOptions opts;
  opts.steps = 100;
  CHECK_THROWS_AS(simulate(sc, zero, {0}, opts), NumericError);
}

TEST_CASE("simulated terminal matches the variation-of-constants formula") {
  Rng rng(431);
  for (int trial = 0; trial < 5; ++trial) {
    const Scenario sc = random_scenario(rng, 3, 2, 2, 1e6);
    const auto law = std::make_shared<const OpenLoopLaw>(synthesize(sc));
    const std::vector<int> choices = sc.targets.tuple_of(0);
    OpenLoopController controller(law, choices);
    const Trajectory traj = simulate(sc, controller, choices);
    const Vector closed = open_loop_terminal_closed_form(sc, *law, choices);
    CHECK((traj.states.back() - closed).cwiseAbs().maxCoeff() <
          1e-8 * (1.0 + closed.cwiseAbs().maxCoeff()));
  }
}
