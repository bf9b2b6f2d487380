#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "choicectl/approach.hpp"
#include "choicectl/controller.hpp"
#include "choicectl/feedback.hpp"
#include "choicectl/gramian_table.hpp"
#include "choicectl/open_loop.hpp"

namespace choicectl {

struct SimOptions {
  int steps = 2000;
  // Optional uniform refinement of the final window [T - tail_width, T];
  // used for stiff penalized closed loops where one global step size would
  // either violate the explicit-integrator stability bound or waste millions
  // of steps. Both phases stay fixed-step and deterministic.
  double tail_width = 0.0;
  int tail_steps = 0;
  int threads = 1;
};

/// Piecewise-constant Gaussian disturbance: resampled every hold interval,
/// each sample a deterministic function of (seed, interval index, component).
class NoiseProcess {
 public:
  NoiseProcess(NoiseConfig config, int state_dim, double t0);
  Vector sample(double t) const;
  const NoiseConfig& config() const { return config_; }

 private:
  NoiseConfig config_;
  int state_dim_ = 0;
  double t0_ = 0.0;
  std::vector<int> active_channels_;
};

/// Sub-seed for one choice tuple so ensemble results do not depend on the
/// iteration order.
NoiseConfig tuple_noise(const NoiseConfig& base, std::size_t tuple_index);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<std::vector<Vector>> controls;  // [agent][sample]
  Vector terminal_error;
  double measured_cost_contribution = 0.0;  // sum over agents of int ||u||^2
};

struct TupleSummary {
  std::vector<int> choices;
  Vector terminal_error;
  double terminal_error_norm = 0.0;  // infinity norm
  double cost_contribution = 0.0;
  std::optional<std::uint64_t> seed_used;
};

struct EnsembleReport {
  std::vector<TupleSummary> tuples;  // row-major tuple order
  double average_cost = 0.0;
  double max_terminal_error = 0.0;
};

/// Accepted sample times: uniform, except that a scenario switch time and a
/// requested terminal refinement window become exact grid breakpoints.
std::vector<double> simulation_grid(const Scenario& scenario,
                                    const SimOptions& opts);
/// Grid plus step midpoints, i.e. every time at which the integrator
/// evaluates the controller.
std::vector<double> stage_times(const std::vector<double>& grid);

/// Classic fourth-order Runge-Kutta over the grid, controller evaluated at
/// stage times, optional held noise added to the state derivative.
Trajectory simulate(const Scenario& scenario, Controller& controller,
                    const std::vector<int>& choices,
                    const SimOptions& opts = {},
                    const std::optional<NoiseConfig>& noise_override = {});

using ControllerFactory =
    std::function<std::unique_ptr<Controller>(const std::vector<int>&)>;

/// Simulates every choice tuple exactly once; average_cost matches the
/// choice-averaged quadratic cost normalization.
EnsembleReport run_ensemble(const Scenario& scenario,
                            const ControllerFactory& factory,
                            const SimOptions& opts = {});

/// Variation-of-constants terminal state for a parametric open-loop law;
/// the integrator's independent cross-check.
Vector open_loop_terminal_closed_form(const Scenario& scenario,
                                      const OpenLoopLaw& law,
                                      const std::vector<int>& choices);

class OpenLoopController : public Controller {
 public:
  OpenLoopController(std::shared_ptr<const OpenLoopLaw> law,
                     std::vector<int> choices);
  std::vector<Vector> controls(double t, const Vector& x) override;

 private:
  std::shared_ptr<const OpenLoopLaw> law_;
  std::vector<int> choices_;
};

/// Pure Theorem-2 feedback; only usable on horizons that stop short of the
/// terminal singularity guard (the hybrid controller is the full-horizon
/// form).
class FeedbackController : public Controller {
 public:
  FeedbackController(FeedbackLaw law, int choice_u, int choice_v,
                     std::shared_ptr<const GramianTable> table = nullptr);
  std::vector<Vector> controls(double t, const Vector& x) override;

 private:
  FeedbackLaw law_;
  int choice_u_;
  int choice_v_;
  std::shared_ptr<const GramianTable> table_;
};

/// Gains and offsets of a penalized law precomputed on the stage-time grid;
/// shared by every tuple of an ensemble.
class ApproachGainTable {
 public:
  ApproachGainTable(const ApproachLaw& law, std::vector<double> times);

  std::optional<std::size_t> index_of(double t) const;
  const Matrix& gain_u(std::size_t k) const { return ku_[k]; }
  const Matrix& gain_v(std::size_t k) const { return kv_[k]; }
  const Vector& offset_u(int i, std::size_t k) const { return lu_[i][k]; }
  const Vector& offset_v(int j, std::size_t k) const { return lv_[j][k]; }

 private:
  std::vector<double> times_;
  double lookup_tol_ = 0.0;
  std::vector<Matrix> ku_, kv_;
  std::vector<std::vector<Vector>> lu_, lv_;  // [choice][grid index]
};

class ApproachController : public Controller {
 public:
  ApproachController(ApproachLaw law, int choice_u, int choice_v,
                     std::shared_ptr<const ApproachGainTable> table = nullptr);
  std::vector<Vector> controls(double t, const Vector& x) override;

 private:
  ApproachLaw law_;
  int choice_u_;
  int choice_v_;
  std::shared_ptr<const ApproachGainTable> table_;
};

/// Step sizing for penalized closed loops: keeps ||A - B K_u - C K_v||_inf
/// times the step below the explicit-RK4 stability bound by refining only
/// the terminal window where the gains saturate.
SimOptions approach_sim_options(const ApproachLaw& law, int base_steps = 2000);

ControllerFactory open_loop_family(std::shared_ptr<const OpenLoopLaw> law);
ControllerFactory hybrid_family(const Scenario& scenario,
                                std::shared_ptr<const GramianTable> table = nullptr);
ControllerFactory approach_family(const ApproachLaw& law,
                                  std::shared_ptr<const ApproachGainTable> table = nullptr);

}  // namespace choicectl
