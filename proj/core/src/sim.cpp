#include "choicectl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>

namespace choicectl {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void validate_choices(const TargetTensor& targets,
                      const std::vector<int>& choices) {
  // linear_index performs the bounds checks
  (void)targets.linear_index(choices);
}

}  // namespace

NoiseProcess::NoiseProcess(NoiseConfig config, int state_dim, double t0)
    : config_(std::move(config)), state_dim_(state_dim), t0_(t0) {
  if (config_.sigma < 0.0) throw DomainError("noise: sigma must be >= 0");
  if (!(config_.hold_interval > 0.0))
    throw DomainError("noise: hold interval must be positive");
  if (config_.channels.empty()) {
    active_channels_.resize(state_dim_);
    for (int c = 0; c < state_dim_; ++c) active_channels_[c] = c;
  } else {
    active_channels_ = config_.channels;
    for (int c : active_channels_)
      if (c < 0 || c >= state_dim_)
        throw DomainError("noise: channel index out of range");
  }
}

Vector NoiseProcess::sample(double t) const {
  Vector out = Vector::Zero(state_dim_);
  if (config_.sigma == 0.0) return out;
  double offset = (t - t0_) / config_.hold_interval;
  if (offset < 0.0) offset = 0.0;
  const auto interval = static_cast<std::uint64_t>(offset);
  for (std::size_t c = 0; c < active_channels_.size(); ++c) {
    std::uint64_t h = config_.seed;
    h = mix64(h + kGolden * (interval + 1));
    h = mix64(h + kGolden * (static_cast<std::uint64_t>(c) + 1));
    const std::uint64_t r1 = mix64(h + kGolden);
    const std::uint64_t r2 = mix64(h + 2 * kGolden);
    const double u1 = (static_cast<double>(r1 >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(r2 >> 11) * 0x1.0p-53;
    out(active_channels_[c]) = config_.sigma *
                               std::sqrt(-2.0 * std::log(u1)) *
                               std::cos(2.0 * M_PI * u2);
  }
  return out;
}

NoiseConfig tuple_noise(const NoiseConfig& base, std::size_t tuple_index) {
  NoiseConfig out = base;
  out.seed = base.seed ^ (static_cast<std::uint64_t>(tuple_index) * kGolden);
  return out;
}

std::vector<double> simulation_grid(const Scenario& scenario,
                                    const SimOptions& opts) {
  if (opts.steps < 1) throw DomainError("simulate: need at least one step");
  const double t0 = scenario.t0;
  const double horizon_end = scenario.horizon_end;

  double coarse_end = horizon_end;
  if (opts.tail_width > 0.0) {
    if (opts.tail_steps < 1)
      throw DomainError("simulate: tail refinement needs tail_steps >= 1");
    coarse_end = horizon_end - opts.tail_width;
    if (!(coarse_end > t0))
      throw DomainError("simulate: tail window covers the whole horizon");
  }

  // Coarse breakpoints: the switch time, when present and inside the
  // coarse range, becomes an exact grid point.
  std::vector<std::pair<double, double>> segments;  // [lo, hi)
  if (scenario.switch_time && *scenario.switch_time < coarse_end)
    segments = {{t0, *scenario.switch_time},
                {*scenario.switch_time, coarse_end}};
  else
    segments = {{t0, coarse_end}};

  const double coarse_span = coarse_end - t0;
  std::vector<double> grid;
  grid.push_back(t0);
  for (const auto& [lo, hi] : segments) {
    const int steps = std::max(
        1, static_cast<int>(std::llround(opts.steps * (hi - lo) / coarse_span)));
    const double h = (hi - lo) / steps;
    for (int k = 1; k < steps; ++k) grid.push_back(lo + k * h);
    grid.push_back(hi);
  }
  if (opts.tail_width > 0.0) {
    const double h = opts.tail_width / opts.tail_steps;
    for (int k = 1; k < opts.tail_steps; ++k)
      grid.push_back(coarse_end + k * h);
    grid.push_back(horizon_end);
  }
  return grid;
}

std::vector<double> stage_times(const std::vector<double>& grid) {
  std::vector<double> times;
  times.reserve(grid.size() * 2);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    times.push_back(grid[k]);
    times.push_back(0.5 * (grid[k] + grid[k + 1]));
  }
  times.push_back(grid.back());
  return times;
}

Trajectory simulate(const Scenario& scenario, Controller& controller,
                    const std::vector<int>& choices, const SimOptions& opts,
                    const std::optional<NoiseConfig>& noise_override) {
  scenario.validate();
  validate_choices(scenario.targets, choices);
  const LinearSystem& sys = scenario.system;
  const int agents = sys.agent_count();

  std::optional<NoiseProcess> noise;
  const std::optional<NoiseConfig>& cfg =
      noise_override ? noise_override : scenario.noise;
  if (cfg && cfg->sigma > 0.0)
    noise.emplace(*cfg, sys.state_dim(), scenario.t0);

  const std::vector<double> grid = simulation_grid(scenario, opts);

  Trajectory traj;
  traj.times = grid;
  traj.states.reserve(grid.size());
  traj.controls.assign(agents, {});
  for (auto& per_agent : traj.controls) per_agent.reserve(grid.size());

  auto derivative = [&](double t, const Vector& x,
                        const std::vector<Vector>& u) {
    Vector dx = sys.a * x;
    for (int l = 0; l < agents; ++l) dx.noalias() += sys.inputs[l] * u[l];
    if (noise) dx += noise->sample(t);
    return dx;
  };

  Vector x = scenario.x0;
  controller.on_sample(grid[0], x);
  {
    const auto u0 = controller.controls(grid[0], x);
    traj.states.push_back(x);
    for (int l = 0; l < agents; ++l) traj.controls[l].push_back(u0[l]);
  }

  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k];
    const double h = grid[k + 1] - t;
    const double tm = 0.5 * (grid[k] + grid[k + 1]);

    const auto u1 = controller.controls(t, x);
    const Vector k1 = derivative(t, x, u1);
    const Vector x2 = x + 0.5 * h * k1;
    const auto u2 = controller.controls(tm, x2);
    const Vector k2 = derivative(tm, x2, u2);
    const Vector x3 = x + 0.5 * h * k2;
    const auto u3 = controller.controls(tm, x3);
    const Vector k3 = derivative(tm, x3, u3);
    const Vector x4 = x + h * k3;
    const auto u4 = controller.controls(grid[k + 1], x4);
    const Vector k4 = derivative(grid[k + 1], x4, u4);

    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite())
      throw NumericError("simulate: state became non-finite at t = " +
                         std::to_string(grid[k + 1]));

    controller.on_sample(grid[k + 1], x);
    const auto u_sample = controller.controls(grid[k + 1], x);
    traj.states.push_back(x);
    for (int l = 0; l < agents; ++l)
      traj.controls[l].push_back(u_sample[l]);
  }

  traj.terminal_error = x - scenario.targets.at(choices);

  double cost = 0.0;
  for (int l = 0; l < agents; ++l) {
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      const double h = grid[k + 1] - grid[k];
      cost += 0.5 * h *
              (traj.controls[l][k].squaredNorm() +
               traj.controls[l][k + 1].squaredNorm());
    }
  }
  traj.measured_cost_contribution = cost;
  return traj;
}

EnsembleReport run_ensemble(const Scenario& scenario,
                            const ControllerFactory& factory,
                            const SimOptions& opts) {
  scenario.validate();
  const std::size_t count = scenario.targets.entry_count();
  EnsembleReport report;
  report.tuples.resize(count);

  auto run_tuple = [&](std::size_t k) {
    const std::vector<int> choices = scenario.targets.tuple_of(k);
    std::optional<NoiseConfig> noise;
    if (scenario.noise) noise = tuple_noise(*scenario.noise, k);
    auto controller = factory(choices);
    const Trajectory traj =
        simulate(scenario, *controller, choices, opts, noise);
    TupleSummary summary;
    summary.choices = choices;
    summary.terminal_error = traj.terminal_error;
    summary.terminal_error_norm =
        traj.terminal_error.size() == 0
            ? 0.0
            : traj.terminal_error.cwiseAbs().maxCoeff();
    summary.cost_contribution = traj.measured_cost_contribution;
    if (noise) summary.seed_used = noise->seed;
    report.tuples[k] = std::move(summary);
  };

  const int threads = std::max(1, opts.threads);
  if (threads == 1 || count <= 1) {
    for (std::size_t k = 0; k < count; ++k) run_tuple(k);
  } else {
    std::vector<std::future<void>> pending;
    std::size_t next = 0;
    while (next < count || !pending.empty()) {
      while (next < count &&
             pending.size() < static_cast<std::size_t>(threads)) {
        pending.push_back(
            std::async(std::launch::async, run_tuple, next));
        ++next;
      }
      pending.front().get();
      pending.erase(pending.begin());
    }
  }

  double total = 0.0;
  double max_err = 0.0;
  for (const TupleSummary& s : report.tuples) {
    total += s.cost_contribution;
    max_err = std::max(max_err, s.terminal_error_norm);
  }
  report.average_cost = total / static_cast<double>(count);
  report.max_terminal_error = max_err;
  return report;
}

Vector open_loop_terminal_closed_form(const Scenario& scenario,
                                      const OpenLoopLaw& law,
                                      const std::vector<int>& choices) {
  Vector reach = Vector::Zero(scenario.system.state_dim());
  for (int l = 0; l < scenario.system.agent_count(); ++l)
    reach += law.gramians[l] * law.params[l][choices[l]];
  return mat_exp(scenario.system.a, scenario.horizon_end - scenario.t0) *
             scenario.x0 +
         mat_exp(scenario.system.a, scenario.horizon_end) * reach;
}

OpenLoopController::OpenLoopController(std::shared_ptr<const OpenLoopLaw> law,
                                       std::vector<int> choices)
    : law_(std::move(law)), choices_(std::move(choices)) {
  if (static_cast<int>(choices_.size()) != law_->system.agent_count())
    throw DimensionError("open-loop controller: one choice per agent");
}

std::vector<Vector> OpenLoopController::controls(double t, const Vector&) {
  const Matrix exp_tr = mat_exp(law_->system.a.transpose(), -t);
  std::vector<Vector> out;
  out.reserve(law_->params.size());
  for (std::size_t l = 0; l < law_->params.size(); ++l)
    out.push_back(law_->system.inputs[l].transpose() *
                  (exp_tr * law_->params[l][choices_[l]]));
  return out;
}

FeedbackController::FeedbackController(FeedbackLaw law, int choice_u,
                                       int choice_v,
                                       std::shared_ptr<const GramianTable> table)
    : law_(std::move(law)),
      choice_u_(choice_u),
      choice_v_(choice_v),
      table_(std::move(table)) {}

std::vector<Vector> FeedbackController::controls(double t, const Vector& x) {
  if (table_) {
    if (auto idx = table_->index_of(t)) {
      auto [u, v] = feedback_control_from(law_, choice_u_, choice_v_, t, x,
                                          table_->remaining(0, *idx),
                                          table_->remaining(1, *idx));
      return {u, v};
    }
  }
  auto [u, v] = feedback_control(law_, choice_u_, choice_v_, t, x);
  return {u, v};
}

ApproachGainTable::ApproachGainTable(const ApproachLaw& law,
                                     std::vector<double> times)
    : times_(std::move(times)) {
  if (times_.empty()) throw DomainError("approach table: empty time grid");
  lookup_tol_ = 1e-9 * (times_.back() - times_.front());

  GramianTable gramians(law.a, {law.b, law.c}, times_);
  const std::size_t count = times_.size();
  ku_.resize(count);
  kv_.resize(count);
  lu_.assign(law.choices_u(), std::vector<Vector>(count));
  lv_.assign(law.choices_v(), std::vector<Vector>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const Matrix& wb = gramians.remaining(0, k);
    const Matrix& wc = gramians.remaining(1, k);
    auto [ku, kv] = approach_gains_from(law, times_[k], wb, wc);
    ku_[k] = std::move(ku);
    kv_[k] = std::move(kv);
    for (int i = 0; i < law.choices_u(); ++i)
      for (int j = 0; j < law.choices_v(); ++j) {
        if (i > 0 && j > 0) continue;  // offsets depend on one index each
        auto [lu, lv] = approach_offsets_from(law, i, j, times_[k], wb, wc);
        if (j == 0) lu_[i][k] = std::move(lu);
        if (i == 0) lv_[j][k] = std::move(lv);
      }
  }
}

std::optional<std::size_t> ApproachGainTable::index_of(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t - lookup_tol_);
  if (it == times_.end()) return std::nullopt;
  if (std::abs(*it - t) > lookup_tol_) return std::nullopt;
  return static_cast<std::size_t>(it - times_.begin());
}

ApproachController::ApproachController(
    ApproachLaw law, int choice_u, int choice_v,
    std::shared_ptr<const ApproachGainTable> table)
    : law_(std::move(law)),
      choice_u_(choice_u),
      choice_v_(choice_v),
      table_(std::move(table)) {
  if (choice_u_ < 0 || choice_u_ >= law_.choices_u() || choice_v_ < 0 ||
      choice_v_ >= law_.choices_v())
    throw DomainError("approach controller: choice index out of range");
}

std::vector<Vector> ApproachController::controls(double t, const Vector& x) {
  if (table_) {
    if (auto idx = table_->index_of(t)) {
      return {-table_->gain_u(*idx) * x + table_->offset_u(choice_u_, *idx),
              -table_->gain_v(*idx) * x + table_->offset_v(choice_v_, *idx)};
    }
  }
  auto [ku, kv] = approach_gains(law_, t);
  auto [lu, lv] = approach_offsets(law_, choice_u_, choice_v_, t);
  return {-ku * x + lu, -kv * x + lv};
}

SimOptions approach_sim_options(const ApproachLaw& law, int base_steps) {
  SimOptions opts;
  opts.steps = base_steps;
  const double span = law.horizon_end - law.t0;
  const double coarse_h = span / base_steps;
  const Eigen::Index n = law.a.rows();

  auto closed_loop_norm = [&](double t, const Matrix& wb, const Matrix& wc) {
    auto [ku, kv] = approach_gains_from(law, t, wb, wc);
    const Matrix m = law.a - law.b * ku - law.c * kv;
    return m.cwiseAbs().rowwise().sum().maxCoeff();
  };

  const Matrix zero = Matrix::Zero(n, n);
  const double rate_end = closed_loop_norm(law.horizon_end, zero, zero);
  if (rate_end * coarse_h <= 2.0) return opts;

  // Find how far from the horizon end the coarse step stops being stable,
  // then refine that window uniformly at the terminal rate.
  double unsafe = span / 4.0;
  double probe = unsafe;
  while (probe > 2.0 / rate_end) {
    const double t = law.horizon_end - probe;
    const Matrix wb = gramian(law.a, law.b, t, law.horizon_end).value;
    const Matrix wc = gramian(law.a, law.c, t, law.horizon_end).value;
    if (closed_loop_norm(t, wb, wc) * coarse_h > 1.0) break;
    unsafe = probe;
    probe *= 0.5;
  }
  const double width = std::min(2.0 * unsafe, 0.25 * span);
  const double fine_h = 1.5 / rate_end;
  const int fine_steps = static_cast<int>(std::ceil(width / fine_h));
  if (fine_steps > 8'000'000)
    throw NumericError(
        "approach_sim_options: stability-bounded step count is impractical");
  opts.tail_width = width;
  opts.tail_steps = fine_steps;
  return opts;
}

ControllerFactory open_loop_family(std::shared_ptr<const OpenLoopLaw> law) {
  return [law](const std::vector<int>& choices) {
    return std::make_unique<OpenLoopController>(law, choices);
  };
}

ControllerFactory hybrid_family(const Scenario& scenario,
                                std::shared_ptr<const GramianTable> table) {
  return [scenario, table](const std::vector<int>& choices) {
    if (choices.size() != 2)
      throw DimensionError("hybrid family: two choices expected");
    return std::make_unique<HybridController>(scenario, choices[0],
                                              choices[1], table);
  };
}

ControllerFactory approach_family(
    const ApproachLaw& law, std::shared_ptr<const ApproachGainTable> table) {
  return [law, table](const std::vector<int>& choices) {
    if (choices.size() != 2)
      throw DimensionError("approach family: two choices expected");
    return std::make_unique<ApproachController>(law, choices[0], choices[1],
                                                table);
  };
}

}  // namespace choicectl
