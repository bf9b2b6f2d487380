#include "choicectl/open_loop.hpp"

#include <cmath>
#include <string>

namespace choicectl {

namespace {

// Generator entry for agent l, choice i (0-based): base when i == 0,
// otherwise the agent's ray.
const Vector& generator_entry(const GeneratorSet& g, int agent, int choice) {
  return choice == 0 ? g.base : g.rays[agent][choice - 1];
}

}  // namespace

OpenLoopLaw synthesize(const Scenario& scenario) {
  return synthesize(scenario, scenario.system.agent_count() - 1);
}

OpenLoopLaw synthesize(const Scenario& scenario, int pivot_agent) {
  scenario.validate();
  const LinearSystem& sys = scenario.system;
  const int agents = sys.agent_count();
  const int n = sys.state_dim();
  if (pivot_agent < 0 || pivot_agent >= agents)
    throw DomainError("synthesize: pivot agent out of range");

  const double residual = compatibility_residual(scenario.targets);
  const double tol = std::max(1e-9 * scenario.targets.max_abs(), 1e-12);
  if (residual > tol)
    throw CompatibilityError(
        "synthesize: incompatible target tensor, residual " +
            std::to_string(residual),
        residual);

  OpenLoopLaw law;
  law.system = sys;
  law.t0 = scenario.t0;
  law.horizon_end = scenario.horizon_end;
  law.gramians.reserve(agents);
  for (int l = 0; l < agents; ++l) {
    const Gramian g =
        gramian(sys.a, sys.inputs[l], scenario.t0, scenario.horizon_end);
    const auto report = check_controllable(sys.a, sys.inputs[l], scenario.t0,
                                           scenario.horizon_end);
    if (!report.controllable)
      throw ControllabilityError(
          "synthesize: system not controllable by agent " +
              std::to_string(l + 1),
          l, report.condition_estimate);
    law.gramians.push_back(g.value);
  }

  const GeneratorSet gen = generator_set(scenario.targets);
  const Matrix exp_back = mat_exp(sys.a, -scenario.horizon_end);
  const Vector x0_back = mat_exp(sys.a, -scenario.t0) * scenario.x0;
  const std::vector<int>& dims = scenario.targets.dims();
  const Matrix& w_pivot = law.gramians[pivot_agent];

  // Mean over the pivot agent's choices of e^{-AT} H - e^{-A t0} x0,
  // premultiplied by W_pivot^{-1}; common to every row of the reduction.
  Vector pivot_mean = Vector::Zero(n);
  for (int i = 0; i < dims[pivot_agent]; ++i)
    pivot_mean += exp_back * generator_entry(gen, pivot_agent, i) - x0_back;
  pivot_mean /= dims[pivot_agent];
  const Vector pivot_term = solve_linear(w_pivot, pivot_mean);

  // Stack the free first-choice parameters of the non-pivot agents and
  // solve the block system in one go.
  std::vector<int> free_agents;
  for (int l = 0; l < agents; ++l)
    if (l != pivot_agent) free_agents.push_back(l);
  const int free_count = static_cast<int>(free_agents.size());

  law.params.resize(agents);
  for (int l = 0; l < agents; ++l)
    law.params[l].assign(dims[l], Vector::Zero(n));

  std::vector<Vector> first_choice(agents, Vector::Zero(n));
  if (free_count > 0) {
    Matrix omega = Matrix::Zero(free_count * n, free_count * n);
    Vector theta(free_count * n);
    for (int col = 0; col < free_count; ++col) {
      const Matrix block = solve_linear(w_pivot, law.gramians[free_agents[col]]);
      for (int row = 0; row < free_count; ++row) {
        omega.block(row * n, col * n, n, n) = block;
        if (row == col)
          omega.block(row * n, col * n, n, n) += Matrix::Identity(n, n);
      }
    }
    for (int row = 0; row < free_count; ++row) {
      const int m = free_agents[row];
      Vector own_mean = Vector::Zero(n);
      for (int i = 0; i < dims[m]; ++i)
        own_mean += gen.base - generator_entry(gen, m, i);
      own_mean /= dims[m];
      theta.segment(row * n, n) =
          solve_linear(law.gramians[m], exp_back * own_mean) + pivot_term;
    }

    Vector stacked;
    try {
      stacked = solve_linear(omega, theta);
    } catch (const SingularityError& err) {
      throw SingularityError(
          std::string("synthesize: reduction system ill-conditioned: ") +
              err.what(),
          err.condition_estimate());
    }
    for (int row = 0; row < free_count; ++row)
      first_choice[free_agents[row]] = stacked.segment(row * n, n);
  }

  Vector weighted_sum = Vector::Zero(n);
  for (int l : free_agents) weighted_sum += law.gramians[l] * first_choice[l];

  for (int l = 0; l < agents; ++l) {
    for (int i = 0; i < dims[l]; ++i) {
      if (l == pivot_agent) {
        law.params[l][i] = solve_linear(
            w_pivot,
            exp_back * generator_entry(gen, l, i) - x0_back - weighted_sum);
      } else if (i == 0) {
        law.params[l][i] = first_choice[l];
      } else {
        law.params[l][i] =
            solve_linear(law.gramians[l],
                         exp_back * (generator_entry(gen, l, i) - gen.base)) +
            first_choice[l];
      }
    }
  }
  return law;
}

Vector control_value(const OpenLoopLaw& law, int agent, int choice, double t) {
  if (agent < 0 || agent >= law.system.agent_count())
    throw DomainError("control_value: agent out of range");
  if (choice < 0 ||
      choice >= static_cast<int>(law.params[agent].size()))
    throw DomainError("control_value: choice out of range");
  if (t < law.t0 - 1e-12 || t > law.horizon_end + 1e-12)
    throw DomainError("control_value: time outside the law's horizon");
  return law.system.inputs[agent].transpose() *
         (mat_exp(law.system.a.transpose(), -t) * law.params[agent][choice]);
}

double average_cost(const OpenLoopLaw& law) {
  double cost = 0.0;
  for (std::size_t l = 0; l < law.params.size(); ++l) {
    double agent_cost = 0.0;
    for (const Vector& p : law.params[l])
      agent_cost += p.dot(law.gramians[l] * p);
    cost += agent_cost / static_cast<double>(law.params[l].size());
  }
  return cost;
}

double regulatory_cost(double a, std::span<const double> b, double x0,
                       double horizon) {
  if (!(horizon > 0.0)) throw DomainError("regulatory_cost: need T > 0");
  double b_sq = 0.0;
  for (double bl : b) b_sq += bl * bl;
  if (!(b_sq > 0.0))
    throw DomainError("regulatory_cost: need a nonzero input gain");
  if (a == 0.0) return x0 * x0 / (horizon * b_sq);
  // 1 - e^{-2aT} via expm1 keeps the a -> 0 limit smooth.
  return 2.0 * a * x0 * x0 / (-std::expm1(-2.0 * a * horizon) * b_sq);
}

TwoAgentScalarLaw two_agent_scalar_law(double h11, double h12, double h21,
                                       double h22, double x0, double horizon) {
  if (!(horizon > 0.0)) throw DomainError("two_agent_scalar_law: need T > 0");
  TwoAgentScalarLaw law;
  const double q = 1.0 / (4.0 * horizon);
  law.u1[0] = q * (2.0 * h11 + h12 - h21 - 2.0 * x0);
  law.u1[1] = q * (2.0 * h22 + h21 - h12 - 2.0 * x0);
  law.u2[0] = q * (2.0 * h11 - h12 + h21 - 2.0 * x0);
  law.u2[1] = q * (2.0 * h22 + h12 - h21 - 2.0 * x0);
  const double d1 = h11 - x0;
  const double d2 = h22 - x0;
  const double asym = h21 - h12;
  law.cost = q * (d1 * d1 + d2 * d2 + 0.5 * asym * asym);
  return law;
}

double single_choice_cost(std::span<const double> targets, double x0,
                          double b1, double b2, double horizon) {
  if (!(horizon > 0.0)) throw DomainError("single_choice_cost: need T > 0");
  const double b_sq = b1 * b1 + b2 * b2;
  if (!(b_sq > 0.0))
    throw DomainError("single_choice_cost: need a nonzero input gain");
  if (targets.empty()) return 0.0;
  double total = 0.0;
  for (double h : targets) total += (h - x0) * (h - x0);
  return total / (static_cast<double>(targets.size()) * b_sq * horizon);
}

std::vector<std::vector<double>> synthesize_scalar(
    double a, std::span<const double> b, const TargetTensor& targets,
    double x0, double t0, double horizon, int pivot_agent) {
  if (targets.state_dim() != 1)
    throw DimensionError("synthesize_scalar: targets must be scalar");
  const int agents = static_cast<int>(b.size());
  if (targets.order() != agents)
    throw DimensionError("synthesize_scalar: one input gain per agent");
  if (pivot_agent < 0 || pivot_agent >= agents)
    throw DomainError("synthesize_scalar: pivot agent out of range");
  for (double bl : b)
    if (bl == 0.0)
      throw DomainError("synthesize_scalar: zero input gain is uncontrollable");

  const double g = a == 0.0
                       ? horizon - t0
                       : (std::exp(-2.0 * a * t0) - std::exp(-2.0 * a * horizon)) /
                             (2.0 * a);
  const double decay_end = std::exp(-a * horizon);
  const double x0_back = std::exp(-a * t0) * x0;
  const GeneratorSet gen = generator_set(targets);
  const std::vector<int>& dims = targets.dims();
  const double bp_sq = b[pivot_agent] * b[pivot_agent];

  auto entry = [&](int agent, int choice) {
    return choice == 0 ? gen.base(0) : gen.rays[agent][choice - 1](0);
  };

  double pivot_mean = 0.0;
  for (int i = 0; i < dims[pivot_agent]; ++i)
    pivot_mean += decay_end * entry(pivot_agent, i) - x0_back;
  pivot_mean /= dims[pivot_agent];

  std::vector<int> free_agents;
  for (int l = 0; l < agents; ++l)
    if (l != pivot_agent) free_agents.push_back(l);
  const int free_count = static_cast<int>(free_agents.size());

  std::vector<double> first_choice(agents, 0.0);
  if (free_count > 0) {
    Matrix omega(free_count, free_count);
    Vector theta(free_count);
    for (int row = 0; row < free_count; ++row) {
      const int m = free_agents[row];
      for (int col = 0; col < free_count; ++col) {
        const int k = free_agents[col];
        omega(row, col) = b[k] * b[k] / bp_sq + (row == col ? 1.0 : 0.0);
      }
      double own_mean = 0.0;
      for (int i = 0; i < dims[m]; ++i) own_mean += gen.base(0) - entry(m, i);
      own_mean /= dims[m];
      theta(row) =
          decay_end * own_mean / (b[m] * b[m]) + pivot_mean / bp_sq;
    }
    const Vector p = solve_linear(omega, theta) / g;
    for (int row = 0; row < free_count; ++row)
      first_choice[free_agents[row]] = p(row);
  }

  double weighted_sum = 0.0;
  for (int l : free_agents)
    weighted_sum += b[l] * b[l] * first_choice[l];

  std::vector<std::vector<double>> params(agents);
  for (int l = 0; l < agents; ++l) {
    params[l].assign(dims[l], 0.0);
    for (int i = 0; i < dims[l]; ++i) {
      if (l == pivot_agent) {
        params[l][i] =
            (decay_end * entry(l, i) - x0_back) / (bp_sq * g) -
            weighted_sum / bp_sq;
      } else if (i == 0) {
        params[l][i] = first_choice[l];
      } else {
        params[l][i] = decay_end * (entry(l, i) - gen.base(0)) /
                           (b[l] * b[l] * g) +
                       first_choice[l];
      }
    }
  }
  return params;
}

}  // namespace choicectl
