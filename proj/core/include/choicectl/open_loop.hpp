#pragma once

#include <span>
#include <vector>

#include "choicectl/model.hpp"

namespace choicectl {

/// Minimum-average-cost open-loop control family. Agent l with choice i
/// applies u(t) = B_l^T e^{-A^T t} P[l][i].
struct OpenLoopLaw {
  LinearSystem system;
  double t0 = 0.0;
  double horizon_end = 1.0;
  std::vector<std::vector<Vector>> params;  // params[agent][choice]
  std::vector<Matrix> gramians;             // W_l over [t0, horizon_end]
};

/// Builds the optimal target-achieving family for a compatible tensor.
/// The pivot agent is the one eliminated in the reduction; the optimum does
/// not depend on it (exposed to let tests verify exactly that). Defaults to
/// the last agent.
OpenLoopLaw synthesize(const Scenario& scenario);
OpenLoopLaw synthesize(const Scenario& scenario, int pivot_agent);

Vector control_value(const OpenLoopLaw& law, int agent, int choice, double t);

/// Quadratic-form evaluation sum_l (1/N_l) sum_i P^T W_l P.
double average_cost(const OpenLoopLaw& law);

/// Closed-form optimal cost for all-zero targets on a scalar plant with
/// t0 = 0: 2 a x0^2 / ((1 - e^{-2aT}) sum b^2), continuous at a = 0.
double regulatory_cost(double a, std::span<const double> b, double x0,
                       double horizon);

/// Two-agent scalar shortcut (a = 0, b1 = b2 = 1, two equally likely
/// choices each): four constant controls plus the average cost.
struct TwoAgentScalarLaw {
  double u1[2];  // agent 1, choices 1 and 2
  double u2[2];  // agent 2, choices 1 and 2
  double cost = 0.0;
};
TwoAgentScalarLaw two_agent_scalar_law(double h11, double h12, double h21,
                                       double h22, double x0, double horizon);

/// Choice-free minimum-energy cost: mean over the given targets of
/// (H - x0)^2 / ((b1^2 + b2^2) T), i.e. the cost of visiting them one per
/// run in the single-choice setting.
double single_choice_cost(std::span<const double> targets, double x0,
                          double b1, double b2, double horizon);

/// Scalar-plant synthesis through the closed-form Gramian g = int e^{-2at}dt
/// and the b^2-ratio reduction; an independent route used to cross-check the
/// general matrix path. Targets must have state dimension one.
std::vector<std::vector<double>> synthesize_scalar(
    double a, std::span<const double> b, const TargetTensor& targets,
    double x0, double t0, double horizon, int pivot_agent);

}  // namespace choicectl
