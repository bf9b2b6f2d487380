#include "choicectl/feedback.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace choicectl {

namespace {

void require_two_agents(const Scenario& scenario, const char* who) {
  if (scenario.system.agent_count() != 2)
    throw ConfigurationError(std::string(who) +
                             ": exactly two agents required");
  if (scenario.targets.order() != 2)
    throw ConfigurationError(std::string(who) +
                             ": targets must be an N_u x N_v matrix tensor");
}

void check_guard(const FeedbackLaw& law, double t) {
  if (t < law.t0 - 1e-12)
    throw DomainError("feedback: time before the horizon start");
  if (law.horizon_end - t < law.epsilon_horizon)
    throw SingularityError(
        "feedback: gain requested within the terminal singularity guard",
        std::numeric_limits<double>::infinity());
}

// Mean over a row or column of generator targets; entries are n-vectors.
Vector mean_targets_u(const TargetTensor& h) {  // (1/N_u) sum_k H_{k1}
  Vector m = Vector::Zero(h.state_dim());
  for (int k = 0; k < h.dims()[0]; ++k) m += h.at({k, 0});
  return m / h.dims()[0];
}

Vector mean_targets_v(const TargetTensor& h) {  // (1/N_v) sum_k H_{1k}
  Vector m = Vector::Zero(h.state_dim());
  for (int k = 0; k < h.dims()[1]; ++k) m += h.at({0, k});
  return m / h.dims()[1];
}

}  // namespace

FeedbackLaw make_feedback_law(const Scenario& scenario) {
  scenario.validate();
  require_two_agents(scenario, "make_feedback_law");

  FeedbackLaw law;
  law.a = scenario.system.a;
  law.b = scenario.system.inputs[0];
  law.c = scenario.system.inputs[1];
  law.t0 = scenario.t0;
  law.horizon_end = scenario.horizon_end;
  law.targets = scenario.targets;
  law.epsilon_horizon = 1e-6 * (scenario.horizon_end - scenario.t0);

  for (int l = 0; l < 2; ++l) {
    const auto report = check_controllable(
        scenario.system.a, scenario.system.inputs[l], scenario.t0,
        scenario.horizon_end);
    if (!report.controllable)
      throw ControllabilityError(
          "make_feedback_law: system not controllable by agent " +
              std::to_string(l + 1),
          l, report.condition_estimate);
  }
  return law;
}

Matrix gain_K(const FeedbackLaw& law, double t) {
  check_guard(law, t);
  const Matrix wb = gramian(law.a, law.b, t, law.horizon_end).value;
  const Matrix wc = gramian(law.a, law.c, t, law.horizon_end).value;
  return gain_K_from(law, t, wb, wc);
}

Matrix gain_K_from(const FeedbackLaw& law, double t, const Matrix& wb,
                   const Matrix& wc) {
  check_guard(law, t);
  return mat_exp(law.a.transpose(), -t) *
         solve_linear_relaxed(wb + wc, mat_exp(law.a, -t));
}

std::pair<Vector, Vector> offsets(const FeedbackLaw& law, int i, int j,
                                  double t) {
  check_guard(law, t);
  const Matrix wb = gramian(law.a, law.b, t, law.horizon_end).value;
  const Matrix wc = gramian(law.a, law.c, t, law.horizon_end).value;
  return offsets_from(law, i, j, t, wb, wc);
}

namespace {

// Offsets and control share one fused algebra:
//   u_i = B^T e^{-A^T t} [ Wb^{-1} e^{-AT}(H_i1 - mean_k H_k1)
//                          + (Wb+Wc)^{-1} (e^{-AT} hbar - e^{-At} x) ]
// with hbar = mean_k H_k1 + mean_j H_1j - H_11 (symmetric in the agents),
// which follows from (I + Wc^{-1} Wb)^{-1} Wc^{-1} = (Wb + Wc)^{-1} and
// (Wb+Wc)^{-1} Wc Wb^{-1} = Wb^{-1} - (Wb+Wc)^{-1}.
//
// Adjoint-side evaluation of B^T e^{-A^T t} W^{-1} r as
// (W^{-1} e^{-At} B)^T r. The adjoint solve has the gain's own magnitude,
// two orders below the primal solution's near the horizon end, which keeps
// the row projections of the individually divergent terms accurate.
struct AdjointRows {
  Matrix qb_own;     // Wb^{-1} e^{-At} B
  Matrix qc_own;     // Wc^{-1} e^{-At} C
  Matrix qb_shared;  // (Wb+Wc)^{-1} e^{-At} B
  Matrix qc_shared;  // (Wb+Wc)^{-1} e^{-At} C
};

AdjointRows adjoint_rows(const FeedbackLaw& law, double t, const Matrix& wb,
                         const Matrix& wc) {
  const Matrix exp_t = mat_exp(law.a, -t);
  const Matrix sum = wb + wc;
  AdjointRows rows;
  rows.qb_own = solve_linear_relaxed(wb, exp_t * law.b);
  rows.qc_own = solve_linear_relaxed(wc, exp_t * law.c);
  rows.qb_shared = solve_linear_relaxed(sum, exp_t * law.b);
  rows.qc_shared = solve_linear_relaxed(sum, exp_t * law.c);
  return rows;
}

// Target-side right hand sides of the fused control formula.
struct TargetSides {
  Vector r_u;   // e^{-AT}(H_i1 - mean_k H_k1)
  Vector r_v;   // e^{-AT}(H_1j - mean_j H_1j)
  Vector hbar;  // e^{-AT}(mean_u + mean_v - H_11)
};

TargetSides target_sides(const FeedbackLaw& law, int i, int j) {
  if (i < 0 || i >= law.choices_u() || j < 0 || j >= law.choices_v())
    throw DomainError("feedback: choice index out of range");
  const TargetTensor& h = law.targets;
  const Matrix exp_back = mat_exp(law.a, -law.horizon_end);
  const Vector mean_u = exp_back * mean_targets_u(h);
  const Vector mean_v = exp_back * mean_targets_v(h);
  TargetSides sides;
  sides.r_u = exp_back * h.at({i, 0}) - mean_u;
  sides.r_v = exp_back * h.at({0, j}) - mean_v;
  sides.hbar = mean_u + mean_v - exp_back * h.at({0, 0});
  return sides;
}

}  // namespace

std::pair<Vector, Vector> offsets_from(const FeedbackLaw& law, int i, int j,
                                       double t, const Matrix& wb,
                                       const Matrix& wc) {
  check_guard(law, t);
  const TargetSides sides = target_sides(law, i, j);
  const AdjointRows rows = adjoint_rows(law, t, wb, wc);
  return {rows.qb_own.transpose() * sides.r_u +
              rows.qb_shared.transpose() * sides.hbar,
          rows.qc_own.transpose() * sides.r_v +
              rows.qc_shared.transpose() * sides.hbar};
}

std::pair<Vector, Vector> feedback_control(const FeedbackLaw& law, int i,
                                           int j, double t, const Vector& x) {
  check_guard(law, t);
  const Matrix wb = gramian(law.a, law.b, t, law.horizon_end).value;
  const Matrix wc = gramian(law.a, law.c, t, law.horizon_end).value;
  return feedback_control_from(law, i, j, t, x, wb, wc);
}

std::pair<Vector, Vector> feedback_control_from(const FeedbackLaw& law, int i,
                                                int j, double t,
                                                const Vector& x,
                                                const Matrix& wb,
                                                const Matrix& wc) {
  check_guard(law, t);
  const TargetSides sides = target_sides(law, i, j);
  const AdjointRows rows = adjoint_rows(law, t, wb, wc);
  const Vector shared = sides.hbar - mat_exp(law.a, -t) * x;
  return {rows.qb_own.transpose() * sides.r_u +
              rows.qb_shared.transpose() * shared,
          rows.qc_own.transpose() * sides.r_v +
              rows.qc_shared.transpose() * shared};
}

HybridController::HybridController(Scenario scenario, int choice_u,
                                   int choice_v,
                                   std::shared_ptr<const GramianTable> table)
    : scenario_(std::move(scenario)),
      law_(make_feedback_law(scenario_)),
      choice_u_(choice_u),
      choice_v_(choice_v),
      table_(std::move(table)) {
  if (!scenario_.switch_time)
    throw ConfigurationError(
        "hybrid controller: scenario has no switch time");
  switch_time_ = *scenario_.switch_time;
  if (choice_u < 0 || choice_u >= law_.choices_u() || choice_v < 0 ||
      choice_v >= law_.choices_v())
    throw DomainError("hybrid controller: choice index out of range");
}

void HybridController::on_sample(double t, const Vector& x) {
  if (tail_) return;
  const double tol = 1e-9 * (scenario_.horizon_end - scenario_.t0);
  if (t + tol < switch_time_) return;
  Scenario tail_scenario = scenario_;
  tail_scenario.t0 = t;
  tail_scenario.x0 = x;
  tail_scenario.switch_time.reset();
  tail_ = synthesize(tail_scenario);
}

std::vector<Vector> HybridController::controls(double t, const Vector& x) {
  if (tail_ && t >= tail_->t0 - 1e-12) {
    return {control_value(*tail_, 0, choice_u_, t),
            control_value(*tail_, 1, choice_v_, t)};
  }
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

}  // namespace choicectl
