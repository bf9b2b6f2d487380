#pragma once

#include <memory>
#include <optional>
#include <utility>

#include "choicectl/controller.hpp"
#include "choicectl/gramian_table.hpp"
#include "choicectl/open_loop.hpp"

namespace choicectl {

/// Two-agent target-achieving state feedback. Gains are defined through the
/// remaining-horizon Gramians and blow up at the horizon end, so every
/// evaluator is guarded by epsilon_horizon.
struct FeedbackLaw {
  Matrix a;
  Matrix b;  // agent u
  Matrix c;  // agent v
  double t0 = 0.0;
  double horizon_end = 1.0;
  TargetTensor targets;  // order 2, N_u x N_v
  double epsilon_horizon = 0.0;

  int choices_u() const { return targets.dims()[0]; }
  int choices_v() const { return targets.dims()[1]; }
};

/// Validates the two-agent shape and per-agent controllability over the
/// full horizon. epsilon_horizon defaults to 1e-6 (T - t0).
FeedbackLaw make_feedback_law(const Scenario& scenario);

/// K(t) = e^{-A^T t} (W_B(t) + W_C(t))^{-1} e^{-At} with Gramians over
/// [t, T]; throws past the guard.
Matrix gain_K(const FeedbackLaw& law, double t);
Matrix gain_K_from(const FeedbackLaw& law, double t, const Matrix& wb,
                   const Matrix& wc);

/// Choice-dependent affine offsets (L_ui, L_vj).
std::pair<Vector, Vector> offsets(const FeedbackLaw& law, int i, int j,
                                  double t);
std::pair<Vector, Vector> offsets_from(const FeedbackLaw& law, int i, int j,
                                       double t, const Matrix& wb,
                                       const Matrix& wc);

/// (u, v) = (-B^T K x + L_ui, -C^T K x + L_vj). Evaluated in a fused form
/// that subtracts the state from the target terms inside one solve, so the
/// value stays accurate close to the horizon end where gain and offset
/// diverge individually.
std::pair<Vector, Vector> feedback_control(const FeedbackLaw& law, int i,
                                           int j, double t, const Vector& x);
std::pair<Vector, Vector> feedback_control_from(const FeedbackLaw& law, int i,
                                                int j, double t,
                                                const Vector& x,
                                                const Matrix& wb,
                                                const Matrix& wc);

/// Theorem-2 feedback until the scenario's switch time, then a fresh
/// open-loop law synthesized from the measured state. One instance per
/// simulation run; the switch is latched by on_sample.
class HybridController : public Controller {
 public:
  HybridController(Scenario scenario, int choice_u, int choice_v,
                   std::shared_ptr<const GramianTable> table = nullptr);

  std::vector<Vector> controls(double t, const Vector& x) override;
  void on_sample(double t, const Vector& x) override;

  bool switched() const { return tail_.has_value(); }
  const OpenLoopLaw* tail_law() const {
    return tail_ ? &*tail_ : nullptr;
  }

 private:
  Scenario scenario_;
  FeedbackLaw law_;
  int choice_u_;
  int choice_v_;
  double switch_time_;
  std::shared_ptr<const GramianTable> table_;
  std::optional<OpenLoopLaw> tail_;
};

}  // namespace choicectl
