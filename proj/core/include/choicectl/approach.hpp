#pragma once

#include <utility>

#include "choicectl/gramian_table.hpp"
#include "choicectl/model.hpp"

namespace choicectl {

/// The penalty core e^{-(A+A^T)T} appears in two plausible readings for
/// non-normal A; both are available and an oracle comparison arbitrates.
enum class CoreMode {
  exp_of_sum,   // e^{-(A+A^T)T}, literally as printed
  exp_product,  // e^{-AT} e^{-A^T T}
};

/// Exponent applied to the target sums inside the u-side offsets.
enum class OffsetExponent {
  uniform_terminal,  // e^{-AT} on every target term (default)
  as_printed,        // e^{-At} on the u side, e^{-AT} on the v side
};

/// Target-approaching feedback for arbitrary (possibly incompatible) target
/// matrices: minimizes control energy plus f-weighted mean squared terminal
/// error. Gains stay finite on the whole horizon for every finite f.
struct ApproachLaw {
  Matrix a;
  Matrix b;
  Matrix c;
  double t0 = 0.0;
  double horizon_end = 1.0;
  TargetTensor targets;  // order 2
  double f = 1e3;
  CoreMode core_mode = CoreMode::exp_of_sum;
  OffsetExponent offset_mode = OffsetExponent::uniform_terminal;
  Matrix core;  // cached penalty core E
  double epsilon_horizon = 0.0;  // guards only the large-f limit forms

  int choices_u() const { return targets.dims()[0]; }
  int choices_v() const { return targets.dims()[1]; }
};

Matrix penalty_core(const Matrix& a, double horizon_end, CoreMode mode);

/// f defaults to the scenario's penalty weight, or 1e3 when absent.
ApproachLaw make_approach_law(
    const Scenario& scenario,
    CoreMode core_mode = CoreMode::exp_of_sum,
    OffsetExponent offset_mode = OffsetExponent::uniform_terminal);

/// Time-varying gains (K_u, K_v); finite for all t in [t0, T].
std::pair<Matrix, Matrix> approach_gains(const ApproachLaw& law, double t);
std::pair<Matrix, Matrix> approach_gains_from(const ApproachLaw& law, double t,
                                              const Matrix& wb,
                                              const Matrix& wc);

/// Choice-dependent offsets (L_ui, L_vj).
std::pair<Vector, Vector> approach_offsets(const ApproachLaw& law, int i,
                                           int j, double t);
std::pair<Vector, Vector> approach_offsets_from(const ApproachLaw& law, int i,
                                                int j, double t,
                                                const Matrix& wb,
                                                const Matrix& wc);

/// Closed-form f -> infinity limit of the gains and offsets; matches the
/// target-achieving feedback forms and shares their horizon guard.
struct LimitGains {
  Matrix k;    // n x n state-feedback core
  Vector l_u;  // offset for choice i
  Vector l_v;  // offset for choice j
};
LimitGains limit_gains(const ApproachLaw& law, int i, int j, double t);

/// Closed-form prediction of sum_ij x_ij(T) under the penalized law.
Vector predict_terminal_sum(const Scenario& scenario, double f,
                            CoreMode mode = CoreMode::exp_of_sum);

/// Large-f prediction of a single terminal state:
/// column mean + row mean - grand mean of the target matrix.
Vector predict_terminal_large_f(const TargetTensor& targets, int i, int j);

}  // namespace choicectl
