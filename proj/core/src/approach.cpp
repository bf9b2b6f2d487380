#include "choicectl/approach.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace choicectl {

namespace {

struct TargetSums {
  Vector grand;              // sum_ij H_ij
  std::vector<Vector> rows;  // rows[i] = sum_j H_ij
  std::vector<Vector> cols;  // cols[j] = sum_i H_ij
};

TargetSums target_sums(const TargetTensor& h) {
  TargetSums s;
  const int nu = h.dims()[0];
  const int nv = h.dims()[1];
  s.grand = Vector::Zero(h.state_dim());
  s.rows.assign(nu, Vector::Zero(h.state_dim()));
  s.cols.assign(nv, Vector::Zero(h.state_dim()));
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      const Vector& v = h.at({i, j});
      s.grand += v;
      s.rows[i] += v;
      s.cols[j] += v;
    }
  return s;
}

void check_interval(const ApproachLaw& law, double t) {
  if (t < law.t0 - 1e-12 || t > law.horizon_end + 1e-12)
    throw DomainError("approach: time outside the horizon");
}

// Remaining-horizon Gramian; zero matrix at the horizon end itself.
Matrix remaining_gramian(const Matrix& a, const Matrix& b, double t,
                         double horizon_end) {
  if (horizon_end - t <= 0.0)
    return Matrix::Zero(a.rows(), a.rows());
  return gramian(a, b, t, horizon_end).value;
}

}  // namespace

Matrix penalty_core(const Matrix& a, double horizon_end, CoreMode mode) {
  if (mode == CoreMode::exp_of_sum)
    return mat_exp(-(a + a.transpose()), horizon_end);
  const Matrix e = mat_exp(a, -horizon_end);
  return e * e.transpose();
}

ApproachLaw make_approach_law(const Scenario& scenario, CoreMode core_mode,
                              OffsetExponent offset_mode) {
  scenario.validate();
  if (scenario.system.agent_count() != 2)
    throw ConfigurationError("make_approach_law: exactly two agents required");
  if (scenario.targets.order() != 2)
    throw ConfigurationError(
        "make_approach_law: targets must be an N_u x N_v matrix tensor");

  ApproachLaw law;
  law.a = scenario.system.a;
  law.b = scenario.system.inputs[0];
  law.c = scenario.system.inputs[1];
  law.t0 = scenario.t0;
  law.horizon_end = scenario.horizon_end;
  law.targets = scenario.targets;
  law.f = scenario.penalty_weight.value_or(1e3);
  if (!(law.f > 0.0))
    throw DomainError("make_approach_law: penalty weight must be positive");
  law.core_mode = core_mode;
  law.offset_mode = offset_mode;
  law.core = penalty_core(law.a, law.horizon_end, core_mode);
  law.epsilon_horizon = 1e-6 * (law.horizon_end - law.t0);
  return law;
}

std::pair<Matrix, Matrix> approach_gains(const ApproachLaw& law, double t) {
  check_interval(law, t);
  const Matrix wb = remaining_gramian(law.a, law.b, t, law.horizon_end);
  const Matrix wc = remaining_gramian(law.a, law.c, t, law.horizon_end);
  return approach_gains_from(law, t, wb, wc);
}

std::pair<Matrix, Matrix> approach_gains_from(const ApproachLaw& law, double t,
                                              const Matrix& wb,
                                              const Matrix& wc) {
  check_interval(law, t);
  const double f = law.f;
  const Matrix exp_t = mat_exp(law.a, -t);
  const Matrix exp_t_tr = exp_t.transpose();
  const Matrix m_mix = law.core + f * (wb + wc);
  const Eigen::Index n = law.a.rows();
  const Matrix ident = Matrix::Identity(n, n);

  // W M^{-1} = (M^{-1} W)^T for symmetric M, W.
  const Matrix wc_mix = solve_linear(m_mix, wc).transpose();
  const Matrix wb_mix = solve_linear(m_mix, wb).transpose();

  const Matrix ku =
      f * law.b.transpose() *
      (exp_t_tr * solve_linear(f * wb + law.core, (ident - f * wc_mix) * exp_t));
  const Matrix kv =
      f * law.c.transpose() *
      (exp_t_tr * solve_linear(f * wc + law.core, (ident - f * wb_mix) * exp_t));
  return {ku, kv};
}

std::pair<Vector, Vector> approach_offsets(const ApproachLaw& law, int i,
                                           int j, double t) {
  check_interval(law, t);
  const Matrix wb = remaining_gramian(law.a, law.b, t, law.horizon_end);
  const Matrix wc = remaining_gramian(law.a, law.c, t, law.horizon_end);
  return approach_offsets_from(law, i, j, t, wb, wc);
}

std::pair<Vector, Vector> approach_offsets_from(const ApproachLaw& law, int i,
                                                int j, double t,
                                                const Matrix& wb,
                                                const Matrix& wc) {
  check_interval(law, t);
  if (i < 0 || i >= law.choices_u() || j < 0 || j >= law.choices_v())
    throw DomainError("approach_offsets: choice index out of range");

  const double f = law.f;
  const double nu = law.choices_u();
  const double nv = law.choices_v();
  const TargetSums sums = target_sums(law.targets);
  const Matrix exp_t_tr = mat_exp(law.a.transpose(), -t);
  const Matrix exp_back = mat_exp(law.a, -law.horizon_end);
  const Matrix m_mix = law.core + f * (wb + wc);
  const Matrix wc_mix = solve_linear(m_mix, wc).transpose();
  const Matrix wb_mix = solve_linear(m_mix, wb).transpose();

  // The u-side target terms carry e^{-AT} in the derivation; the printed
  // variant (e^{-At}) is kept behind the mode switch for arbitration.
  const Matrix target_exp_u = law.offset_mode == OffsetExponent::uniform_terminal
                                  ? exp_back
                                  : mat_exp(law.a, -t);

  const Vector bracket_u = (f / (nu * nv)) * (wc_mix * (target_exp_u * sums.grand)) -
                           (target_exp_u * sums.rows[i]) / nv;
  const Vector bracket_v = (f / (nu * nv)) * (wb_mix * (exp_back * sums.grand)) -
                           (exp_back * sums.cols[j]) / nu;

  const Vector lu = -f * (law.b.transpose() *
                          (exp_t_tr * solve_linear(f * wb + law.core, bracket_u)));
  const Vector lv = -f * (law.c.transpose() *
                          (exp_t_tr * solve_linear(f * wc + law.core, bracket_v)));
  return {lu, lv};
}

LimitGains limit_gains(const ApproachLaw& law, int i, int j, double t) {
  check_interval(law, t);
  if (law.horizon_end - t < law.epsilon_horizon)
    throw SingularityError(
        "limit_gains: large-f limit requested within the terminal guard",
        std::numeric_limits<double>::infinity());
  if (i < 0 || i >= law.choices_u() || j < 0 || j >= law.choices_v())
    throw DomainError("limit_gains: choice index out of range");

  const Matrix wb = remaining_gramian(law.a, law.b, t, law.horizon_end);
  const Matrix wc = remaining_gramian(law.a, law.c, t, law.horizon_end);
  const double nu = law.choices_u();
  const double nv = law.choices_v();
  const TargetSums sums = target_sums(law.targets);
  const Matrix exp_t = mat_exp(law.a, -t);
  const Matrix exp_t_tr = exp_t.transpose();
  const Matrix exp_back = mat_exp(law.a, -law.horizon_end);

  LimitGains out;
  out.k = exp_t_tr * solve_linear_relaxed(wb + wc, exp_t);

  const Vector mixed = solve_linear_relaxed(wb + wc, exp_back * sums.grand);
  const Vector bracket_u = (wc * mixed) / (nu * nv) -
                           (exp_back * sums.rows[i]) / nv;
  const Vector bracket_v = (wb * mixed) / (nu * nv) -
                           (exp_back * sums.cols[j]) / nu;
  out.l_u = -law.b.transpose() * (exp_t_tr * solve_linear_relaxed(wb, bracket_u));
  out.l_v = -law.c.transpose() * (exp_t_tr * solve_linear_relaxed(wc, bracket_v));
  return out;
}

Vector predict_terminal_sum(const Scenario& scenario, double f,
                            CoreMode mode) {
  scenario.validate();
  if (scenario.system.agent_count() != 2)
    throw ConfigurationError(
        "predict_terminal_sum: exactly two agents required");
  if (scenario.targets.order() != 2)
    throw ConfigurationError(
        "predict_terminal_sum: targets must be a matrix tensor");
  if (!(f > 0.0))
    throw DomainError("predict_terminal_sum: penalty weight must be positive");

  const Matrix& a = scenario.system.a;
  const double horizon_end = scenario.horizon_end;
  const Matrix wb =
      gramian(a, scenario.system.inputs[0], scenario.t0, horizon_end).value;
  const Matrix wc =
      gramian(a, scenario.system.inputs[1], scenario.t0, horizon_end).value;
  const Matrix core = penalty_core(a, horizon_end, mode);
  const double nu = scenario.targets.dims()[0];
  const double nv = scenario.targets.dims()[1];
  const Vector grand = target_sums(scenario.targets).grand;

  const Vector rhs =
      nu * nv * (mat_exp(a, -scenario.t0) * scenario.x0) +
      f * ((wb + wc) * (mat_exp(a.transpose(), horizon_end) * grand));
  return mat_exp(a.transpose(), -horizon_end) *
         solve_linear(core + f * (wb + wc), rhs);
}

Vector predict_terminal_large_f(const TargetTensor& targets, int i, int j) {
  if (targets.order() != 2)
    throw DimensionError("predict_terminal_large_f: order-2 tensor required");
  const int nu = targets.dims()[0];
  const int nv = targets.dims()[1];
  if (i < 0 || i >= nu || j < 0 || j >= nv)
    throw DomainError("predict_terminal_large_f: index out of range");
  const TargetSums sums = target_sums(targets);
  return sums.cols[j] / nu + sums.rows[i] / nv -
         sums.grand / (static_cast<double>(nu) * nv);
}

}  // namespace choicectl
