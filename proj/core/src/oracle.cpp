#include "choicectl/oracle.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace choicectl {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform_pm1(std::uint64_t& state) {
  state += kGolden;
  return 2.0 * (static_cast<double>(mix64(state) >> 11) * 0x1.0p-53) - 1.0;
}

const Vector& generator_entry(const GeneratorSet& g, int agent, int choice) {
  return choice == 0 ? g.base : g.rays[agent][choice - 1];
}

void require_compatible(const Scenario& scenario, const char* who) {
  const double residual = compatibility_residual(scenario.targets);
  const double tol = std::max(1e-9 * scenario.targets.max_abs(), 1e-12);
  if (residual > tol)
    throw CompatibilityError(std::string(who) + ": incompatible targets",
                             residual);
}

std::vector<Matrix> agent_gramians(const Scenario& scenario,
                                   const char* who) {
  std::vector<Matrix> w;
  for (int l = 0; l < scenario.system.agent_count(); ++l) {
    const auto report =
        check_controllable(scenario.system.a, scenario.system.inputs[l],
                           scenario.t0, scenario.horizon_end);
    if (!report.controllable)
      throw ControllabilityError(
          std::string(who) + ": system not controllable by agent " +
              std::to_string(l + 1),
          l, report.condition_estimate);
    w.push_back(gramian(scenario.system.a, scenario.system.inputs[l],
                        scenario.t0, scenario.horizon_end)
                    .value);
  }
  return w;
}

// Variable block offsets: agent-major, choice-minor, block size n.
std::vector<int> choice_offsets(const std::vector<int>& dims) {
  std::vector<int> offsets(dims.size() + 1, 0);
  for (std::size_t l = 0; l < dims.size(); ++l)
    offsets[l + 1] = offsets[l] + dims[l];
  return offsets;
}

// Shared quadratic minimizer for the penalized two-agent problems:
//   min (1/Nu) sum_i p_i^T Ru p_i + (1/Nv) sum_j q_j^T Rv q_j
//       + (f/(Nu Nv)) sum_ij || G p_i + K q_j - r_ij ||^2
struct PenalizedQuadratic {
  std::vector<Vector> p, q;
  double energy = 0.0;
  double mean_square_error = 0.0;
  std::vector<std::vector<Vector>> reached;  // G p_i + K q_j per (i, j)
};

PenalizedQuadratic minimize_penalized(const Matrix& ru, const Matrix& rv,
                                      const Matrix& g, const Matrix& k,
                                      const TargetTensor& targets,
                                      const Vector& drift, double f) {
  const int nu = targets.dims()[0];
  const int nv = targets.dims()[1];
  const auto pu = static_cast<int>(g.cols());
  const auto pv = static_cast<int>(k.cols());
  const int total = nu * pu + nv * pv;

  std::vector<Vector> r(static_cast<std::size_t>(nu) * nv);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j)
      r[i * nv + j] = targets.at({i, j}) - drift;

  Matrix lhs = Matrix::Zero(total, total);
  Vector rhs = Vector::Zero(total);
  const Matrix app = (2.0 / nu) * ru + (2.0 * f / nu) * (g.transpose() * g);
  const Matrix aqq = (2.0 / nv) * rv + (2.0 * f / nv) * (k.transpose() * k);
  const Matrix apq = (2.0 * f / (nu * nv)) * (g.transpose() * k);
  for (int i = 0; i < nu; ++i) {
    lhs.block(i * pu, i * pu, pu, pu) = app;
    Vector row_sum = Vector::Zero(drift.size());
    for (int j = 0; j < nv; ++j) row_sum += r[i * nv + j];
    rhs.segment(i * pu, pu) =
        (2.0 * f / (nu * nv)) * (g.transpose() * row_sum);
  }
  for (int j = 0; j < nv; ++j) {
    const int base = nu * pu + j * pv;
    lhs.block(base, base, pv, pv) = aqq;
    Vector col_sum = Vector::Zero(drift.size());
    for (int i = 0; i < nu; ++i) col_sum += r[i * nv + j];
    rhs.segment(base, pv) =
        (2.0 * f / (nu * nv)) * (k.transpose() * col_sum);
  }
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      lhs.block(i * pu, nu * pu + j * pv, pu, pv) = apq;
      lhs.block(nu * pu + j * pv, i * pu, pv, pu) = apq.transpose();
    }

  const Vector sol = solve_linear(lhs, rhs);

  PenalizedQuadratic out;
  out.p.resize(nu);
  out.q.resize(nv);
  for (int i = 0; i < nu; ++i) out.p[i] = sol.segment(i * pu, pu);
  for (int j = 0; j < nv; ++j)
    out.q[j] = sol.segment(nu * pu + j * pv, pv);

  out.reached.assign(nu, std::vector<Vector>(nv));
  for (int i = 0; i < nu; ++i) out.energy += out.p[i].dot(ru * out.p[i]) / nu;
  for (int j = 0; j < nv; ++j) out.energy += out.q[j].dot(rv * out.q[j]) / nv;
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      out.reached[i][j] = g * out.p[i] + k * out.q[j];
      out.mean_square_error +=
          (out.reached[i][j] - r[i * nv + j]).squaredNorm() / (nu * nv);
    }
  return out;
}

// Per-segment reachability maps int_{tau_s}^{tau_{s+1}} e^{A(T-tau)} B dtau.
std::vector<Matrix> segment_maps(const Matrix& a, const Matrix& b, double t0,
                                 double horizon_end, int segments) {
  const QuadRule& rule = gauss_legendre_rule(16);
  const double width = (horizon_end - t0) / segments;
  std::vector<Matrix> maps(segments);
  for (int s = 0; s < segments; ++s) {
    const double lo = t0 + s * width;
    Matrix phi = Matrix::Zero(a.rows(), b.cols());
    for (std::size_t qn = 0; qn < rule.nodes.size(); ++qn) {
      const double tau = lo + 0.5 * width * (rule.nodes[qn] + 1.0);
      phi.noalias() += (0.5 * width * rule.weights[qn]) *
                       (mat_exp(a, horizon_end - tau) * b);
    }
    maps[s] = phi;
  }
  return maps;
}

}  // namespace

Matrix constraint_matrix(const Scenario& scenario,
                         const std::vector<Matrix>& gramians) {
  const std::vector<int>& dims = scenario.targets.dims();
  const int agents = static_cast<int>(dims.size());
  const int n = scenario.system.state_dim();
  const std::vector<int> offsets = choice_offsets(dims);
  const int vars = offsets.back();
  const int constraints = independent_constraint_count(dims);

  Matrix e = Matrix::Zero(constraints * n, vars * n);
  // Constraint 0: all agents at their first choice.
  for (int l = 0; l < agents; ++l)
    e.block(0, offsets[l] * n, n, n) = gramians[l];
  // One constraint per agent per non-first choice.
  int row = 1;
  for (int l = 0; l < agents; ++l)
    for (int i = 1; i < dims[l]; ++i, ++row) {
      e.block(row * n, (offsets[l] + i) * n, n, n) = gramians[l];
      for (int k = 0; k < agents; ++k)
        if (k != l) e.block(row * n, offsets[k] * n, n, n) = gramians[k];
    }
  return e;
}

KktSolution kkt_solve(const Scenario& scenario) {
  scenario.validate();
  require_compatible(scenario, "kkt_solve");
  const std::vector<Matrix> w = agent_gramians(scenario, "kkt_solve");

  const std::vector<int>& dims = scenario.targets.dims();
  const int agents = static_cast<int>(dims.size());
  const int n = scenario.system.state_dim();
  const std::vector<int> offsets = choice_offsets(dims);
  const int vars = offsets.back() * n;
  const int constraints = independent_constraint_count(dims) * n;

  const Matrix e = constraint_matrix(scenario, w);
  {
    Eigen::JacobiSVD<Matrix> svd(e);
    const int rank = static_cast<int>(svd.rank());
    if (rank < constraints)
      throw SingularityError(
          "kkt_solve: generator constraints rank-deficient (rank " +
              std::to_string(rank) + " of " + std::to_string(constraints) +
              ")",
          std::numeric_limits<double>::infinity());
  }

  Matrix d = Matrix::Zero(vars, vars);
  for (int l = 0; l < agents; ++l)
    for (int i = 0; i < dims[l]; ++i)
      d.block((offsets[l] + i) * n, (offsets[l] + i) * n, n, n) =
          w[l] / dims[l];

  const GeneratorSet gen = generator_set(scenario.targets);
  const Matrix exp_back = mat_exp(scenario.system.a, -scenario.horizon_end);
  const Vector x0_back = mat_exp(scenario.system.a, -scenario.t0) * scenario.x0;
  Vector h(constraints);
  h.segment(0, n) = exp_back * gen.base - x0_back;
  int row = 1;
  for (int l = 0; l < agents; ++l)
    for (int i = 1; i < dims[l]; ++i, ++row)
      h.segment(row * n, n) = exp_back * generator_entry(gen, l, i) - x0_back;

  Matrix kkt = Matrix::Zero(vars + constraints, vars + constraints);
  kkt.topLeftCorner(vars, vars) = 2.0 * d;
  kkt.topRightCorner(vars, constraints) = e.transpose();
  kkt.bottomLeftCorner(constraints, vars) = e;
  Vector rhs = Vector::Zero(vars + constraints);
  rhs.tail(constraints) = h;

  const Vector sol = solve_linear(kkt, rhs);
  const Vector z = sol.head(vars);
  const Vector lambda = sol.tail(constraints);

  KktSolution out;
  out.params.resize(agents);
  for (int l = 0; l < agents; ++l) {
    out.params[l].resize(dims[l]);
    for (int i = 0; i < dims[l]; ++i)
      out.params[l][i] = z.segment((offsets[l] + i) * n, n);
  }
  out.multipliers.resize(constraints / n);
  for (int c = 0; c < constraints / n; ++c)
    out.multipliers[c] = lambda.segment(c * n, n);
  out.objective = z.dot(d * z);
  out.constraint_residual = (e * z - h).cwiseAbs().maxCoeff();
  out.stationarity_residual =
      (2.0 * d * z + e.transpose() * lambda).cwiseAbs().maxCoeff();
  out.constraint_rank = constraints;
  return out;
}

PenalizedSolution penalized_solve(const Scenario& scenario, double f) {
  scenario.validate();
  if (!(f > 0.0))
    throw DomainError("penalized_solve: penalty weight must be positive");
  if (scenario.system.agent_count() != 2)
    throw ConfigurationError("penalized_solve: exactly two agents required");
  if (scenario.targets.order() != 2)
    throw ConfigurationError("penalized_solve: order-2 target tensor required");

  const Matrix& a = scenario.system.a;
  const Matrix wb =
      gramian(a, scenario.system.inputs[0], scenario.t0, scenario.horizon_end)
          .value;
  const Matrix wc =
      gramian(a, scenario.system.inputs[1], scenario.t0, scenario.horizon_end)
          .value;
  const Matrix exp_fwd = mat_exp(a, scenario.horizon_end);
  const Matrix g = exp_fwd * wb;
  const Matrix k = exp_fwd * wc;
  const Vector drift =
      mat_exp(a, scenario.horizon_end - scenario.t0) * scenario.x0;

  const PenalizedQuadratic sol =
      minimize_penalized(wb, wc, g, k, scenario.targets, drift, f);

  PenalizedSolution out;
  out.p = sol.p;
  out.q = sol.q;
  out.control_energy = sol.energy;
  out.mean_square_terminal_error = sol.mean_square_error;
  out.objective = sol.energy + f * sol.mean_square_error;
  const int nu = scenario.targets.dims()[0];
  const int nv = scenario.targets.dims()[1];
  out.terminals.assign(nu, std::vector<Vector>(nv));
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j)
      out.terminals[i][j] = drift + sol.reached[i][j];
  return out;
}

double stationarity_check(const OpenLoopLaw& law, const Scenario& scenario,
                          int directions, std::uint64_t seed) {
  const std::vector<int>& dims = scenario.targets.dims();
  const int agents = static_cast<int>(dims.size());
  const int n = scenario.system.state_dim();
  const std::vector<int> offsets = choice_offsets(dims);
  const int vars = offsets.back() * n;

  const Matrix e = constraint_matrix(scenario, law.gramians);
  Vector z(vars);
  for (int l = 0; l < agents; ++l)
    for (int i = 0; i < dims[l]; ++i)
      z.segment((offsets[l] + i) * n, n) = law.params[l][i];

  Matrix d = Matrix::Zero(vars, vars);
  for (int l = 0; l < agents; ++l)
    for (int i = 0; i < dims[l]; ++i)
      d.block((offsets[l] + i) * n, (offsets[l] + i) * n, n, n) =
          law.gramians[l] / dims[l];

  auto objective = [&](const Vector& v) { return v.dot(d * v); };
  const Matrix eet = e * e.transpose();
  const double eps = 1e-6 * (1.0 + z.norm());

  std::uint64_t state = seed;
  double worst = 0.0;
  for (int trial = 0; trial < directions; ++trial) {
    Vector v(vars);
    for (int c = 0; c < vars; ++c) v(c) = uniform_pm1(state);
    Vector delta = v - e.transpose() * solve_linear(eet, e * v);
    const double norm = delta.norm();
    if (norm < 1e-12) continue;
    delta /= norm;
    const double slope =
        (objective(z + eps * delta) - objective(z - eps * delta)) /
        (2.0 * eps);
    worst = std::max(worst, std::abs(slope));
  }
  return worst;
}

double discretized_min_cost(const Scenario& scenario, int segments) {
  scenario.validate();
  require_compatible(scenario, "discretized_min_cost");
  if (segments < 1)
    throw DomainError("discretized_min_cost: need at least one segment");

  const std::vector<int>& dims = scenario.targets.dims();
  const int agents = static_cast<int>(dims.size());
  const int n = scenario.system.state_dim();
  const double width =
      (scenario.horizon_end - scenario.t0) / segments;

  std::vector<std::vector<Matrix>> phi(agents);
  std::vector<int> block(agents);  // per-(agent, choice) variable width
  for (int l = 0; l < agents; ++l) {
    phi[l] = segment_maps(scenario.system.a, scenario.system.inputs[l],
                          scenario.t0, scenario.horizon_end, segments);
    block[l] = segments * scenario.system.input_dim(l);
  }
  const std::vector<int> offsets = choice_offsets(dims);
  std::vector<int> var_base(offsets.size(), 0);  // per (agent,choice) slot
  int vars = 0;
  std::vector<int> slot_base;
  for (int l = 0; l < agents; ++l)
    for (int i = 0; i < dims[l]; ++i) {
      slot_base.push_back(vars);
      vars += block[l];
    }

  auto slot = [&](int l, int i) { return slot_base[offsets[l] + i]; };

  // Stacked per-slot reachability map (n x block[l]).
  std::vector<Matrix> reach(agents);
  for (int l = 0; l < agents; ++l) {
    const int m = scenario.system.input_dim(l);
    reach[l] = Matrix::Zero(n, block[l]);
    for (int s = 0; s < segments; ++s)
      reach[l].block(0, s * m, n, m) = phi[l][s];
  }

  const int coun = independent_constraint_count(dims) * n;
  Matrix e = Matrix::Zero(coun, vars);
  const GeneratorSet gen = generator_set(scenario.targets);
  const Vector drift =
      mat_exp(scenario.system.a, scenario.horizon_end - scenario.t0) *
      scenario.x0;
  Vector h(coun);
  for (int l = 0; l < agents; ++l)
    e.block(0, slot(l, 0), n, block[l]) = reach[l];
  h.segment(0, n) = gen.base - drift;
  int row = 1;
  for (int l = 0; l < agents; ++l)
    for (int i = 1; i < dims[l]; ++i, ++row) {
      e.block(row * n, slot(l, i), n, block[l]) = reach[l];
      for (int k = 0; k < agents; ++k)
        if (k != l) e.block(row * n, slot(k, 0), n, block[k]) = reach[k];
      h.segment(row * n, n) = generator_entry(gen, l, i) - drift;
    }

  Vector d_diag(vars);
  for (int l = 0; l < agents; ++l)
    for (int i = 0; i < dims[l]; ++i)
      d_diag.segment(slot(l, i), block[l])
          .setConstant(width / dims[l]);

  Matrix kkt = Matrix::Zero(vars + coun, vars + coun);
  kkt.topLeftCorner(vars, vars) = (2.0 * d_diag).asDiagonal();
  kkt.topRightCorner(vars, coun) = e.transpose();
  kkt.bottomLeftCorner(coun, vars) = e;
  Vector rhs = Vector::Zero(vars + coun);
  rhs.tail(coun) = h;
  const Vector sol = solve_linear(kkt, rhs);
  const Vector z = sol.head(vars);
  return z.dot(d_diag.asDiagonal() * z);
}

double discretized_penalized_cost(const Scenario& scenario, double f,
                                  int segments) {
  scenario.validate();
  if (!(f > 0.0))
    throw DomainError("discretized_penalized_cost: need f > 0");
  if (scenario.system.agent_count() != 2)
    throw ConfigurationError(
        "discretized_penalized_cost: exactly two agents required");
  if (segments < 1)
    throw DomainError("discretized_penalized_cost: need at least one segment");

  const int n = scenario.system.state_dim();
  const double width = (scenario.horizon_end - scenario.t0) / segments;
  const int mu = scenario.system.input_dim(0);
  const int mv = scenario.system.input_dim(1);

  auto stack = [&](int agent, int m) {
    const auto maps =
        segment_maps(scenario.system.a, scenario.system.inputs[agent],
                     scenario.t0, scenario.horizon_end, segments);
    Matrix out = Matrix::Zero(n, segments * m);
    for (int s = 0; s < segments; ++s)
      out.block(0, s * m, n, m) = maps[s];
    return out;
  };
  const Matrix g = stack(0, mu);
  const Matrix k = stack(1, mv);
  const Matrix ru = width * Matrix::Identity(segments * mu, segments * mu);
  const Matrix rv = width * Matrix::Identity(segments * mv, segments * mv);
  const Vector drift =
      mat_exp(scenario.system.a, scenario.horizon_end - scenario.t0) *
      scenario.x0;

  const PenalizedQuadratic sol =
      minimize_penalized(ru, rv, g, k, scenario.targets, drift, f);
  return sol.energy + f * sol.mean_square_error;
}

}  // namespace choicectl
