#pragma once

#include <cstdint>
#include <vector>

#include "choicectl/model.hpp"
#include "choicectl/open_loop.hpp"

namespace choicectl {

/// Brute-force minimizer of the choice-averaged quadratic cost subject to
/// the full generator constraint list, solved as one symmetric KKT system
/// without the pivot-agent reduction. Used to verify the synthesis path.
struct KktSolution {
  std::vector<std::vector<Vector>> params;  // [agent][choice]
  std::vector<Vector> multipliers;          // one per constraint block
  double objective = 0.0;
  double constraint_residual = 0.0;     // ||E z - h||_inf
  double stationarity_residual = 0.0;   // ||2 D z + E^T lambda||_inf
  int constraint_rank = 0;
};

KktSolution kkt_solve(const Scenario& scenario);

/// Direct minimizer of the penalized objective over the parametric family
/// u_i = B^T e^{-A^T t} p_i, v_j = C^T e^{-A^T t} q_j (two agents).
struct PenalizedSolution {
  std::vector<Vector> p;  // per u-choice
  std::vector<Vector> q;  // per v-choice
  std::vector<std::vector<Vector>> terminals;  // x_ij(T)
  double control_energy = 0.0;
  double mean_square_terminal_error = 0.0;
  double objective = 0.0;  // energy + f * mean squared error
};

PenalizedSolution penalized_solve(const Scenario& scenario, double f);

/// Max first-order change of the averaged cost along random directions in
/// the constraint null space, by exact central differences; near zero at
/// the optimum.
double stationarity_check(const OpenLoopLaw& law, const Scenario& scenario,
                          int directions, std::uint64_t seed = 12345);

/// Coarse fallback oracle over piecewise-constant controls (`segments` per
/// agent and choice); its optimum must land within about 1% of the
/// parametric one.
double discretized_min_cost(const Scenario& scenario, int segments);
double discretized_penalized_cost(const Scenario& scenario, double f,
                                  int segments);

/// Generator-constraint matrix (the rows the KKT system enforces); exposed
/// so tests can probe its rank independently.
Matrix constraint_matrix(const Scenario& scenario,
                         const std::vector<Matrix>& gramians);

}  // namespace choicectl
