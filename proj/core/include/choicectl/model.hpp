#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "choicectl/numerics.hpp"

namespace choicectl {

/// Plant with one input matrix per agent: xdot = A x + sum_l B_l u_l.
struct LinearSystem {
  Matrix a;
  std::vector<Matrix> inputs;

  int state_dim() const { return static_cast<int>(a.rows()); }
  int agent_count() const { return static_cast<int>(inputs.size()); }
  int input_dim(int agent) const {
    return static_cast<int>(inputs.at(agent).cols());
  }
  void validate() const;
};

/// L-order tensor of terminal targets, one n-vector per choice tuple.
/// Entries are stored flat in row-major tuple order; choice indices are
/// 0-based in code.
class TargetTensor {
 public:
  TargetTensor() = default;
  TargetTensor(std::vector<int> dims, int state_dim);
  TargetTensor(std::vector<int> dims, std::vector<Vector> entries);

  int order() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  int state_dim() const { return state_dim_; }
  std::size_t entry_count() const { return entries_.size(); }

  std::size_t linear_index(const std::vector<int>& idx) const;
  std::vector<int> tuple_of(std::size_t linear) const;

  const Vector& at(const std::vector<int>& idx) const {
    return entries_[linear_index(idx)];
  }
  Vector& at(const std::vector<int>& idx) {
    return entries_[linear_index(idx)];
  }
  const Vector& flat(std::size_t k) const { return entries_.at(k); }
  Vector& flat(std::size_t k) { return entries_.at(k); }
  const std::vector<Vector>& entries() const { return entries_; }

  double max_abs() const;
  void validate() const;

 private:
  std::vector<int> dims_;
  int state_dim_ = 0;
  std::vector<Vector> entries_;
};

/// Band-limited disturbance description: piecewise-constant Gaussian noise
/// resampled every hold_interval. An empty channel list means all states.
struct NoiseConfig {
  double sigma = 0.0;
  double hold_interval = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> channels;
};

struct Scenario {
  LinearSystem system;
  double t0 = 0.0;
  double horizon_end = 1.0;
  Vector x0;
  TargetTensor targets;
  std::optional<double> switch_time;
  std::optional<double> penalty_weight;
  std::optional<NoiseConfig> noise;

  void validate() const;
};

/// The entries whose index tuple has at most one non-first component: the
/// base entry plus, per agent, one ray per remaining choice. These span a
/// compatible tensor.
struct GeneratorSet {
  Vector base;
  std::vector<std::vector<Vector>> rays;

  std::size_t size() const;
};

GeneratorSet generator_set(const TargetTensor& tensor);

/// Rebuilds the full tensor from its generators:
/// H_{i1..iL} = sum_l H_{1..il..1} - (L-1) H_{1..1}.
TargetTensor reconstruct(const GeneratorSet& generators,
                         const std::vector<int>& dims);

/// Max infinity-norm deviation between the tensor and the reconstruction
/// from its own generators; zero exactly for compatible tensors.
double compatibility_residual(const TargetTensor& tensor);

/// Default tolerance: 1e-9 relative to the largest entry, floored at 1e-12.
bool is_compatible(const TargetTensor& tensor);
bool is_compatible(const TargetTensor& tensor, double tol);

/// 1 + sum(N_l) - L independent terminal constraints.
int independent_constraint_count(const std::vector<int>& dims);

}  // namespace choicectl
