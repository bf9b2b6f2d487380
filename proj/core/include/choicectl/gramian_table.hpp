#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "choicectl/numerics.hpp"

namespace choicectl {

/// Remaining-horizon Gramians W(t) = int_t^T e^{-As} B B^T e^{-A^T s} ds
/// precomputed on a fixed time grid by one backward cumulative sweep, so
/// that simulation loops do not re-run the adaptive quadrature at every
/// stage time. Values agree with the direct quadrature path to well below
/// 1e-10 (tested).
class GramianTable {
 public:
  /// times must be strictly increasing; the last entry is the horizon end.
  GramianTable(const Matrix& a, std::vector<Matrix> inputs,
               std::vector<double> times);

  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }

  /// Index of a grid time, or nullopt if t is not (within rounding) on the
  /// grid.
  std::optional<std::size_t> index_of(double t) const;

  const Matrix& remaining(int agent, std::size_t index) const {
    return values_[static_cast<std::size_t>(agent)][index];
  }

 private:
  std::vector<double> times_;
  std::vector<std::vector<Matrix>> values_;  // [agent][grid index]
  double lookup_tol_ = 0.0;
};

}  // namespace choicectl
