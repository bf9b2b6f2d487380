#include "choicectl/gramian_table.hpp"

#include <algorithm>
#include <cmath>

namespace choicectl {

GramianTable::GramianTable(const Matrix& a, std::vector<Matrix> inputs,
                           std::vector<double> times)
    : times_(std::move(times)) {
  if (times_.size() < 2)
    throw DomainError("gramian table: need at least two grid times");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1]))
      throw DomainError("gramian table: times must be strictly increasing");
  lookup_tol_ = 1e-9 * (times_.back() - times_.front());

  const QuadRule& rule = gauss_legendre_rule(8);
  const Eigen::Index n = a.rows();
  values_.resize(inputs.size());
  for (std::size_t agent = 0; agent < inputs.size(); ++agent) {
    auto& w = values_[agent];
    w.assign(times_.size(), Matrix::Zero(n, n));
    // Backward cumulative sweep; each panel is one short Gauss-Legendre
    // integral, so the tail value at times_[k] is exact to roundoff.
    for (std::size_t k = times_.size() - 1; k-- > 0;) {
      const double lo = times_[k];
      const double width = times_[k + 1] - lo;
      Matrix panel = Matrix::Zero(n, n);
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double tau = lo + 0.5 * width * (rule.nodes[q] + 1.0);
        const Matrix x = mat_exp(a, -tau) * inputs[agent];
        panel.noalias() +=
            (0.5 * width * rule.weights[q]) * (x * x.transpose());
      }
      w[k] = w[k + 1] + panel;
    }
  }
}

std::optional<std::size_t> GramianTable::index_of(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t - lookup_tol_);
  if (it == times_.end()) return std::nullopt;
  if (std::abs(*it - t) > lookup_tol_) return std::nullopt;
  return static_cast<std::size_t>(it - times_.begin());
}

}  // namespace choicectl
