#include "choicectl/model.hpp"

#include <algorithm>
#include <cmath>

namespace choicectl {

void LinearSystem::validate() const {
  if (a.rows() != a.cols())
    throw DimensionError("system: A must be square");
  if (!a.allFinite()) throw NumericError("system: A has non-finite entries");
  if (inputs.empty())
    throw DimensionError("system: at least one agent input matrix required");
  for (std::size_t l = 0; l < inputs.size(); ++l) {
    if (inputs[l].rows() != a.rows())
      throw DimensionError("system: B_" + std::to_string(l + 1) +
                           " row count must equal the state dimension");
    if (inputs[l].cols() < 1)
      throw DimensionError("system: B_" + std::to_string(l + 1) +
                           " needs at least one column");
    if (!inputs[l].allFinite())
      throw NumericError("system: B_" + std::to_string(l + 1) +
                         " has non-finite entries");
  }
}

TargetTensor::TargetTensor(std::vector<int> dims, int state_dim)
    : dims_(std::move(dims)), state_dim_(state_dim) {
  std::size_t count = 1;
  for (int d : dims_) {
    if (d < 1) throw DimensionError("tensor: every choice count must be >= 1");
    count *= static_cast<std::size_t>(d);
  }
  entries_.assign(count, Vector::Zero(state_dim_));
}

TargetTensor::TargetTensor(std::vector<int> dims, std::vector<Vector> entries)
    : dims_(std::move(dims)), entries_(std::move(entries)) {
  std::size_t count = 1;
  for (int d : dims_) {
    if (d < 1) throw DimensionError("tensor: every choice count must be >= 1");
    count *= static_cast<std::size_t>(d);
  }
  if (entries_.size() != count)
    throw DimensionError("tensor: entry count must equal the product of dims");
  state_dim_ = entries_.empty() ? 0 : static_cast<int>(entries_.front().size());
  validate();
}

std::size_t TargetTensor::linear_index(const std::vector<int>& idx) const {
  if (idx.size() != dims_.size())
    throw DimensionError("tensor: index order mismatch");
  std::size_t linear = 0;
  for (std::size_t l = 0; l < dims_.size(); ++l) {
    if (idx[l] < 0 || idx[l] >= dims_[l])
      throw DomainError("tensor: choice index out of range");
    linear = linear * static_cast<std::size_t>(dims_[l]) +
             static_cast<std::size_t>(idx[l]);
  }
  return linear;
}

std::vector<int> TargetTensor::tuple_of(std::size_t linear) const {
  std::vector<int> idx(dims_.size(), 0);
  for (std::size_t l = dims_.size(); l-- > 0;) {
    idx[l] = static_cast<int>(linear % static_cast<std::size_t>(dims_[l]));
    linear /= static_cast<std::size_t>(dims_[l]);
  }
  return idx;
}

double TargetTensor::max_abs() const {
  double m = 0.0;
  for (const Vector& v : entries_)
    if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

void TargetTensor::validate() const {
  for (const Vector& v : entries_) {
    if (static_cast<int>(v.size()) != state_dim_)
      throw DimensionError("tensor: all target vectors must share one length");
    if (!v.allFinite())
      throw NumericError("tensor: non-finite target entry");
  }
}

void Scenario::validate() const {
  system.validate();
  if (!(t0 < horizon_end)) throw DomainError("scenario: need t0 < T");
  if (static_cast<int>(x0.size()) != system.state_dim())
    throw DimensionError("scenario: x0 length must equal the state dimension");
  if (!x0.allFinite()) throw NumericError("scenario: non-finite x0");
  targets.validate();
  if (targets.state_dim() != system.state_dim())
    throw DimensionError(
        "scenario: target vectors must match the state dimension");
  if (switch_time &&
      !(t0 < *switch_time && *switch_time < horizon_end))
    throw DomainError("scenario: switch time must lie strictly inside (t0, T)");
  if (penalty_weight && !(*penalty_weight > 0.0))
    throw DomainError("scenario: penalty weight must be positive");
  if (noise) {
    if (noise->sigma < 0.0) throw DomainError("scenario: noise sigma < 0");
    if (!(noise->hold_interval > 0.0))
      throw DomainError("scenario: noise hold interval must be positive");
    for (int c : noise->channels)
      if (c < 0 || c >= system.state_dim())
        throw DomainError("scenario: noise channel out of range");
  }
}

std::size_t GeneratorSet::size() const {
  std::size_t s = 1;
  for (const auto& r : rays) s += r.size();
  return s;
}

GeneratorSet generator_set(const TargetTensor& tensor) {
  const int order = tensor.order();
  GeneratorSet g;
  std::vector<int> idx(order, 0);
  g.base = tensor.at(idx);
  g.rays.resize(order);
  for (int l = 0; l < order; ++l) {
    g.rays[l].reserve(static_cast<std::size_t>(tensor.dims()[l] - 1));
    for (int i = 1; i < tensor.dims()[l]; ++i) {
      idx.assign(order, 0);
      idx[l] = i;
      g.rays[l].push_back(tensor.at(idx));
    }
  }
  return g;
}

TargetTensor reconstruct(const GeneratorSet& generators,
                         const std::vector<int>& dims) {
  if (generators.rays.size() != dims.size())
    throw DimensionError("reconstruct: generator set order mismatch");
  for (std::size_t l = 0; l < dims.size(); ++l)
    if (static_cast<int>(generators.rays[l].size()) != dims[l] - 1)
      throw DimensionError("reconstruct: ray count mismatch for agent " +
                           std::to_string(l + 1));

  const int order = static_cast<int>(dims.size());
  TargetTensor out(dims, static_cast<int>(generators.base.size()));
  const std::size_t count = out.entry_count();
  for (std::size_t k = 0; k < count; ++k) {
    const std::vector<int> idx = out.tuple_of(k);
    Vector v = (1 - order) * generators.base;
    for (int l = 0; l < order; ++l)
      v += idx[l] == 0 ? generators.base : generators.rays[l][idx[l] - 1];
    out.flat(k) = v;
  }
  return out;
}

double compatibility_residual(const TargetTensor& tensor) {
  const TargetTensor rebuilt =
      reconstruct(generator_set(tensor), tensor.dims());
  double residual = 0.0;
  for (std::size_t k = 0; k < tensor.entry_count(); ++k) {
    const Vector diff = tensor.flat(k) - rebuilt.flat(k);
    if (diff.size() > 0)
      residual = std::max(residual, diff.cwiseAbs().maxCoeff());
  }
  return residual;
}

bool is_compatible(const TargetTensor& tensor) {
  const double tol = std::max(1e-9 * tensor.max_abs(), 1e-12);
  return is_compatible(tensor, tol);
}

bool is_compatible(const TargetTensor& tensor, double tol) {
  if (tol < 0.0) throw DomainError("is_compatible: tolerance must be >= 0");
  return compatibility_residual(tensor) <= tol;
}

int independent_constraint_count(const std::vector<int>& dims) {
  int count = 1 - static_cast<int>(dims.size());
  for (int d : dims) {
    if (d < 1) throw DimensionError("dims: every choice count must be >= 1");
    count += d;
  }
  return count;
}

}  // namespace choicectl
