#pragma once

#include <stdexcept>
#include <string>

namespace choicectl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Out-of-range argument (time outside horizon, degenerate interval, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Overflow, non-finite values, quadrature that refuses to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

class CompatibilityError : public Error {
 public:
  CompatibilityError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class ControllabilityError : public Error {
 public:
  ControllabilityError(const std::string& what, int agent, double condition_estimate)
      : Error(what), agent_(agent), condition_estimate_(condition_estimate) {}
  int agent() const { return agent_; }
  double condition_estimate() const { return condition_estimate_; }

 private:
  int agent_;
  double condition_estimate_;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

}  // namespace choicectl
