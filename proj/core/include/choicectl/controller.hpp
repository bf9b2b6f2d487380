#pragma once

#include <vector>

#include "choicectl/numerics.hpp"

namespace choicectl {

/// Anything the simulator can drive: returns one control vector per agent.
/// on_sample is invoked at every accepted integration point in time order
/// (starting with t0) and may update internal mode state, e.g. a hybrid
/// switch; controls() must stay pure between samples.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::vector<Vector> controls(double t, const Vector& x) = 0;
  virtual void on_sample(double /*t*/, const Vector& /*x*/) {}
};

}  // namespace choicectl
