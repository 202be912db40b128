#pragma once

#include "magna/params.hpp"

#include <map>
#include <string>

namespace magna {

struct AdamOptions {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;  // decoupled: p *= (1 - lr * wd) before the Adam delta
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  long step = 0;
  std::map<std::string, Matrix> first_moment;
  std::map<std::string, Matrix> second_moment;
};

// One bias-corrected Adam update of every parameter from its .grad. If any
// gradient is non-finite, nothing is modified and NumericError names the
// offending parameter.
void adam_step(ParamStore& params, AdamState& state);

}  // namespace magna
