#include "magna/adam.hpp"

#include <cmath>

namespace magna {

void adam_step(ParamStore& params, AdamState& state) {
  for (const auto& [name, p] : params) {
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + name);
    }
    if (!p.grad.allFinite()) throw NumericError("adam_step: non-finite gradient in " + name);
  }

  const AdamOptions& o = state.options;
  ++state.step;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  const double shrink = 1.0 - o.learning_rate * o.weight_decay;

  for (auto& [name, p] : params) {
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.size() == 0) {
      m.setZero(p.value.rows(), p.value.cols());
      v.setZero(p.value.rows(), p.value.cols());
    }
    m = o.beta1 * m + (1.0 - o.beta1) * p.grad;
    v = o.beta2 * v + (1.0 - o.beta2) * p.grad.cwiseProduct(p.grad);
    if (o.weight_decay != 0.0) p.value *= shrink;
    p.value.array() -=
        o.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + o.eps);
  }
}

}  // namespace magna
