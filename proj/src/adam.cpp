#include "lulc/adam.hpp"

#include <cmath>

namespace lulc {

AdamState make_adam_state(const ParameterStore<float>& store, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& p : store)
    if (p.trainable) {
      s.m.emplace_back(p.value.shape());
      s.v.emplace_back(p.value.shape());
    }
  return s;
}

void adam_step(ParameterStore<float>& store, AdamState& state) {
  ++state.t;
  const double b1 = state.config.beta1, b2 = state.config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  std::size_t slot = 0;
  for (auto& p : store) {
    if (!p.trainable) continue;
    if (slot >= state.m.size() || state.m[slot].shape() != p.value.shape())
      throw UsageError("Adam state does not match parameter " + p.name);
    if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
    Tensor& m = state.m[slot];
    Tensor& v = state.v[slot];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double step = state.config.lr * (mi / c1) / (std::sqrt(vi / c2) + state.config.eps);
      p.value[i] = static_cast<float>(p.value[i] - step);
    }
    ++slot;
  }
}

}  // namespace lulc
