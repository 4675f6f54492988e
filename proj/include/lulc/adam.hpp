#pragma once

#include <cstdint>
#include <vector>

#include "lulc/tape.hpp"

namespace lulc {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators, one per trainable parameter in store order.
struct AdamState {
  AdamConfig config;
  std::int64_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

AdamState make_adam_state(const ParameterStore<float>& store, AdamConfig config = {});

// One bias-corrected Adam update of every trainable parameter from its grad.
void adam_step(ParameterStore<float>& store, AdamState& state);

}  // namespace lulc
