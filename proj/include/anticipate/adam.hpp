#pragma once

#include <cstdint>
#include <unordered_map>

#include "anticipate/model.hpp"

namespace anticipate {

// Adam with bias correction. The learning-rate schedule is applied by the
// caller via `lr` before each update.
struct AdamState {
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  struct Moments {
    std::vector<double> m, v;
  };
  std::unordered_map<std::string, Moments> moments;
};

// One update over every parameter that has a gradient entry. Parameters
// without a gradient (disabled modules) are untouched.
void adam_step(ModelParams& params, const GradMap& grads, AdamState& state);

}  // namespace anticipate
