#include "anticipate/adam.hpp"

#include <cmath>

namespace anticipate {

void adam_step(ModelParams& params, const GradMap& grads, AdamState& state) {
  state.step += 1;
  double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& name : params.names) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    Tensor& t = params.at(name);
    const auto& g = git->second;
    if (g.size() != t.size()) throw DimensionError("adam_step: grad shape mismatch for " + name);
    auto& mom = state.moments[name];
    if (mom.m.size() != t.size()) {
      mom.m.assign(t.size(), 0.0);
      mom.v.assign(t.size(), 0.0);
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      mom.m[i] = state.beta1 * mom.m[i] + (1.0 - state.beta1) * g[i];
      mom.v[i] = state.beta2 * mom.v[i] + (1.0 - state.beta2) * g[i] * g[i];
      double mhat = mom.m[i] / b1t;
      double vhat = mom.v[i] / b2t;
      t.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace anticipate
