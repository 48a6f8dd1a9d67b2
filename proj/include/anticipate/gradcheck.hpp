#pragma once

#include <functional>

#include "anticipate/model.hpp"

namespace anticipate {

// Compares analytic gradients against central finite differences
// (f(w+eps) - f(w-eps)) / 2eps for every scalar parameter. The callable must
// return the loss; when `grads` is non-null it must also fill analytic
// gradients. Returns the worst relative error
// max(|a - n| / max(|a|, |n|, 1e-8)).
inline double grad_check(
    ModelParams& params,
    const std::function<double(const ModelParams&, GradMap*)>& loss_fn,
    double eps = 1e-5) {
  GradMap analytic;
  loss_fn(params, &analytic);
  double worst = 0.0;
  for (const auto& name : params.names) {
    Tensor& t = params.at(name);
    auto it = analytic.find(name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      double saved = t.data[i];
      t.data[i] = saved + eps;
      double fp = loss_fn(params, nullptr);
      t.data[i] = saved - eps;
      double fm = loss_fn(params, nullptr);
      t.data[i] = saved;
      double numeric = (fp - fm) / (2.0 * eps);
      double a = (it != analytic.end() && i < it->second.size()) ? it->second[i] : 0.0;
      double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace anticipate
