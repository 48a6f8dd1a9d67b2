#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace anticipate {

// Error categories used across the library.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major real array with an optional gradient buffer.
// 64-bit storage throughout; checkpoints serialize as f32.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless a gradient is attached

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != data.size())
      throw DimensionError("tensor: shape/data size mismatch");
  }

  static std::size_t numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = numel(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vec(std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

// Numerically stabilized softmax (max-subtraction).
inline std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw InputError("softmax: empty input");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

constexpr double kProbFloor = 1e-12;

inline double cross_entropy(const std::vector<double>& probs, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= probs.size())
    throw InputError("cross_entropy: target out of range");
  return -std::log(std::max(probs[static_cast<std::size_t>(target)], kProbFloor));
}

inline double mse(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty())
    throw DimensionError("mse: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

}  // namespace anticipate
