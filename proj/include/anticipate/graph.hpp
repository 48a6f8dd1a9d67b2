#pragma once

#include <functional>
#include <vector>

#include "anticipate/tensor.hpp"

namespace anticipate {

// Reverse-mode tape. Nodes are appended in topological order during the
// forward pass; backward() walks the tape in reverse. One Graph per sample.
class Graph {
 public:
  using Ref = int;

  struct GruRefs {
    Ref Wz, Uz, bz;
    Ref Wr, Ur, br;
    Ref Wh, Uh, bh;
  };

  Ref constant(Tensor v) { return make(std::move(v), false, {}); }
  Ref param(const Tensor& v) { return make(v, true, {}); }

  const Tensor& value(Ref r) const { return nodes_[static_cast<std::size_t>(r)].value; }
  const std::vector<double>& grad(Ref r) const {
    return nodes_[static_cast<std::size_t>(r)].grad;
  }
  std::size_t num_nodes() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates through the tape.
  void backward(Ref loss);

  // --- elementwise / shape ---
  Ref add(Ref a, Ref b);
  Ref sub(Ref a, Ref b);
  Ref mul(Ref a, Ref b);
  Ref scale(Ref a, double s);
  Ref sigmoid(Ref a);
  Ref tanh_op(Ref a);
  Ref relu(Ref a);
  Ref concat(const std::vector<Ref>& parts);       // 1-D concat
  Ref concat_cols(const std::vector<Ref>& cols);   // m-vectors -> m x t
  Ref col(Ref m, std::size_t j);                   // column slice -> vector

  // --- linear algebra ---
  Ref matvec(Ref w, Ref x);   // (m x n)(n) -> m
  Ref matmul(Ref a, Ref b);   // (m x k)(k x n) -> m x n
  Ref vecmat(Ref x, Ref a);   // x^T A: (m)(m x n) -> n
  Ref add_bias_cols(Ref m, Ref b);  // (m x t) + b per column
  Ref normalize_l2(Ref v);          // v / max(|v|, 1e-8)
  Ref normalize_cols(Ref m);        // per-column L2 normalization

  // --- reductions / losses ---
  Ref sum(Ref v);
  Ref mean(Ref v);
  Ref dot(Ref a, Ref b);
  Ref softmax_op(Ref logits);                // 1-D, max-stabilized
  Ref softmax_cols(Ref logits);              // per column
  Ref nll_softmax(Ref logits, int target);   // -log softmax(logits)[target]
  Ref mse_loss(Ref pred, Ref target);

  // --- fused network ops ---
  // h' = (1-z) o h + z o tanh(Wh x + Uh (r o h) + bh),
  // z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br).
  Ref gru_cell(Ref x, Ref h_prev, const GruRefs& w);

  // Centered dilated conv, kernel size 3, zero padding of width `dilation`.
  // input: Cin x T, w: {3, Cout, Cin}, b: Cout -> Cout x T.
  Ref dilated_conv1d(Ref input, Ref w, Ref b, int dilation);

  // Per-frame affine map: W (Cout x Cin) * input + b.
  Ref conv1x1(Ref input, Ref w, Ref b);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::function<void(Graph&)> back;
  };

  std::vector<Node> nodes_;

  Ref make(Tensor v, bool rg, std::function<void(Graph&)> back) {
    nodes_.push_back(Node{std::move(v), {}, rg, std::move(back)});
    return static_cast<Ref>(nodes_.size() - 1);
  }
  Node& node(Ref r) { return nodes_[static_cast<std::size_t>(r)]; }
  bool rg(Ref r) const { return nodes_[static_cast<std::size_t>(r)].requires_grad; }
  // Gradient buffer of r, allocated on first use.
  std::vector<double>& gbuf(Ref r) {
    Node& n = node(r);
    if (n.grad.size() != n.value.data.size()) n.grad.assign(n.value.data.size(), 0.0);
    return n.grad;
  }
};

}  // namespace anticipate
