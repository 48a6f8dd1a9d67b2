#pragma once

#include <vector>

#include "anticipate/graph.hpp"
#include "anticipate/model.hpp"

namespace anticipate {

// Graph-level TCN output. `features` is the last dilated layer (K x t_o),
// `logits` the per-frame classifier output (C x t_o); logits is only built
// when the classifier parameters exist.
struct TcnGraphOut {
  Graph::Ref features = -1;
  Graph::Ref logits = -1;
};

// Residual dilated stack, dilation 2^l at layer l:
//   F_0 = conv1x1(X); F_l = F_{l-1} + conv1x1(ReLU(W1 *_dil F_{l-1} + b1)).
TcnGraphOut tcn_forward_graph(Graph& g, Binding& bind, Graph::Ref input,
                              const ModelConfig& cfg, bool with_classifier);

// (1/t_o) sum_t -log softmax(logits[:,t])[gt_t]
Graph::Ref recognition_loss_graph(Graph& g, Graph::Ref logits,
                                  const std::vector<int>& gt_labels);

// Value-level convenience used by evaluation and tests.
struct RecognitionOutput {
  Tensor features;     // K x t_o
  Tensor frame_probs;  // C x t_o, columns sum to 1
};
RecognitionOutput tcn_forward(const Tensor& input, const ModelParams& params,
                              const ModelConfig& cfg);

double recognition_loss(const Tensor& frame_probs, const std::vector<int>& gt_labels);

// Receptive field of the L-layer stack: 1 + 2 * (2^L - 1).
inline long tcn_receptive_field(int layers) {
  return 1 + 2 * ((1L << layers) - 1);
}

}  // namespace anticipate
