#include "anticipate/recognition.hpp"

namespace anticipate {

TcnGraphOut tcn_forward_graph(Graph& g, Binding& bind, Graph::Ref input,
                              const ModelConfig& cfg, bool with_classifier) {
  const Tensor& x = g.value(input);
  if (x.rank() != 2 || x.rows() != static_cast<std::size_t>(cfg.feature_dim))
    throw DimensionError("tcn_forward: feature dim mismatch with input_proj");
  Graph::Ref f = g.conv1x1(input, bind("tcn.in_proj.W"), bind("tcn.in_proj.b"));
  int dilation = 1;
  for (int l = 0; l < cfg.tcn_layers; ++l) {
    std::string pre = "tcn.layer" + std::to_string(l);
    Graph::Ref a = g.relu(g.dilated_conv1d(f, bind(pre + ".W1"), bind(pre + ".b1"), dilation));
    f = g.add(f, g.conv1x1(a, bind(pre + ".W2"), bind(pre + ".b2")));
    dilation *= 2;
  }
  TcnGraphOut out;
  out.features = f;
  if (with_classifier)
    out.logits = g.conv1x1(f, bind("tcn.cls.W"), bind("tcn.cls.b"));
  return out;
}

Graph::Ref recognition_loss_graph(Graph& g, Graph::Ref logits,
                                  const std::vector<int>& gt_labels) {
  const Tensor& l = g.value(logits);
  if (l.cols() != gt_labels.size())
    throw DimensionError("recognition_loss: label count mismatch");
  int C = static_cast<int>(l.rows());
  std::vector<Graph::Ref> terms;
  terms.reserve(gt_labels.size());
  for (std::size_t t = 0; t < gt_labels.size(); ++t) {
    if (gt_labels[t] < 0 || gt_labels[t] >= C)
      throw InputError("recognition_loss: label out of range");
    terms.push_back(g.nll_softmax(g.col(logits, t), gt_labels[t]));
  }
  return g.mean(g.concat(terms));
}

RecognitionOutput tcn_forward(const Tensor& input, const ModelParams& params,
                              const ModelConfig& cfg) {
  Graph g;
  Binding bind(g, params);
  Graph::Ref in = g.constant(input);
  TcnGraphOut out = tcn_forward_graph(g, bind, in, cfg, params.has("tcn.cls.W"));
  RecognitionOutput r;
  r.features = g.value(out.features);
  if (out.logits >= 0) r.frame_probs = g.value(g.softmax_cols(out.logits));
  return r;
}

double recognition_loss(const Tensor& frame_probs, const std::vector<int>& gt_labels) {
  if (frame_probs.cols() != gt_labels.size())
    throw DimensionError("recognition_loss: label count mismatch");
  std::size_t C = frame_probs.rows();
  double s = 0.0;
  for (std::size_t t = 0; t < gt_labels.size(); ++t) {
    int c = gt_labels[t];
    if (c < 0 || static_cast<std::size_t>(c) >= C)
      throw InputError("recognition_loss: label out of range");
    s += -std::log(std::max(frame_probs.at(static_cast<std::size_t>(c), t), kProbFloor));
  }
  return s / static_cast<double>(gt_labels.size());
}

}  // namespace anticipate
