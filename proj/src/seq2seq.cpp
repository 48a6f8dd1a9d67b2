#include "anticipate/seq2seq.hpp"

namespace anticipate {

EncoderGraphOut encode_graph(Graph& g, Binding& bind, Graph::Ref features,
                             const ModelConfig& cfg) {
  const Tensor& f = g.value(features);
  if (f.rank() != 2 || f.rows() != static_cast<std::size_t>(cfg.encoder_input_dim()))
    throw DimensionError("encode: feature dim mismatch");
  std::size_t t_o = f.cols();
  if (t_o < 1) throw InputError("encode: empty sequence");
  auto gru = bind.gru("enc.gru");
  Graph::Ref h = g.constant(Tensor::zeros({static_cast<std::size_t>(cfg.hidden_dim)}));
  EncoderGraphOut out;
  out.state_cols.reserve(t_o);
  for (std::size_t t = 0; t < t_o; ++t) {
    h = g.gru_cell(g.col(features, t), h, gru);
    out.state_cols.push_back(h);
  }
  out.states = g.concat_cols(out.state_cols);
  out.final = h;
  return out;
}

AttnCache attn_precompute(Graph& g, Binding& bind, Graph::Ref enc_states,
                          const ModelConfig& cfg) {
  AttnCache cache;
  cache.heads.resize(static_cast<std::size_t>(cfg.heads));
  for (int h = 0; h < cfg.heads; ++h) {
    std::string pre = "attn.head" + std::to_string(h);
    auto& head = cache.heads[static_cast<std::size_t>(h)];
    head.keys = g.normalize_cols(g.matmul(bind(pre + ".Wk"), enc_states));
    head.values = g.normalize_cols(g.matmul(bind(pre + ".Wv"), enc_states));
  }
  return cache;
}

AttendOut attend_graph(Graph& g, Binding& bind, Graph::Ref h_dec,
                       const AttnCache& cache, const ModelConfig& cfg) {
  AttendOut out;
  std::vector<Graph::Ref> head_outs;
  head_outs.reserve(cache.heads.size());
  for (int h = 0; h < cfg.heads; ++h) {
    std::string pre = "attn.head" + std::to_string(h);
    const auto& head = cache.heads[static_cast<std::size_t>(h)];
    Graph::Ref q = g.normalize_l2(g.matvec(bind(pre + ".Wq"), h_dec));
    Graph::Ref weights = g.softmax_op(g.vecmat(q, head.keys));
    out.head_weights.push_back(weights);
    head_outs.push_back(g.matvec(head.values, weights));
  }
  out.context = g.add(g.matvec(bind("attn.out.W"), g.concat(head_outs)),
                      bind("attn.out.b"));
  return out;
}

StepOut decode_step_graph(Graph& g, Binding& bind, int prev_symbol,
                          Graph::Ref h_prev, const AttnCache* attn,
                          const ModelConfig& cfg) {
  int symbols = cfg.num_classes + 1;  // classes + SOS
  if (prev_symbol < 0 || prev_symbol >= symbols)
    throw InputError("decode_step: invalid input symbol");
  Tensor onehot = Tensor::zeros({static_cast<std::size_t>(symbols)});
  onehot.data[static_cast<std::size_t>(prev_symbol)] = 1.0;
  Graph::Ref input = g.constant(std::move(onehot));
  if (cfg.use_attention()) {
    if (attn == nullptr) throw InputError("decode_step: attention cache missing");
    AttendOut att = attend_graph(g, bind, h_prev, *attn, cfg);
    input = g.concat({input, att.context});
  }
  StepOut step;
  step.hidden = g.gru_cell(input, h_prev, bind.gru("dec.gru"));
  step.label_logits = g.add(g.matvec(bind("dec.label.W"), step.hidden), bind("dec.label.b"));
  step.dur_logit = g.add(g.matvec(bind("dec.dur.W"), step.hidden), bind("dec.dur.b"));
  return step;
}

DecodeResult decode_teacher_forced(Graph& g, Binding& bind, Graph::Ref h_init,
                                   const AttnCache* attn,
                                   const std::vector<int>& gt_labels,
                                   const ModelConfig& cfg) {
  DecodeResult res;
  Graph::Ref h = h_init;
  int prev = cfg.sos_symbol();
  for (std::size_t m = 0; m <= gt_labels.size(); ++m) {
    StepOut step = decode_step_graph(g, bind, prev, h, attn, cfg);
    h = step.hidden;
    res.steps.push_back(step);
    if (m < gt_labels.size()) {
      if (gt_labels[m] < 0 || gt_labels[m] >= cfg.num_classes)
        throw InputError("decode_teacher_forced: label out of range");
      prev = gt_labels[m];
    }
  }
  res.final_hidden = h;
  return res;
}

namespace {
// Lowest index wins ties.
int argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}
}  // namespace

DecodeResult decode_free_running(Graph& g, Binding& bind, Graph::Ref h_init,
                                 const AttnCache* attn, int max_steps,
                                 const ModelConfig& cfg) {
  if (max_steps < 1) throw InputError("decode_free_running: max_steps >= 1 required");
  DecodeResult res;
  Graph::Ref h = h_init;
  int prev = cfg.sos_symbol();
  res.truncated = true;
  for (int m = 0; m < max_steps; ++m) {
    StepOut step = decode_step_graph(g, bind, prev, h, attn, cfg);
    h = step.hidden;
    res.steps.push_back(step);
    int pred = argmax(g.value(step.label_logits).data);
    if (pred == cfg.eos_class()) {
      res.truncated = false;
      break;
    }
    res.predicted_labels.push_back(pred);
    prev = pred;
  }
  res.final_hidden = h;
  return res;
}

std::vector<double> normalize_durations(const std::vector<double>& dur_logits) {
  if (dur_logits.empty()) throw InputError("normalize_durations: empty input");
  return softmax(dur_logits);
}

Graph::Ref anticipation_loss_graph(Graph& g, const DecodeResult& dec,
                                   const SegmentSeq& gt, const ModelConfig& cfg) {
  if (gt.labels.size() != gt.rel_durations.size())
    throw InputError("anticipation_loss: malformed target");
  if (dec.steps.size() != gt.size() + 1)
    throw InputError("anticipation_loss: steps must align with gt plus EOS");
  std::vector<Graph::Ref> ce_terms;
  ce_terms.reserve(dec.steps.size());
  for (std::size_t m = 0; m < dec.steps.size(); ++m) {
    int target = (m < gt.size()) ? gt.labels[m] : cfg.eos_class();
    ce_terms.push_back(g.nll_softmax(dec.steps[m].label_logits, target));
  }
  Graph::Ref loss = g.mean(g.concat(ce_terms));
  if (!gt.labels.empty()) {
    std::vector<Graph::Ref> dur_logits;
    for (std::size_t m = 0; m < gt.size(); ++m)
      dur_logits.push_back(dec.steps[m].dur_logit);
    Graph::Ref rel = g.softmax_op(g.concat(dur_logits));
    Graph::Ref target = g.constant(Tensor::vec(gt.rel_durations));
    loss = g.add(loss, g.mse_loss(rel, target));
  }
  return loss;
}

}  // namespace anticipate
