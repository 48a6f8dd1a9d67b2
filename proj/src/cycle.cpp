#include "anticipate/cycle.hpp"

#include <algorithm>

namespace anticipate {

namespace {
SegmentSeq ordered_past(const SegmentSeq& past, const ModelConfig& cfg) {
  if (!cfg.cycle_reverse) return past;
  SegmentSeq r = past;
  std::reverse(r.labels.begin(), r.labels.end());
  std::reverse(r.rel_durations.begin(), r.rel_durations.end());
  return r;
}
}  // namespace

DecodeResult cycle_decode(Graph& g, Binding& bind, Graph::Ref h_init,
                          const SegmentSeq& gt_past, const ModelConfig& cfg) {
  if (gt_past.labels.empty()) throw InputError("cycle_decode: empty past");
  SegmentSeq past = ordered_past(gt_past, cfg);
  DecodeResult res;
  Graph::Ref h = h_init;
  int prev = cfg.sos_symbol();
  auto gru = bind.gru("cyc.gru");
  int symbols = cfg.num_classes + 1;
  for (std::size_t m = 0; m <= past.labels.size(); ++m) {
    Tensor onehot = Tensor::zeros({static_cast<std::size_t>(symbols)});
    onehot.data[static_cast<std::size_t>(prev)] = 1.0;
    StepOut step;
    step.hidden = g.gru_cell(g.constant(std::move(onehot)), h, gru);
    step.label_logits =
        g.add(g.matvec(bind("cyc.label.W"), step.hidden), bind("cyc.label.b"));
    step.dur_logit = g.add(g.matvec(bind("cyc.dur.W"), step.hidden), bind("cyc.dur.b"));
    h = step.hidden;
    res.steps.push_back(step);
    if (m < past.labels.size()) {
      if (past.labels[m] < 0 || past.labels[m] >= cfg.num_classes)
        throw InputError("cycle_decode: label out of range");
      prev = past.labels[m];
    }
  }
  res.final_hidden = h;
  return res;
}

Graph::Ref cycle_loss_graph(Graph& g, const DecodeResult& dec,
                            const SegmentSeq& gt_past, const ModelConfig& cfg) {
  if (gt_past.labels.empty()) throw InputError("cycle_loss: empty past");
  SegmentSeq past = ordered_past(gt_past, cfg);
  if (dec.steps.size() != past.size() + 1)
    throw InputError("cycle_loss: steps must align with past plus EOS");
  // the trailing EOS step is decoded but carries no loss: only the n past
  // segments are scored, so both terms are means over n
  std::vector<Graph::Ref> ce_terms;
  for (std::size_t m = 0; m < past.size(); ++m)
    ce_terms.push_back(g.nll_softmax(dec.steps[m].label_logits, past.labels[m]));
  Graph::Ref loss = g.mean(g.concat(ce_terms));
  std::vector<Graph::Ref> dur_logits;
  for (std::size_t m = 0; m < past.size(); ++m)
    dur_logits.push_back(dec.steps[m].dur_logit);
  Graph::Ref rel = g.softmax_op(g.concat(dur_logits));
  Graph::Ref target = g.constant(Tensor::vec(past.rel_durations));
  return g.add(loss, g.mse_loss(rel, target));
}

}  // namespace anticipate
