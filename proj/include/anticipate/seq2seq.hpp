#pragma once

#include <vector>

#include "anticipate/graph.hpp"
#include "anticipate/model.hpp"

namespace anticipate {

// Ordered future (or past) action segments with relative durations.
struct SegmentSeq {
  std::vector<int> labels;
  std::vector<double> rel_durations;

  std::size_t size() const { return labels.size(); }
};

struct EncoderGraphOut {
  std::vector<Graph::Ref> state_cols;  // h^e_1 .. h^e_{t_o}
  Graph::Ref states = -1;              // hidden_dim x t_o
  Graph::Ref final = -1;               // h^e_{t_o}
};

// h^e_0 = 0; h^e_t = gru(features[:,t], h^e_{t-1}).
EncoderGraphOut encode_graph(Graph& g, Binding& bind, Graph::Ref features,
                             const ModelConfig& cfg);

// Per-head normalized keys/values, shared across decode steps.
struct AttnCache {
  struct Head {
    Graph::Ref keys = -1;    // d_A x t_o, L2-normalized columns
    Graph::Ref values = -1;  // d_A x t_o, L2-normalized columns
  };
  std::vector<Head> heads;
};

AttnCache attn_precompute(Graph& g, Binding& bind, Graph::Ref enc_states,
                          const ModelConfig& cfg);

struct AttendOut {
  Graph::Ref context = -1;                // hidden_dim
  std::vector<Graph::Ref> head_weights;   // per head, t_o probabilities
};

// Per head: q = norm(Wq h); O_h = Vn softmax(q^T Kn); heads concatenated and
// projected by attn.out.
AttendOut attend_graph(Graph& g, Binding& bind, Graph::Ref h_dec,
                       const AttnCache& cache, const ModelConfig& cfg);

struct StepOut {
  Graph::Ref hidden = -1;
  Graph::Ref label_logits = -1;  // C+1 (classes + EOS)
  Graph::Ref dur_logit = -1;     // scalar
};

// One decoder step: input = one-hot(prev symbol over C+1) [++ attention
// context]; prev symbol is SOS (== C) or a class index.
StepOut decode_step_graph(Graph& g, Binding& bind, int prev_symbol,
                          Graph::Ref h_prev, const AttnCache* attn,
                          const ModelConfig& cfg);

struct DecodeResult {
  std::vector<StepOut> steps;
  std::vector<int> predicted_labels;  // free-running only, EOS excluded
  Graph::Ref final_hidden = -1;
  bool truncated = false;  // free-running hit max_steps without EOS
};

// Runs exactly gt_labels.size()+1 steps; the last step targets EOS.
DecodeResult decode_teacher_forced(Graph& g, Binding& bind, Graph::Ref h_init,
                                   const AttnCache* attn,
                                   const std::vector<int>& gt_labels,
                                   const ModelConfig& cfg);

// Feeds argmax of the label logits (ties broken by lowest index); stops at
// EOS or max_steps.
DecodeResult decode_free_running(Graph& g, Binding& bind, Graph::Ref h_init,
                                 const AttnCache* attn, int max_steps,
                                 const ModelConfig& cfg);

// Softmax over predicted steps (EOS step excluded by the caller).
std::vector<double> normalize_durations(const std::vector<double>& dur_logits);

// L_A = L_CE + L_MSE. L_CE averages over the gt.size()+1 loss steps (EOS is
// a target class); L_MSE averages over the gt.size() non-EOS steps with
// predicted durations softmax-normalized across them.
Graph::Ref anticipation_loss_graph(Graph& g, const DecodeResult& steps,
                                   const SegmentSeq& gt, const ModelConfig& cfg);

}  // namespace anticipate
