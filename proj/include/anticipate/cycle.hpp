#pragma once

#include "anticipate/seq2seq.hpp"

namespace anticipate {

// Training-only decoder that reconstructs the observed past segments from
// the anticipation decoder's final hidden state. No attention on this path.
// Runs gt_past.size()+1 teacher-forced steps (EOS target at the end).
DecodeResult cycle_decode(Graph& g, Binding& bind, Graph::Ref h_init,
                          const SegmentSeq& gt_past, const ModelConfig& cfg);

// Same structure as the anticipation loss, over the past segments. Past
// relative durations must sum to 1 over the observed segments.
Graph::Ref cycle_loss_graph(Graph& g, const DecodeResult& dec,
                            const SegmentSeq& gt_past, const ModelConfig& cfg);

}  // namespace anticipate
