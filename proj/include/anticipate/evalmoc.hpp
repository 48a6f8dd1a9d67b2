#pragma once

#include <functional>
#include <string>
#include <vector>

#include "anticipate/datagen.hpp"
#include "anticipate/seq2seq.hpp"

namespace anticipate {

// Expands a segment sequence to exactly H frame labels. Boundaries are
// placed at round-half-up of the cumulative relative durations; the last
// boundary is forced to H.
std::vector<int> segments_to_frames(const SegmentSeq& seq, int horizon_frames);

// Mean over classes present in the ground truth: for each such class c,
// acc_c = #(gt==c && pred==c) / #(gt==c); MoC = mean of acc_c.
double moc_accuracy(const std::vector<int>& pred_frames,
                    const std::vector<int>& gt_frames, int num_classes);

struct EvalCell {
  double obs_frac = 0.0;
  double pred_frac = 0.0;
  double moc = 0.0;
};

struct EvalGrid {
  std::vector<double> obs_fracs = {0.2, 0.3};
  std::vector<double> pred_fracs = {0.1, 0.2, 0.3, 0.5};
  std::vector<EvalCell> cells;  // filled by evaluate(), obs-major order
};

// Produces the predicted future segments for one observation window. An
// empty result is allowed; the evaluator then repeats the last observed
// ground-truth label.
using DecodeFn = std::function<SegmentSeq(const VideoSample&, int t_o)>;

// Decodes once per (video, obs_frac), expands over the maximal horizon
// round(0.5*T), and scores each pred_frac on a prefix of that expansion.
// Per-class counts are accumulated over the whole test set by default;
// `video_level` averages MoC per video instead.
EvalGrid evaluate(const DecodeFn& decode, const std::vector<const VideoSample*>& test_set,
                  int num_classes, EvalGrid grid = {}, bool video_level = false);

// Results CSV: header "obs,pred,moc", one row per cell, 6-decimal MoC.
void write_results_csv(const std::string& path, const EvalGrid& grid);
EvalGrid read_results_csv(const std::string& path);

}  // namespace anticipate
