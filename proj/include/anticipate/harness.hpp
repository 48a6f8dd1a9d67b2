#pragma once

#include <array>
#include <string>
#include <vector>

#include "anticipate/adam.hpp"
#include "anticipate/datagen.hpp"
#include "anticipate/evalmoc.hpp"
#include "anticipate/model.hpp"
#include "anticipate/seq2seq.hpp"

namespace anticipate {

struct RunConfig {
  std::string data_dir;
  ModelConfig model;
  int epochs = 80;
  double lr = 1e-3;
  double lr_decay = 0.8;
  int lr_decay_every = 20;
  std::uint64_t seed = 1;
  bool two_step = false;
  std::vector<double> train_obs_fracs = {0.2, 0.3};
  int max_decode_steps = 30;

  // lr(epoch) = lr * decay^floor(epoch / every), 0-based epochs.
  double lr_at(int epoch) const;
};

// Key-value config file ("key = value", '#' comments); unknown keys rejected.
// num_classes and feature_dim come from the dataset, not the file.
RunConfig parse_run_config(const std::string& path);

struct LossTerms {
  double anticipation = 0.0;
  double recognition = 0.0;
  double cycle = 0.0;
  double total = 0.0;
};

// Joint loss L = L_A + L_R + L_cyc with terms gated by the ablation mode.
// When `grads` is non-null, accumulates d(total)/d(param) into it.
LossTerms total_loss(const TrainExample& example, const ModelParams& params,
                     const ModelConfig& cfg, GradMap* grads);
// `rec_enabled` lets the two-step phase 2 drop L_R while keeping the mode.
LossTerms total_loss(const TrainExample& example, const ModelParams& params,
                     const ModelConfig& cfg, GradMap* grads, bool rec_enabled);

struct TrainResult {
  ModelParams params;
  // per epoch: L_A, L_R, L_cyc, L (means over samples)
  std::vector<std::array<double, 4>> loss_log;
};

TrainResult train(const Dataset& ds, const RunConfig& cfg);

// Phase 1: recognition loss only. Phase 2: tcn.* frozen, L_A (+ L_cyc).
TrainResult train_two_step(const Dataset& ds, const RunConfig& cfg);

void write_loss_log(const std::string& path, const std::vector<std::array<double, 4>>& log);

// Inference wrapper: free-running decode of the future segment sequence.
class Predictor {
 public:
  Predictor(ModelConfig cfg, ModelParams params, int max_steps = 30)
      : cfg_(std::move(cfg)), params_(std::move(params)), max_steps_(max_steps) {}

  SegmentSeq predict_future(const Tensor& obs_features) const;
  DecodeFn decode_fn() const;

  const ModelConfig& config() const { return cfg_; }
  const ModelParams& params() const { return params_; }

 private:
  ModelConfig cfg_;
  ModelParams params_;
  int max_steps_;
};

struct PredictOutput {
  SegmentSeq segments;
  std::vector<int> frame_labels;
  bool clamped = false;  // requested horizon exceeded the video
};

// Free-running decode + expansion + truncation for one video.
PredictOutput predict_video(const Predictor& pred, const VideoSample& video,
                            double obs_frac, double pred_frac);

// Aggregates per-cell MoC across runs grouped by label; the first label is
// the baseline for deltas.
struct ReportRow {
  std::string label;
  double obs_frac = 0.0, pred_frac = 0.0;
  double mean = 0.0, stdev = 0.0, delta_vs_baseline = 0.0;
};
std::vector<ReportRow> aggregate_results(const std::vector<EvalGrid>& grids,
                                         const std::vector<std::string>& labels);
void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);
std::string render_report_table(const std::vector<ReportRow>& rows);

}  // namespace anticipate
