// Command-line entry points: data generation, training, prediction,
// evaluation, and report aggregation.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "anticipate/checkpoint.hpp"
#include "anticipate/datagen.hpp"
#include "anticipate/evalmoc.hpp"
#include "anticipate/harness.hpp"

namespace {

using namespace anticipate;

int cmd_init_grammar(const std::string& out) {
  write_grammar(out, default_grammar());
  std::cout << "wrote default grammar to " << out << "\n";
  return 0;
}

int cmd_gen_data(const std::string& grammar_path, const std::string& out_dir,
                 int videos, std::uint64_t seed) {
  Grammar g = parse_grammar(grammar_path);
  GeneratedDataset ds = generate_dataset(g, videos, seed);
  std::vector<std::string> names;
  for (const auto& c : g.classes) names.push_back(c.name);
  write_dataset(ds.videos, ds.train_ids, ds.test_ids, names, out_dir);
  std::cout << "wrote " << ds.videos.size() << " videos (" << ds.train_ids.size()
            << " train / " << ds.test_ids.size() << " test) to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& ablation,
              bool two_step, std::int64_t seed, const std::string& out) {
  RunConfig cfg = parse_run_config(config_path);
  if (!ablation.empty()) cfg.model.ablation = ablation_from_name(ablation);
  if (two_step) cfg.two_step = true;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (cfg.data_dir.empty()) throw InputError("config: data directory not set");
  Dataset ds = load_dataset(cfg.data_dir);
  cfg.model.num_classes = ds.num_classes();
  cfg.model.feature_dim = ds.feature_dim;
  if (!cfg.model.use_tcn()) cfg.model.encoder_input = EncoderInput::RawFeatures;
  TrainResult res = cfg.two_step ? train_two_step(ds, cfg) : train(ds, cfg);
  save_model(out, cfg.model, res.params);
  std::string log_path = out + ".loss.csv";
  write_loss_log(log_path, res.loss_log);
  std::cout << "checkpoint: " << out << "\nloss log:   " << log_path << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& data_dir,
                const std::string& video_id, double obs, double pred) {
  auto [cfg, params] = load_model(ckpt);
  Dataset ds = load_dataset(data_dir);
  if (ds.num_classes() != cfg.num_classes || ds.feature_dim != cfg.feature_dim)
    throw DimensionError("predict: checkpoint dimensions do not match dataset");
  const VideoSample& v = ds.find(video_id);
  Predictor predictor(cfg, std::move(params));
  PredictOutput out = predict_video(predictor, v, obs, pred);
  if (out.clamped)
    std::cerr << "warning: prediction horizon exceeds the video, truncated\n";
  for (std::size_t m = 0; m < out.segments.labels.size(); ++m)
    std::cout << ds.class_names[static_cast<std::size_t>(out.segments.labels[m])] << " "
              << out.segments.rel_durations[m] << "\n";
  for (std::size_t f = 0; f < out.frame_labels.size(); ++f)
    std::cout << ds.class_names[static_cast<std::size_t>(out.frame_labels[f])]
              << (f + 1 == out.frame_labels.size() ? "\n" : " ");
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir,
             const std::string& out, bool video_level, const std::string& subset) {
  auto [cfg, params] = load_model(ckpt);
  Dataset ds = load_dataset(data_dir);
  if (ds.num_classes() != cfg.num_classes || ds.feature_dim != cfg.feature_dim)
    throw DimensionError("eval: checkpoint dimensions do not match dataset");
  Predictor predictor(cfg, std::move(params));
  std::vector<std::string> prefixes;
  if (!subset.empty()) {
    std::istringstream ss(subset);
    std::string p;
    while (std::getline(ss, p, ',')) prefixes.push_back(p);
  }
  std::vector<const VideoSample*> test;
  for (const auto& id : ds.test_ids) {
    bool keep = prefixes.empty();
    for (const auto& p : prefixes) keep = keep || id.rfind(p, 0) == 0;
    if (!keep) continue;
    test.push_back(&ds.find(id));
  }
  if (test.empty()) throw InputError("eval: empty test set");
  EvalGrid grid = evaluate(predictor.decode_fn(), test, ds.num_classes(), {}, video_level);
  write_results_csv(out, grid);
  std::cout << "results: " << out << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& labels_arg,
               const std::string& out) {
  if (inputs.empty()) throw InputError("report: no inputs");
  std::vector<std::string> labels;
  if (!labels_arg.empty()) {
    std::string cur;
    for (char c : labels_arg + ",") {
      if (c == ',') {
        labels.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
  } else {
    for (const auto& p : inputs) labels.push_back(std::filesystem::path(p).stem().string());
  }
  std::vector<EvalGrid> grids;
  for (const auto& p : inputs) grids.push_back(read_results_csv(p));
  auto rows = aggregate_results(grids, labels);
  write_report_csv(out, rows);
  std::cout << render_report_table(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-horizon activity anticipation on synthetic grammar data"};
  app.require_subcommand(1);

  auto* init = app.add_subcommand("init-grammar", "Write the built-in benchmark grammar");
  std::string init_out;
  init->add_option("--out", init_out, "Output grammar file")->required();

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  std::string gen_grammar, gen_out;
  int gen_videos = 250;
  std::uint64_t gen_seed = 1;
  gen->add_option("--grammar", gen_grammar, "Grammar config file")->required();
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--videos", gen_videos, "Total number of videos");
  gen->add_option("--seed", gen_seed, "Generation seed");

  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_ablation, tr_out;
  bool tr_two_step = false;
  std::int64_t tr_seed = -1;
  tr->add_option("--config", tr_config, "Run config file")->required();
  tr->add_option("--ablation", tr_ablation,
                 "s2s | s2s_tcn | s2s_tcn_rec | s2s_tcn_rec_cyc | full");
  tr->add_flag("--two-step", tr_two_step, "Two-step training (recognition first)");
  tr->add_option("--seed", tr_seed, "Override the config seed");
  tr->add_option("--out", tr_out, "Output checkpoint path")->required();

  auto* pr = app.add_subcommand("predict", "Predict the future of one video");
  std::string pr_ckpt, pr_data, pr_video;
  double pr_obs = 0.2, pr_pred = 0.5;
  pr->add_option("--ckpt", pr_ckpt, "Checkpoint file")->required();
  pr->add_option("--data", pr_data, "Dataset directory")->required();
  pr->add_option("--video", pr_video, "Video id")->required();
  pr->add_option("--obs", pr_obs, "Observation fraction");
  pr->add_option("--pred", pr_pred, "Prediction fraction");

  auto* ev = app.add_subcommand("eval", "Evaluate MoC over the test split");
  std::string ev_ckpt, ev_data, ev_out, ev_subset;
  bool ev_video_level = false;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--out", ev_out, "Results CSV path")->required();
  ev->add_flag("--video-level", ev_video_level, "Average MoC per video");
  ev->add_option("--subset", ev_subset, "Only test videos whose id starts with one of these comma-separated prefixes");

  auto* rp = app.add_subcommand("report", "Aggregate result CSVs (mean +/- stdev)");
  std::vector<std::string> rp_inputs;
  std::string rp_labels, rp_out;
  rp->add_option("--inputs", rp_inputs, "Input results CSVs")->required();
  rp->add_option("--labels", rp_labels, "Comma-separated labels, one per input");
  rp->add_option("--out", rp_out, "Output table CSV")->required();

  try {
    app.parse(argc, argv);
    if (init->parsed()) return cmd_init_grammar(init_out);
    if (gen->parsed()) return cmd_gen_data(gen_grammar, gen_out, gen_videos, gen_seed);
    if (tr->parsed()) return cmd_train(tr_config, tr_ablation, tr_two_step, tr_seed, tr_out);
    if (pr->parsed()) return cmd_predict(pr_ckpt, pr_data, pr_video, pr_obs, pr_pred);
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_out, ev_video_level, ev_subset);
    if (rp->parsed()) return cmd_report(rp_inputs, rp_labels, rp_out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // CLI11 prints usage; nonzero on error
  } catch (const anticipate::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const anticipate::IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const anticipate::DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const anticipate::InputError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
