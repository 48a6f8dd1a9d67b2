#include "anticipate/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "anticipate/cycle.hpp"
#include "anticipate/recognition.hpp"

namespace anticipate {

double RunConfig::lr_at(int epoch) const {
  return lr * std::pow(lr_decay, epoch / lr_decay_every);
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    std::string key, value;
    if (eq == std::string::npos) {
      std::istringstream ss(line);
      if (!(ss >> key)) continue;
      throw InputError("config " + path + ":" + std::to_string(lineno) +
                       ": expected key = value");
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    key = trim(line.substr(0, eq));
    value = trim(line.substr(eq + 1));
    if (key.empty() && value.empty()) continue;
    try {
      if (key == "data") cfg.data_dir = value;
      else if (key == "epochs") cfg.epochs = std::stoi(value);
      else if (key == "lr") cfg.lr = std::stod(value);
      else if (key == "lr_decay") cfg.lr_decay = std::stod(value);
      else if (key == "lr_decay_every") cfg.lr_decay_every = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "ablation") cfg.model.ablation = ablation_from_name(value);
      else if (key == "hidden_dim") cfg.model.hidden_dim = std::stoi(value);
      else if (key == "heads") cfg.model.heads = std::stoi(value);
      else if (key == "tcn_layers") cfg.model.tcn_layers = std::stoi(value);
      else if (key == "tcn_filters") cfg.model.tcn_filters = std::stoi(value);
      else if (key == "encoder_input") {
        if (value == "features") cfg.model.encoder_input = EncoderInput::TcnFeatures;
        else if (value == "probs") cfg.model.encoder_input = EncoderInput::FrameProbs;
        else throw InputError("encoder_input must be features or probs");
      } else if (key == "cycle_order") {
        if (value == "forward") cfg.model.cycle_reverse = false;
        else if (value == "reverse") cfg.model.cycle_reverse = true;
        else throw InputError("cycle_order must be forward or reverse");
      } else if (key == "two_step") {
        cfg.two_step = (value == "1" || value == "true");
      } else if (key == "max_decode_steps") {
        cfg.max_decode_steps = std::stoi(value);
      } else if (key == "train_obs_fracs") {
        cfg.train_obs_fracs.clear();
        std::istringstream vs(value);
        std::string tok;
        while (std::getline(vs, tok, ','))
          cfg.train_obs_fracs.push_back(std::stod(tok));
        if (cfg.train_obs_fracs.empty())
          throw InputError("train_obs_fracs: at least one fraction required");
      } else {
        throw InputError("config " + path + ":" + std::to_string(lineno) +
                         ": unknown key " + key);
      }
    } catch (const std::invalid_argument&) {
      throw InputError("config " + path + ":" + std::to_string(lineno) +
                       ": bad value for " + key);
    }
  }
  if (cfg.epochs < 1) throw InputError("config: epochs >= 1 required");
  return cfg;
}

LossTerms total_loss(const TrainExample& example, const ModelParams& params,
                     const ModelConfig& cfg, GradMap* grads) {
  return total_loss(example, params, cfg, grads, cfg.use_rec_loss());
}

LossTerms total_loss(const TrainExample& example, const ModelParams& params,
                     const ModelConfig& cfg, GradMap* grads, bool rec_enabled) {
  Graph g;
  Binding bind(g, params);
  Graph::Ref obs = g.constant(example.obs_features);
  Graph::Ref enc_input = obs;
  Graph::Ref rec_logits = -1;
  if (cfg.use_tcn()) {
    bool with_cls = cfg.use_rec_loss() || cfg.encoder_input == EncoderInput::FrameProbs;
    TcnGraphOut tcn = tcn_forward_graph(g, bind, obs, cfg, with_cls);
    rec_logits = tcn.logits;
    enc_input = cfg.encoder_input == EncoderInput::FrameProbs
                    ? g.softmax_cols(tcn.logits)
                    : tcn.features;
  }
  EncoderGraphOut enc = encode_graph(g, bind, enc_input, cfg);
  AttnCache cache;
  const AttnCache* pcache = nullptr;
  if (cfg.use_attention()) {
    cache = attn_precompute(g, bind, enc.states, cfg);
    pcache = &cache;
  }
  DecodeResult dec =
      decode_teacher_forced(g, bind, enc.final, pcache, example.future.labels, cfg);
  Graph::Ref total = anticipation_loss_graph(g, dec, example.future, cfg);

  LossTerms terms;
  terms.anticipation = g.value(total).data[0];
  if (rec_enabled && cfg.use_rec_loss()) {
    Graph::Ref lr = recognition_loss_graph(g, rec_logits, example.obs_labels);
    terms.recognition = g.value(lr).data[0];
    total = g.add(total, lr);
  }
  if (cfg.use_cycle()) {
    DecodeResult cyc = cycle_decode(g, bind, dec.final_hidden, example.observed, cfg);
    Graph::Ref lc = cycle_loss_graph(g, cyc, example.observed, cfg);
    terms.cycle = g.value(lc).data[0];
    total = g.add(total, lc);
  }
  terms.total = g.value(total).data[0];
  if (!std::isfinite(terms.total))
    throw NumericError("total_loss: non-finite loss");
  if (grads != nullptr) {
    g.backward(total);
    bind.collect_grads(*grads);
  }
  return terms;
}

namespace {

struct Corpus {
  std::vector<TrainExample> examples;
};

Corpus build_corpus(const Dataset& ds, const RunConfig& cfg) {
  if (ds.train_ids.empty()) throw IoError("train: dataset has no training split");
  Corpus corpus;
  for (const auto& id : ds.train_ids) {
    const VideoSample& v = ds.find(id);
    for (double a : cfg.train_obs_fracs)
      corpus.examples.push_back(make_train_example(v, a));
  }
  return corpus;
}

ModelConfig resolve_model(const Dataset& ds, const RunConfig& cfg) {
  ModelConfig m = cfg.model;
  m.num_classes = ds.num_classes();
  m.feature_dim = ds.feature_dim;
  if (!m.use_tcn()) m.encoder_input = EncoderInput::RawFeatures;
  m.validate();
  return m;
}

using EpochHook = std::function<LossTerms(const TrainExample&, GradMap*)>;

// Shared epoch loop: shuffled per-sample Adam updates, per-epoch term means.
void run_epochs(std::vector<TrainExample>& examples, ModelParams& params,
                const RunConfig& cfg, const EpochHook& step, AdamState& adam,
                std::mt19937_64& shuffle_rng,
                const std::function<void(GradMap&)>& gate,
                std::vector<std::array<double, 4>>& log) {
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.lr = cfg.lr_at(epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::array<double, 4> sums{0.0, 0.0, 0.0, 0.0};
    for (std::size_t idx : order) {
      GradMap grads;
      LossTerms t = step(examples[idx], &grads);
      if (gate) gate(grads);
      adam_step(params, grads, adam);
      sums[0] += t.anticipation;
      sums[1] += t.recognition;
      sums[2] += t.cycle;
      sums[3] += t.total;
    }
    double n = static_cast<double>(order.size());
    log.push_back({sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n});
  }
}

}  // namespace

TrainResult train(const Dataset& ds, const RunConfig& cfg) {
  ModelConfig model = resolve_model(ds, cfg);
  Corpus corpus = build_corpus(ds, cfg);
  TrainResult res;
  res.params = init_params(model, cfg.seed);
  AdamState adam;
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5A17F00DULL);
  run_epochs(
      corpus.examples, res.params, cfg,
      [&](const TrainExample& ex, GradMap* grads) {
        return total_loss(ex, res.params, model, grads);
      },
      adam, shuffle_rng, {}, res.loss_log);
  return res;
}

TrainResult train_two_step(const Dataset& ds, const RunConfig& cfg) {
  ModelConfig model = resolve_model(ds, cfg);
  if (!model.use_tcn() || !model.use_rec_loss())
    throw InputError("train_two_step: requires a mode with TCN and recognition loss");
  Corpus corpus = build_corpus(ds, cfg);
  TrainResult res;
  res.params = init_params(model, cfg.seed);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5A17F00DULL);

  // Phase 1: recognition only.
  {
    AdamState adam;
    run_epochs(
        corpus.examples, res.params, cfg,
        [&](const TrainExample& ex, GradMap* grads) {
          Graph g;
          Binding bind(g, res.params);
          Graph::Ref obs = g.constant(ex.obs_features);
          TcnGraphOut tcn = tcn_forward_graph(g, bind, obs, model, true);
          Graph::Ref loss = recognition_loss_graph(g, tcn.logits, ex.obs_labels);
          LossTerms t;
          t.recognition = t.total = g.value(loss).data[0];
          if (!std::isfinite(t.total)) throw NumericError("two_step: non-finite loss");
          if (grads) {
            g.backward(loss);
            bind.collect_grads(*grads);
          }
          return t;
        },
        adam, shuffle_rng, {}, res.loss_log);
  }

  // Phase 2: freeze tcn.*, train the rest with L_A + L_cyc.
  {
    AdamState adam;
    auto freeze_tcn = [](GradMap& grads) {
      for (auto it = grads.begin(); it != grads.end();)
        it = it->first.rfind("tcn.", 0) == 0 ? grads.erase(it) : std::next(it);
    };
    run_epochs(
        corpus.examples, res.params, cfg,
        [&](const TrainExample& ex, GradMap* grads) {
          return total_loss(ex, res.params, model, grads, /*rec_enabled=*/false);
        },
        adam, shuffle_rng, freeze_tcn, res.loss_log);
  }
  return res;
}

void write_loss_log(const std::string& path, const std::vector<std::array<double, 4>>& log) {
  std::ofstream os(path);
  if (!os) throw IoError("loss log: cannot write " + path);
  os << "epoch,L_A,L_R,L_cyc,L\n";
  char buf[160];
  for (std::size_t e = 0; e < log.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g,%.12g\n", e, log[e][0],
                  log[e][1], log[e][2], log[e][3]);
    os << buf;
  }
  if (!os) throw IoError("loss log: write failed for " + path);
}

SegmentSeq Predictor::predict_future(const Tensor& obs_features) const {
  Graph g;
  Binding bind(g, params_);
  Graph::Ref obs = g.constant(obs_features);
  Graph::Ref enc_input = obs;
  if (cfg_.use_tcn()) {
    bool with_cls = cfg_.encoder_input == EncoderInput::FrameProbs;
    TcnGraphOut tcn =
        tcn_forward_graph(g, bind, obs, cfg_, with_cls && params_.has("tcn.cls.W"));
    enc_input = cfg_.encoder_input == EncoderInput::FrameProbs
                    ? g.softmax_cols(tcn.logits)
                    : tcn.features;
  }
  EncoderGraphOut enc = encode_graph(g, bind, enc_input, cfg_);
  AttnCache cache;
  const AttnCache* pcache = nullptr;
  if (cfg_.use_attention()) {
    cache = attn_precompute(g, bind, enc.states, cfg_);
    pcache = &cache;
  }
  DecodeResult dec = decode_free_running(g, bind, enc.final, pcache, max_steps_, cfg_);
  SegmentSeq out;
  out.labels = dec.predicted_labels;
  if (!out.labels.empty()) {
    std::vector<double> logits;
    for (std::size_t m = 0; m < out.labels.size(); ++m)
      logits.push_back(g.value(dec.steps[m].dur_logit).data[0]);
    out.rel_durations = normalize_durations(logits);
  }
  return out;
}

DecodeFn Predictor::decode_fn() const {
  return [this](const VideoSample& v, int t_o) {
    std::size_t D = v.features.rows();
    Tensor obs = Tensor::zeros({D, static_cast<std::size_t>(t_o)});
    for (std::size_t d = 0; d < D; ++d)
      for (int f = 0; f < t_o; ++f)
        obs.at(d, static_cast<std::size_t>(f)) = v.features.at(d, static_cast<std::size_t>(f));
    return predict_future(obs);
  };
}

PredictOutput predict_video(const Predictor& pred, const VideoSample& video,
                            double obs_frac, double pred_frac) {
  int T = video.num_frames();
  int t_o = std::max(1, std::min(round_half_up(obs_frac * T), T - 1));
  int h_req = round_half_up(pred_frac * T);
  int h_avail = T - t_o;
  PredictOutput out;
  out.clamped = h_req > h_avail;
  int h = std::max(1, std::min(h_req, h_avail));
  // Expansion uses the 0.5*T grid so sub-horizon truncations share one decode.
  int h_expand = std::min(std::max(round_half_up(0.5 * T), h), h_avail);
  out.segments = pred.decode_fn()(video, t_o);
  if (out.segments.labels.empty()) {
    // immediate end-of-sequence: carry the last observed label forward
    out.segments.labels = {video.frame_labels[static_cast<std::size_t>(t_o - 1)]};
    out.segments.rel_durations = {1.0};
  }
  std::vector<int> frames = segments_to_frames(out.segments, h_expand);
  out.frame_labels.assign(frames.begin(), frames.begin() + h);
  return out;
}

std::vector<ReportRow> aggregate_results(const std::vector<EvalGrid>& grids,
                                         const std::vector<std::string>& labels) {
  if (grids.empty()) throw InputError("report: no input results");
  if (grids.size() != labels.size())
    throw InputError("report: labels must match inputs");
  std::vector<std::string> order;
  for (const auto& l : labels)
    if (std::find(order.begin(), order.end(), l) == order.end()) order.push_back(l);

  struct Key {
    double obs, pred;
  };
  std::vector<Key> cells;
  for (const auto& c : grids[0].cells) cells.push_back({c.obs_frac, c.pred_frac});

  auto cell_values = [&](const std::string& label, const Key& k) {
    std::vector<double> vals;
    for (std::size_t i = 0; i < grids.size(); ++i) {
      if (labels[i] != label) continue;
      for (const auto& c : grids[i].cells)
        if (c.obs_frac == k.obs && c.pred_frac == k.pred) vals.push_back(c.moc);
    }
    return vals;
  };

  std::vector<ReportRow> rows;
  for (const auto& label : order) {
    for (const auto& k : cells) {
      auto vals = cell_values(label, k);
      if (vals.empty()) continue;
      ReportRow r;
      r.label = label;
      r.obs_frac = k.obs;
      r.pred_frac = k.pred;
      double sum = 0.0;
      for (double v : vals) sum += v;
      r.mean = sum / static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - r.mean) * (v - r.mean);
      r.stdev = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
      rows.push_back(r);
    }
  }
  // deltas vs the first label
  for (auto& r : rows) {
    for (const auto& b : rows)
      if (b.label == order[0] && b.obs_frac == r.obs_frac && b.pred_frac == r.pred_frac)
        r.delta_vs_baseline = r.mean - b.mean;
  }
  return rows;
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("report: cannot write " + path);
  os << "method,obs,pred,mean_moc,stdev,delta_vs_baseline\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.1f,%.1f,%.6f,%.6f,%.6f\n", r.label.c_str(),
                  r.obs_frac, r.pred_frac, r.mean, r.stdev, r.delta_vs_baseline);
    os << buf;
  }
  if (!os) throw IoError("report: write failed for " + path);
}

std::string render_report_table(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  std::string current;
  char buf[128];
  for (const auto& r : rows) {
    if (r.label != current) {
      current = r.label;
      os << current << "\n";
    }
    std::snprintf(buf, sizeof(buf),
                  "  obs %.0f%% pred %.0f%%: MoC %.4f +/- %.4f (delta %+.4f)\n",
                  r.obs_frac * 100, r.pred_frac * 100, r.mean, r.stdev,
                  r.delta_vs_baseline);
    os << buf;
  }
  return os.str();
}

}  // namespace anticipate
