#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "anticipate/checkpoint.hpp"
#include "anticipate/harness.hpp"

using namespace anticipate;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("harness_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

Dataset tiny_dataset(int videos, std::uint64_t seed) {
  Grammar g = default_grammar();
  GeneratedDataset gen = generate_dataset(g, videos, seed);
  Dataset ds;
  for (const auto& c : g.classes) ds.class_names.push_back(c.name);
  ds.feature_dim = g.feature_dim;
  ds.videos = gen.videos;
  ds.train_ids = gen.train_ids;
  ds.test_ids = gen.test_ids;
  return ds;
}

RunConfig tiny_run() {
  RunConfig cfg;
  cfg.epochs = 2;
  cfg.model.hidden_dim = 16;
  cfg.model.tcn_filters = 8;
  cfg.model.tcn_layers = 3;
  cfg.model.heads = 2;
  return cfg;
}

}  // namespace

TEST_CASE("learning rate schedule steps down every interval") {
  RunConfig cfg;
  cfg.lr = 1e-3;
  cfg.lr_decay = 0.8;
  cfg.lr_decay_every = 20;
  CHECK(cfg.lr_at(0) == doctest::Approx(1e-3));
  CHECK(cfg.lr_at(19) == doctest::Approx(1e-3));
  CHECK(cfg.lr_at(20) == doctest::Approx(8e-4));
  CHECK(cfg.lr_at(40) == doctest::Approx(6.4e-4));
}

TEST_CASE("run config parsing, defaults and rejection of unknown keys") {
  TempDir tmp;
  std::ofstream(tmp / "run.cfg") << "data = /some/dir\n"
                                 << "epochs = 12\n"
                                 << "hidden_dim = 32   # inline comment\n"
                                 << "ablation = s2s_tcn_rec\n"
                                 << "cycle_order = reverse\n"
                                 << "train_obs_fracs = 0.1,0.25\n";
  RunConfig cfg = parse_run_config(tmp / "run.cfg");
  CHECK(cfg.data_dir == "/some/dir");
  CHECK(cfg.epochs == 12);
  CHECK(cfg.model.hidden_dim == 32);
  CHECK(cfg.model.ablation == Ablation::S2S_TCN_REC);
  CHECK(cfg.model.cycle_reverse);
  CHECK(cfg.train_obs_fracs == std::vector<double>{0.1, 0.25});
  CHECK(cfg.lr == 1e-3);       // default
  CHECK(cfg.epochs == 12);

  std::ofstream(tmp / "bad.cfg") << "nonsense = 1\n";
  CHECK_THROWS_AS(parse_run_config(tmp / "bad.cfg"), InputError);
  std::ofstream(tmp / "bad2.cfg") << "epochs = soon\n";
  CHECK_THROWS_AS(parse_run_config(tmp / "bad2.cfg"), InputError);
}

TEST_CASE("ablation gates which parameters and loss terms exist") {
  ModelConfig base;
  base.hidden_dim = 16;
  base.tcn_filters = 8;
  base.tcn_layers = 2;
  base.heads = 2;

  auto names_of = [&](Ablation a) {
    ModelConfig c = base;
    c.ablation = a;
    if (!c.use_tcn()) c.encoder_input = EncoderInput::RawFeatures;
    return init_params(c, 1);
  };
  ModelParams s2s = names_of(Ablation::S2S);
  CHECK_FALSE(s2s.has("tcn.in_proj.W"));
  CHECK_FALSE(s2s.has("cyc.gru.Wz"));
  CHECK_FALSE(s2s.has("attn.head0.Wq"));

  ModelParams tcn = names_of(Ablation::S2S_TCN);
  CHECK(tcn.has("tcn.in_proj.W"));
  CHECK_FALSE(tcn.has("tcn.cls.W"));  // no recognition loss, no classifier

  ModelParams rec = names_of(Ablation::S2S_TCN_REC);
  CHECK(rec.has("tcn.cls.W"));
  CHECK_FALSE(rec.has("cyc.gru.Wz"));

  ModelParams cyc = names_of(Ablation::S2S_TCN_REC_CYC);
  CHECK(cyc.has("cyc.gru.Wz"));
  CHECK_FALSE(cyc.has("attn.head0.Wq"));

  ModelParams full = names_of(Ablation::FULL);
  CHECK(full.has("attn.head0.Wq"));
  CHECK(full.has("attn.out.W"));
}

TEST_CASE("loss terms are gated by the ablation") {
  Dataset ds = tiny_dataset(5, 4);
  TrainExample ex = make_train_example(ds.videos[0], 0.3);

  auto terms_for = [&](Ablation a) {
    ModelConfig cfg = tiny_run().model;
    cfg.ablation = a;
    if (!cfg.use_tcn()) cfg.encoder_input = EncoderInput::RawFeatures;
    ModelParams p = init_params(cfg, 8);
    return total_loss(ex, p, cfg, nullptr);
  };
  LossTerms s2s = terms_for(Ablation::S2S);
  CHECK(s2s.recognition == 0.0);
  CHECK(s2s.cycle == 0.0);
  CHECK(s2s.anticipation > 0.0);
  CHECK(s2s.total == doctest::Approx(s2s.anticipation));

  LossTerms rec = terms_for(Ablation::S2S_TCN_REC);
  CHECK(rec.recognition > 0.0);
  CHECK(rec.cycle == 0.0);

  LossTerms full = terms_for(Ablation::FULL);
  CHECK(full.recognition > 0.0);
  CHECK(full.cycle > 0.0);
  CHECK(full.total == doctest::Approx(full.anticipation + full.recognition + full.cycle));
}

TEST_CASE("training is bitwise deterministic in the seed") {
  Dataset ds = tiny_dataset(6, 10);
  RunConfig cfg = tiny_run();
  cfg.seed = 33;
  TrainResult a = train(ds, cfg);
  TrainResult b = train(ds, cfg);
  REQUIRE(a.params.names == b.params.names);
  for (const auto& n : a.params.names)
    CHECK(a.params.at(n).data == b.params.at(n).data);
  CHECK(a.loss_log == b.loss_log);

  cfg.seed = 34;
  TrainResult c = train(ds, cfg);
  bool any_diff = false;
  for (const auto& n : a.params.names)
    any_diff = any_diff || a.params.at(n).data != c.params.at(n).data;
  CHECK(any_diff);
}

TEST_CASE("two-step training leaves the tcn frozen in phase two") {
  Dataset ds = tiny_dataset(6, 20);
  RunConfig cfg = tiny_run();
  cfg.epochs = 2;  // per phase
  cfg.two_step = true;
  TrainResult r = train_two_step(ds, cfg);

  // rerun phase 1 alone: the tcn weights of the joint result must match,
  // because phase 2 never updates them
  RunConfig phase1 = cfg;
  phase1.two_step = false;
  ModelParams init = init_params(cfg.model, cfg.seed);
  // phase 1 = recognition-only training; emulate by comparing against the
  // full two-step result: tcn params must differ from init (phase 1 moved
  // them) while remaining identical across repeated two-step runs
  TrainResult r2 = train_two_step(ds, cfg);
  bool tcn_moved = false;
  for (const auto& n : r.params.names) {
    if (n.rfind("tcn.", 0) == 0) {
      CHECK(r.params.at(n).data == r2.params.at(n).data);
      tcn_moved = tcn_moved || r.params.at(n).data != init.at(n).data;
    }
  }
  CHECK(tcn_moved);
}

TEST_CASE("model checkpoints round trip bitwise at f32 and carry the config") {
  TempDir tmp;
  ModelConfig cfg = tiny_run().model;
  cfg.ablation = Ablation::S2S_TCN_REC_CYC;
  cfg.cycle_reverse = true;
  ModelParams p = init_params(cfg, 77);
  save_model(tmp / "m.ckpt", cfg, p);
  auto [cfg2, p2] = load_model(tmp / "m.ckpt");
  CHECK(cfg2.num_classes == cfg.num_classes);
  CHECK(cfg2.feature_dim == cfg.feature_dim);
  CHECK(cfg2.hidden_dim == cfg.hidden_dim);
  CHECK(cfg2.tcn_layers == cfg.tcn_layers);
  CHECK(cfg2.tcn_filters == cfg.tcn_filters);
  CHECK(cfg2.heads == cfg.heads);
  CHECK(cfg2.ablation == cfg.ablation);
  CHECK(cfg2.cycle_reverse == cfg.cycle_reverse);
  REQUIRE(p2.names == p.names);
  for (const auto& n : p.names) {
    REQUIRE(p2.at(n).shape == p.at(n).shape);
    for (std::size_t i = 0; i < p.at(n).size(); ++i)
      CHECK(p2.at(n).data[i] == doctest::Approx(p.at(n).data[i]).epsilon(1e-6));
  }
  // a second save/load is bitwise stable (f32 fixed point reached)
  save_model(tmp / "m2.ckpt", cfg2, p2);
  auto [cfg3, p3] = load_model(tmp / "m2.ckpt");
  for (const auto& n : p2.names) CHECK(p3.at(n).data == p2.at(n).data);

  CHECK_THROWS_AS(load_model(tmp / "missing.ckpt"), IoError);
  std::ofstream(tmp / "junk.ckpt") << "not a checkpoint";
  CHECK_THROWS_AS(load_model(tmp / "junk.ckpt"), IoError);
}

TEST_CASE("loss log is written per epoch") {
  TempDir tmp;
  std::vector<std::array<double, 4>> log = {{1.0, 0.5, 0.25, 1.75},
                                            {0.9, 0.4, 0.2, 1.5}};
  write_loss_log(tmp / "loss.csv", log);
  std::ifstream is(tmp / "loss.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,L_A,L_R,L_cyc,L");
  std::getline(is, line);
  CHECK(line.rfind("0,", 0) == 0);
  std::getline(is, line);
  CHECK(line.rfind("1,", 0) == 0);
}

TEST_CASE("predictor output expands to the requested window") {
  Dataset ds = tiny_dataset(5, 30);
  RunConfig cfg = tiny_run();
  cfg.epochs = 1;
  TrainResult r = train(ds, cfg);
  Predictor pred(cfg.model, std::move(r.params));
  const VideoSample& v = ds.videos[0];
  PredictOutput out = predict_video(pred, v, 0.3, 0.2);
  int T = v.num_frames();
  CHECK(static_cast<int>(out.frame_labels.size()) ==
        std::min(round_half_up(0.2 * T), T - round_half_up(0.3 * T)));
  for (int c : out.frame_labels) {
    CHECK(c >= 0);
    CHECK(c < 12);
  }
  // asking beyond the end of the video flags truncation
  PredictOutput far = predict_video(pred, v, 0.3, 0.9);
  CHECK(far.clamped);
}

TEST_CASE("report aggregation means, deviations and baseline deltas") {
  EvalGrid a, b, c;
  a.cells = {{0.2, 0.5, 0.6}};
  b.cells = {{0.2, 0.5, 0.8}};
  c.cells = {{0.2, 0.5, 0.9}};
  auto rows = aggregate_results({a, b, c}, {"base", "base", "better"});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].label == "base");
  CHECK(rows[0].mean == doctest::Approx(0.7));
  CHECK(rows[0].stdev == doctest::Approx(std::sqrt(0.02)).epsilon(1e-9));
  CHECK(rows[0].delta_vs_baseline == doctest::Approx(0.0));
  CHECK(rows[1].label == "better");
  CHECK(rows[1].mean == doctest::Approx(0.9));
  CHECK(rows[1].delta_vs_baseline == doctest::Approx(0.2));
}
