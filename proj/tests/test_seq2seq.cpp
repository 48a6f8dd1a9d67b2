#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "anticipate/gradcheck.hpp"
#include "anticipate/recognition.hpp"
#include "anticipate/seq2seq.hpp"

using namespace anticipate;

namespace {

ModelConfig tiny_cfg(Ablation a = Ablation::FULL) {
  ModelConfig cfg;
  cfg.num_classes = 3;
  cfg.feature_dim = 2;
  cfg.tcn_layers = 2;
  cfg.tcn_filters = 4;
  cfg.hidden_dim = 8;
  cfg.heads = 2;
  cfg.ablation = a;
  return cfg;
}

Tensor rand_features(int d, int t, std::uint64_t seed) {
  Tensor x = Tensor::zeros({static_cast<std::size_t>(d), static_cast<std::size_t>(t)});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : x.data) v = u(rng);
  return x;
}

}  // namespace

TEST_CASE("encoder emits one state per frame") {
  ModelConfig cfg = tiny_cfg();
  ModelParams p = init_params(cfg, 21);
  Graph g;
  Binding bind(g, p);
  Graph::Ref in = g.constant(rand_features(cfg.tcn_filters, 5, 1));
  EncoderGraphOut enc = encode_graph(g, bind, in, cfg);
  CHECK(enc.state_cols.size() == 5);
  CHECK(g.value(enc.states).rows() == 8);
  CHECK(g.value(enc.states).cols() == 5);
  // last column of `states` is the final state
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(g.value(enc.final).data[i] == g.value(enc.states).at(i, 4));
}

TEST_CASE("attention vectors are unit length and weights sum to one") {
  ModelConfig cfg = tiny_cfg();
  ModelParams p = init_params(cfg, 22);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int rep = 0; rep < 1000; ++rep) {
    Graph g;
    Binding bind(g, p);
    int t_o = 1 + rep % 7;
    Graph::Ref states = g.constant(rand_features(cfg.hidden_dim, t_o, 100 + rep));
    AttnCache cache = attn_precompute(g, bind, states, cfg);
    Tensor h = Tensor::zeros({8});
    for (auto& v : h.data) v = u(rng);
    AttendOut att = attend_graph(g, bind, g.constant(h), cache, cfg);

    REQUIRE(cache.heads.size() == 2);
    for (const auto& head : cache.heads) {
      const Tensor& K = g.value(head.keys);
      const Tensor& V = g.value(head.values);
      for (std::size_t j = 0; j < static_cast<std::size_t>(t_o); ++j) {
        double nk = 0.0, nv = 0.0;
        for (std::size_t i = 0; i < K.rows(); ++i) {
          nk += K.at(i, j) * K.at(i, j);
          nv += V.at(i, j) * V.at(i, j);
        }
        CHECK(std::abs(std::sqrt(nk) - 1.0) <= 1e-6);
        CHECK(std::abs(std::sqrt(nv) - 1.0) <= 1e-6);
      }
    }
    for (Graph::Ref wref : att.head_weights) {
      const Tensor& w = g.value(wref);
      double s = 0.0;
      for (double v : w.data) {
        CHECK(v >= 0.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
    CHECK(g.value(att.context).size() == 8);
  }
}

TEST_CASE("teacher forcing runs gt+1 steps, free running stops at eos") {
  ModelConfig cfg = tiny_cfg(Ablation::S2S_TCN);  // no attention
  ModelParams p = init_params(cfg, 23);
  Graph g;
  Binding bind(g, p);
  Graph::Ref h0 = g.constant(Tensor::zeros({8}));

  DecodeResult tf = decode_teacher_forced(g, bind, h0, nullptr, {2, 0, 1}, cfg);
  CHECK(tf.steps.size() == 4);

  // bias the label head so EOS always wins: free run stops after one step
  for (auto& v : p.at("dec.label.W").data) v = 0.0;
  Tensor& b = p.at("dec.label.b");
  for (auto& v : b.data) v = 0.0;
  b.data[static_cast<std::size_t>(cfg.eos_class())] = 5.0;
  Graph g2;
  Binding bind2(g2, p);
  DecodeResult fr = decode_free_running(g2, bind2, g2.constant(Tensor::zeros({8})),
                                        nullptr, 10, cfg);
  CHECK(fr.predicted_labels.empty());
  CHECK_FALSE(fr.truncated);

  // class 1 always wins: truncation at max_steps
  b.data[static_cast<std::size_t>(cfg.eos_class())] = 0.0;
  b.data[1] = 5.0;
  Graph g3;
  Binding bind3(g3, p);
  DecodeResult fr2 = decode_free_running(g3, bind3, g3.constant(Tensor::zeros({8})),
                                         nullptr, 4, cfg);
  CHECK(fr2.predicted_labels == std::vector<int>{1, 1, 1, 1});
  CHECK(fr2.truncated);

  // exact ties resolve to the lowest class index
  b.data[1] = 0.0;
  Graph g4;
  Binding bind4(g4, p);
  DecodeResult fr3 = decode_free_running(g4, bind4, g4.constant(Tensor::zeros({8})),
                                         nullptr, 1, cfg);
  CHECK(fr3.predicted_labels == std::vector<int>{0});
}

TEST_CASE("duration normalization is a softmax over the predicted steps") {
  auto d = normalize_durations({0.0, 0.0});
  CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-12));
  auto e = normalize_durations({std::log(1.0), std::log(3.0)});
  CHECK(e[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(e[1] == doctest::Approx(0.75).epsilon(1e-12));
  double s = 0.0;
  for (double v : normalize_durations({-4.0, 2.5, 0.3, 17.0})) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("anticipation loss hand value") {
  // CE over 3 steps (2 segments + eos) with log-probability logits, MSE over
  // the 2 non-eos steps with equal duration logits.
  ModelConfig cfg = tiny_cfg();
  Graph g;
  DecodeResult dec;
  auto step = [&](std::vector<double> probs, double dur) {
    StepOut s;
    for (auto& v : probs) v = std::log(v);
    s.label_logits = g.constant(Tensor::vec(std::move(probs)));
    s.dur_logit = g.constant(Tensor::scalar(dur));
    return s;
  };
  dec.steps.push_back(step({0.5, 0.25, 0.125, 0.125}, 0.0));   // target 1 -> ln4
  dec.steps.push_back(step({0.5, 0.125, 0.25, 0.125}, 0.0));   // target 0 -> ln2
  dec.steps.push_back(step({0.25, 0.25, 0.25, 0.25}, -3.0));   // target eos -> ln4
  SegmentSeq gt;
  gt.labels = {1, 0};
  gt.rel_durations = {0.25, 0.75};
  Graph::Ref loss = anticipation_loss_graph(g, dec, gt, cfg);
  double ce = (std::log(4.0) + std::log(2.0) + std::log(4.0)) / 3.0;
  double mse_v = ((0.5 - 0.25) * (0.5 - 0.25) + (0.5 - 0.75) * (0.5 - 0.75)) / 2.0;
  CHECK(g.value(loss).data[0] == doctest::Approx(ce + mse_v).epsilon(1e-12));
}

TEST_CASE("full anticipation path gradients match finite differences") {
  ModelConfig cfg = tiny_cfg(Ablation::FULL);
  ModelParams p = init_params(cfg, 29);
  Tensor x = rand_features(cfg.feature_dim, 8, 77);
  SegmentSeq gt;
  gt.labels = {2, 1};
  gt.rel_durations = {0.4, 0.6};

  double err = grad_check(p, [&](const ModelParams& params, GradMap* grads) {
    Graph g;
    Binding bind(g, params);
    TcnGraphOut tcn = tcn_forward_graph(g, bind, g.constant(x), cfg, false);
    EncoderGraphOut enc = encode_graph(g, bind, tcn.features, cfg);
    AttnCache cache = attn_precompute(g, bind, enc.states, cfg);
    DecodeResult dec = decode_teacher_forced(g, bind, enc.final, &cache, gt.labels, cfg);
    Graph::Ref loss = anticipation_loss_graph(g, dec, gt, cfg);
    double v = g.value(loss).data[0];
    if (grads) {
      g.backward(loss);
      bind.collect_grads(*grads);
    }
    return v;
  });
  // central differences at this eps bottom out near 1e-5 from round-off
  CHECK(err < 1e-4);
}
