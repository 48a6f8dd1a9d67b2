#include "anticipate/model.hpp"

#include <cmath>

namespace anticipate {

const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::S2S: return "s2s";
    case Ablation::S2S_TCN: return "s2s_tcn";
    case Ablation::S2S_TCN_REC: return "s2s_tcn_rec";
    case Ablation::S2S_TCN_REC_CYC: return "s2s_tcn_rec_cyc";
    case Ablation::FULL: return "full";
  }
  return "full";
}

Ablation ablation_from_name(const std::string& s) {
  if (s == "s2s") return Ablation::S2S;
  if (s == "s2s_tcn") return Ablation::S2S_TCN;
  if (s == "s2s_tcn_rec") return Ablation::S2S_TCN_REC;
  if (s == "s2s_tcn_rec_cyc") return Ablation::S2S_TCN_REC_CYC;
  if (s == "full") return Ablation::FULL;
  throw InputError("unknown ablation mode: " + s);
}

void ModelConfig::validate() const {
  if (num_classes < 2) throw InputError("config: num_classes >= 2 required");
  if (feature_dim < 1) throw InputError("config: feature_dim >= 1 required");
  if (use_tcn() && (tcn_layers < 1 || tcn_filters < 1))
    throw InputError("config: tcn_layers and tcn_filters must be positive");
  if (hidden_dim < 1) throw InputError("config: hidden_dim >= 1 required");
  if (use_attention() && (heads < 1 || hidden_dim % heads != 0))
    throw InputError("config: hidden_dim must be divisible by heads");
  if (use_tcn() && encoder_input == EncoderInput::RawFeatures)
    throw InputError("config: raw encoder input is only valid in s2s mode");
}

namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor weight(std::vector<std::size_t> shape, std::size_t fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = dist(rng_);
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

void add_gru(ModelParams& p, Initializer& init, const std::string& prefix,
             std::size_t hidden, std::size_t input) {
  for (const char* gate : {"z", "r", "h"}) {
    p.add(prefix + ".W" + gate, init.weight({hidden, input}, input));
    p.add(prefix + ".U" + gate, init.weight({hidden, hidden}, hidden));
    p.add(prefix + ".b" + gate, Tensor::zeros({hidden}));
  }
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  Initializer init(seed);
  std::size_t C = static_cast<std::size_t>(cfg.num_classes);
  std::size_t D = static_cast<std::size_t>(cfg.feature_dim);
  std::size_t K = static_cast<std::size_t>(cfg.tcn_filters);
  std::size_t H = static_cast<std::size_t>(cfg.hidden_dim);

  if (cfg.use_tcn()) {
    p.add("tcn.in_proj.W", init.weight({K, D}, D));
    p.add("tcn.in_proj.b", Tensor::zeros({K}));
    for (int l = 0; l < cfg.tcn_layers; ++l) {
      std::string pre = "tcn.layer" + std::to_string(l);
      p.add(pre + ".W1", init.weight({3, K, K}, 3 * K));
      p.add(pre + ".b1", Tensor::zeros({K}));
      p.add(pre + ".W2", init.weight({K, K}, K));
      p.add(pre + ".b2", Tensor::zeros({K}));
    }
    if (cfg.use_rec_loss() || cfg.encoder_input == EncoderInput::FrameProbs) {
      p.add("tcn.cls.W", init.weight({C, K}, K));
      p.add("tcn.cls.b", Tensor::zeros({C}));
    }
  }

  std::size_t enc_in = static_cast<std::size_t>(cfg.encoder_input_dim());
  add_gru(p, init, "enc.gru", H, enc_in);

  std::size_t dec_in = static_cast<std::size_t>(cfg.decoder_input_dim());
  add_gru(p, init, "dec.gru", H, dec_in);
  p.add("dec.label.W", init.weight({C + 1, H}, H));
  p.add("dec.label.b", Tensor::zeros({C + 1}));
  p.add("dec.dur.W", init.weight({1, H}, H));
  p.add("dec.dur.b", Tensor::zeros({1}));

  if (cfg.use_attention()) {
    std::size_t dA = static_cast<std::size_t>(cfg.attn_dim());
    for (int h = 0; h < cfg.heads; ++h) {
      std::string pre = "attn.head" + std::to_string(h);
      p.add(pre + ".Wq", init.weight({dA, H}, H));
      p.add(pre + ".Wk", init.weight({dA, H}, H));
      p.add(pre + ".Wv", init.weight({dA, H}, H));
    }
    std::size_t cat = dA * static_cast<std::size_t>(cfg.heads);
    p.add("attn.out.W", init.weight({H, cat}, cat));
    p.add("attn.out.b", Tensor::zeros({H}));
  }

  if (cfg.use_cycle()) {
    add_gru(p, init, "cyc.gru", H, C + 1);
    p.add("cyc.label.W", init.weight({C + 1, H}, H));
    p.add("cyc.label.b", Tensor::zeros({C + 1}));
    p.add("cyc.dur.W", init.weight({1, H}, H));
    p.add("cyc.dur.b", Tensor::zeros({1}));
  }

  return p;
}

}  // namespace anticipate
