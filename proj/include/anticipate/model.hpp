#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "anticipate/graph.hpp"
#include "anticipate/tensor.hpp"

namespace anticipate {

// Named parameter collection. Insertion order is the canonical order for
// checkpoints and optimizer traversal.
struct ModelParams {
  std::vector<std::string> names;
  std::unordered_map<std::string, Tensor> tensors;

  Tensor& add(const std::string& name, Tensor t) {
    if (tensors.count(name)) throw InputError("duplicate parameter name: " + name);
    names.push_back(name);
    return tensors[name] = std::move(t);
  }
  Tensor& at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw InputError("unknown parameter: " + name);
    return it->second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw InputError("unknown parameter: " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return tensors.count(name) != 0; }
};

using GradMap = std::unordered_map<std::string, std::vector<double>>;

enum class Ablation { S2S, S2S_TCN, S2S_TCN_REC, S2S_TCN_REC_CYC, FULL };
enum class EncoderInput { TcnFeatures, RawFeatures, FrameProbs };

const char* ablation_name(Ablation a);
Ablation ablation_from_name(const std::string& s);

struct ModelConfig {
  int num_classes = 12;
  int feature_dim = 16;
  int tcn_layers = 10;
  int tcn_filters = 64;
  int hidden_dim = 512;
  int heads = 8;
  Ablation ablation = Ablation::FULL;
  EncoderInput encoder_input = EncoderInput::TcnFeatures;
  bool cycle_reverse = false;  // reconstruct past in reverse order

  bool use_tcn() const { return ablation != Ablation::S2S; }
  bool use_rec_loss() const {
    return ablation == Ablation::S2S_TCN_REC || ablation == Ablation::S2S_TCN_REC_CYC ||
           ablation == Ablation::FULL;
  }
  bool use_cycle() const {
    return ablation == Ablation::S2S_TCN_REC_CYC || ablation == Ablation::FULL;
  }
  bool use_attention() const { return ablation == Ablation::FULL; }

  int attn_dim() const { return hidden_dim / heads; }
  // Encoder consumes TCN features, raw frame features, or frame probabilities.
  int encoder_input_dim() const {
    if (!use_tcn() || encoder_input == EncoderInput::RawFeatures) return feature_dim;
    if (encoder_input == EncoderInput::FrameProbs) return num_classes;
    return tcn_filters;
  }
  // One-hot over C+1 symbols (classes + SOS), plus attention context if enabled.
  int decoder_input_dim() const {
    return num_classes + 1 + (use_attention() ? hidden_dim : 0);
  }
  int sos_symbol() const { return num_classes; }
  int eos_class() const { return num_classes; }

  void validate() const;
};

// Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weights, zero biases, seeded.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Binds parameter tensors to graph leaves lazily; collects grads after backward.
class Binding {
 public:
  Binding(Graph& g, const ModelParams& p) : g_(g), params_(p) {}

  Graph::Ref operator()(const std::string& name) {
    auto it = refs_.find(name);
    if (it != refs_.end()) return it->second;
    Graph::Ref r = g_.param(params_.at(name));
    refs_.emplace(name, r);
    return r;
  }
  Graph::GruRefs gru(const std::string& prefix) {
    return Graph::GruRefs{(*this)(prefix + ".Wz"), (*this)(prefix + ".Uz"),
                          (*this)(prefix + ".bz"), (*this)(prefix + ".Wr"),
                          (*this)(prefix + ".Ur"), (*this)(prefix + ".br"),
                          (*this)(prefix + ".Wh"), (*this)(prefix + ".Uh"),
                          (*this)(prefix + ".bh")};
  }
  // Accumulates d(loss)/d(param) into `out` keyed by parameter name.
  void collect_grads(GradMap& out) const {
    for (const auto& [name, ref] : refs_) {
      const auto& g = g_.grad(ref);
      if (g.empty()) continue;
      auto& dst = out[name];
      if (dst.empty()) dst.assign(g.size(), 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  }

 private:
  Graph& g_;
  const ModelParams& params_;
  std::unordered_map<std::string, Graph::Ref> refs_;
};

}  // namespace anticipate
