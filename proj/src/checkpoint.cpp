#include "anticipate/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace anticipate {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

float get_f32(std::istream& is) {
  std::uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot write " + tmp.string());
    os.write("CKPT", 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(params.names.size()));
    for (const auto& name : params.names) {
      const Tensor& t = params.at(name);
      put_u32(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u32(os, static_cast<std::uint32_t>(t.rank()));
      for (auto d : t.shape) put_u32(os, static_cast<std::uint32_t>(d));
      for (double v : t.data) put_f32(os, static_cast<float>(v));
    }
    if (!os) throw IoError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "CKPT", 4) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  std::uint32_t count = get_u32(is);
  ModelParams params;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t nlen = get_u32(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    if (!is) throw IoError("checkpoint: truncated name");
    std::uint32_t rank = get_u32(is);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = get_u32(is);
      n *= d;
    }
    Tensor t = Tensor::zeros(shape);
    for (std::size_t j = 0; j < n; ++j) t.data[j] = static_cast<double>(get_f32(is));
    params.add(name, std::move(t));
  }
  return params;
}

namespace {
constexpr const char* kMetaName = "meta.hparams";
}

void save_model(const std::string& path, const ModelConfig& cfg, const ModelParams& params) {
  ModelParams out;
  Tensor meta = Tensor::vec({static_cast<double>(cfg.num_classes),
                             static_cast<double>(cfg.feature_dim),
                             static_cast<double>(cfg.tcn_layers),
                             static_cast<double>(cfg.tcn_filters),
                             static_cast<double>(cfg.hidden_dim),
                             static_cast<double>(cfg.heads),
                             static_cast<double>(static_cast<int>(cfg.ablation)),
                             static_cast<double>(static_cast<int>(cfg.encoder_input)),
                             cfg.cycle_reverse ? 1.0 : 0.0});
  out.add(kMetaName, std::move(meta));
  for (const auto& name : params.names) out.add(name, params.at(name));
  save_checkpoint(path, out);
}

std::pair<ModelConfig, ModelParams> load_model(const std::string& path) {
  ModelParams raw = load_checkpoint(path);
  if (!raw.has(kMetaName))
    throw IoError("checkpoint: missing meta.hparams in " + path);
  const Tensor& meta = raw.at(kMetaName);
  if (meta.size() != 9) throw IoError("checkpoint: malformed meta.hparams");
  ModelConfig cfg;
  cfg.num_classes = static_cast<int>(meta.data[0]);
  cfg.feature_dim = static_cast<int>(meta.data[1]);
  cfg.tcn_layers = static_cast<int>(meta.data[2]);
  cfg.tcn_filters = static_cast<int>(meta.data[3]);
  cfg.hidden_dim = static_cast<int>(meta.data[4]);
  cfg.heads = static_cast<int>(meta.data[5]);
  cfg.ablation = static_cast<Ablation>(static_cast<int>(meta.data[6]));
  cfg.encoder_input = static_cast<EncoderInput>(static_cast<int>(meta.data[7]));
  cfg.cycle_reverse = meta.data[8] != 0.0;
  cfg.validate();
  ModelParams params;
  for (const auto& name : raw.names)
    if (name != kMetaName) params.add(name, raw.at(name));
  return {cfg, std::move(params)};
}

}  // namespace anticipate
