// Copyright 2026 The padkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "padkit/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "padkit/rng.hpp"

namespace padkit {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Backbone backbone) {
  return backbone == Backbone::tiny ? "tiny" : "dense_truncated";
}

Backbone parse_backbone(std::string_view text) {
  if (text == "tiny") return Backbone::tiny;
  if (text == "dense_truncated") return Backbone::dense_truncated;
  throw ModelError("unknown backbone '" + std::string(text) + "' (expected dense_truncated or tiny)");
}

json ModelConfig::to_json() const {
  return json{{"backbone", std::string(to_string(backbone))},
              {"pretrained", pretrained},
              {"seed", seed},
              {"pretrained_weights", pretrained_weights},
              {"dense_prefix_layers", dense_prefix_layers},
              {"tiny_widths", tiny_widths}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.backbone = parse_backbone(j.at("backbone").get<std::string>());
  c.pretrained = j.value("pretrained", false);
  c.seed = j.value("seed", std::uint64_t{0});
  c.pretrained_weights = j.value("pretrained_weights", std::string());
  c.dense_prefix_layers = j.value("dense_prefix_layers", 8);
  if (j.contains("tiny_widths")) c.tiny_widths = j["tiny_widths"].get<std::array<int, 4>>();
  return c;
}

double ProbabilityMap::mean() const {
  double sum = 0.0;
  for (float v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

float sigmoid_prob(float logit) {
  const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logit)));
  return static_cast<float>(std::clamp(p, static_cast<double>(kProbFloor), 1.0 - static_cast<double>(kProbFloor)));
}

// ---------------------------------------------------------------------------

namespace {

// DenseNet-161 feature stack geometry.
constexpr int kDenseInit = 96;
constexpr int kDenseGrowth = 48;
constexpr int kDenseBnSize = 4;
constexpr std::array<int, 4> kDenseBlockLayers{6, 12, 36, 24};
constexpr int kMaxDenseChildren = 10;

template <typename T>
std::unique_ptr<nn::Sequential<T>> transition(int in, int out) {
  auto t = std::make_unique<nn::Sequential<T>>();
  t->add("norm", std::make_unique<nn::BatchNorm2d<T>>(in))
      .add("relu", std::make_unique<nn::ReLU<T>>())
      .add("conv", std::make_unique<nn::Conv2d<T>>(in, out, 1, 1, 0, false))
      .add("pool", std::make_unique<nn::AvgPool2d<T>>(2));
  return t;
}

/// Appends the first `depth` DenseNet-161 feature children; returns
/// (channels, downsampling factor).
template <typename T>
std::pair<int, int> dense_features(nn::Sequential<T>& features, int depth) {
  int channels = 3, factor = 1, child = 0;
  const auto want = [&] { return child++ < depth; };
  if (want()) {
    features.add("conv0", std::make_unique<nn::Conv2d<T>>(3, kDenseInit, 7, 2, 3, false));
    channels = kDenseInit;
    factor *= 2;
  }
  if (want()) features.add("norm0", std::make_unique<nn::BatchNorm2d<T>>(channels));
  if (want()) features.add("relu0", std::make_unique<nn::ReLU<T>>());
  if (want()) {
    features.add("pool0", std::make_unique<nn::MaxPool2d<T>>(3, 2, 1));
    factor *= 2;
  }
  for (int b = 0; b < 3; ++b) {
    if (want()) {
      auto block = std::make_unique<nn::DenseBlock<T>>(channels, kDenseBlockLayers[b], kDenseGrowth, kDenseBnSize);
      channels = block->out_channels();
      features.add("denseblock" + std::to_string(b + 1), std::move(block));
    }
    if (want()) {
      features.add("transition" + std::to_string(b + 1), transition<T>(channels, channels / 2));
      channels /= 2;
      factor *= 2;
    }
  }
  return {channels, factor};
}

template <typename T>
void initialize(nn::Sequential<T>& net, std::uint64_t seed) {
  std::vector<nn::NamedParameter<T>> params;
  net.collect("", params);
  Rng rng(derive_seed(seed, {kStreamInit}));
  for (auto& [name, p] : params) {
    if (p->shape.size() != 4) continue;  // BN affine/buffers and biases keep their defaults
    const int fan_in = p->shape[1] * p->shape[2] * p->shape[3];
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (T& v : p->value) v = static_cast<T>(rng.normal() * std_dev);
  }
}

}  // namespace

template <typename T>
std::unique_ptr<nn::Sequential<T>> build_network(const ModelConfig& config) {
  auto features = std::make_unique<nn::Sequential<T>>();
  int channels = 0;
  if (config.backbone == Backbone::tiny) {
    int in = 3;
    for (std::size_t i = 0; i < config.tiny_widths.size(); ++i) {
      const int w = config.tiny_widths[i];
      if (w <= 0) throw ModelError("tiny stage widths must be positive");
      auto stage = std::make_unique<nn::Sequential<T>>();
      stage->add("conv", std::make_unique<nn::Conv2d<T>>(in, w, 3, 2, 1, false))
          .add("bn", std::make_unique<nn::BatchNorm2d<T>>(w))
          .add("relu", std::make_unique<nn::ReLU<T>>());
      features->add("stage" + std::to_string(i + 1), std::move(stage));
      in = w;
    }
    channels = in;
  } else {
    const int depth = config.dense_prefix_layers;
    if (depth < 1 || depth > kMaxDenseChildren) {
      throw ModelError("dense_prefix_layers must be in [1, " + std::to_string(kMaxDenseChildren) + "]");
    }
    const auto [c, factor] = dense_features(*features, depth);
    if (factor != kFaceSize / kMapSize) {
      throw ModelError("dense_prefix_layers = " + std::to_string(depth) + " downsamples by " +
                       std::to_string(factor) + ", the map contract needs " + std::to_string(kFaceSize / kMapSize));
    }
    channels = c;
  }
  auto net = std::make_unique<nn::Sequential<T>>();
  net->add("features", std::move(features));
  net->add("head", std::make_unique<nn::Conv2d<T>>(channels, 1, 1, 1, 0, true));
  initialize(*net, config.seed);
  return net;
}

template std::unique_ptr<nn::Sequential<float>> build_network<float>(const ModelConfig&);
template std::unique_ptr<nn::Sequential<double>> build_network<double>(const ModelConfig&);

Model Model::build(const ModelConfig& config, bool load_pretrained) {
  Model m;
  m.config_ = config;
  m.net_ = build_network<float>(config);
  if (load_pretrained && config.pretrained && config.backbone == Backbone::dense_truncated) {
    if (config.pretrained_weights.empty() || !fs::exists(config.pretrained_weights)) {
      throw ModelError("pretrained weights requested but file '" + config.pretrained_weights + "' is absent");
    }
    const auto arrays = read_weights(config.pretrained_weights);
    std::unordered_map<std::string, const NamedArray*> by_name;
    for (const auto& a : arrays) by_name[a.name] = &a;
    for (auto& [name, p] : m.parameters()) {
      if (name.rfind("features.", 0) != 0) continue;
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw ModelError("pretrained weights lack tensor '" + name + "'");
      if (it->second->shape != p->shape) throw ModelError("pretrained tensor '" + name + "' has the wrong shape");
      p->value.assign(it->second->values.begin(), it->second->values.end());
    }
  }
  return m;
}

nn::Tensor<float> Model::to_input(std::span<const Image> images) const {
  nn::Tensor<float> x(static_cast<int>(images.size()), kChannels, kFaceSize, kFaceSize);
  const std::size_t plane = x.plane();
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    if (img.height != kFaceSize || img.width != kFaceSize || img.channels != kChannels) {
      throw ModelError("model input must be 224x224x3, got " + std::to_string(img.height) + "x" +
                       std::to_string(img.width) + "x" + std::to_string(img.channels));
    }
    for (int c = 0; c < kChannels; ++c) {
      float* dst = x.channel(static_cast<int>(i), c);
      const float mean = norm_.mean[static_cast<std::size_t>(c)];
      const float inv = 1.0f / norm_.std[static_cast<std::size_t>(c)];
      for (std::size_t k = 0; k < plane; ++k) dst[k] = (img.data[k * kChannels + static_cast<std::size_t>(c)] - mean) * inv;
    }
  }
  return x;
}

nn::Tensor<float> Model::infer_logits(const nn::Tensor<float>& input) const { return net_->infer(input); }

std::vector<ProbabilityMap> Model::predict(std::span<const Image> images) const {
  const nn::Tensor<float> logits = infer_logits(to_input(images));
  if (logits.c() != 1 || logits.h() != kMapSize || logits.w() != kMapSize) {
    throw ModelError("network produced an unexpected output shape");
  }
  std::vector<ProbabilityMap> maps(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const float* z = logits.sample(static_cast<int>(i));
    std::transform(z, z + kMapSize * kMapSize, maps[i].values.begin(), sigmoid_prob);
  }
  return maps;
}

nn::Tensor<float> Model::forward_logits(const nn::Tensor<float>& input) { return net_->forward(input); }

void Model::backward(const nn::Tensor<float>& grad_logits) { net_->backward(grad_logits); }

std::vector<nn::NamedParameter<float>> Model::parameters() {
  std::vector<nn::NamedParameter<float>> out;
  net_->collect("", out);
  return out;
}

std::size_t Model::trainable_parameter_count() {
  std::size_t n = 0;
  for (auto& [_, p] : parameters()) {
    if (p->trainable) n += p->value.size();
  }
  return n;
}

void Model::zero_grad() {
  for (auto& [_, p] : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

// ---------------------------------------------------------------------------
// Container I/O

namespace {

constexpr char kMagic[8] = {'P', 'A', 'D', 'K', 'C', 'K', 'P', 'T'};

std::uint64_t payload_hash(const std::vector<float>& payload) {
  return fnv1a64(std::as_bytes(std::span(payload)));
}

void write_container(const fs::path& path, json header, const std::vector<NamedArray>& arrays) {
  std::vector<float> payload;
  json tensors = json::array();
  for (const auto& a : arrays) {
    tensors.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", payload.size()}});
    payload.insert(payload.end(), a.values.begin(), a.values.end());
  }
  header["tensors"] = tensors;
  header["payload_floats"] = payload.size();
  header["payload_fnv1a64"] = hex64(payload_hash(payload));
  const std::string text = header.dump();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointErrorKind::io, "cannot write '" + path.string() + "'");
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw CheckpointError(CheckpointErrorKind::io, "short write to '" + path.string() + "'");
}

std::pair<json, std::vector<NamedArray>> read_container(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorKind::io, "cannot open '" + path.string() + "'");
  const auto corrupt = [&](const std::string& why) {
    return CheckpointError(CheckpointErrorKind::corrupt, "corrupt file '" + path.string() + "': " + why);
  };
  const auto file_size = static_cast<std::uint64_t>(fs::file_size(path));
  char magic[8];
  std::uint64_t len = 0;
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw corrupt("bad magic");
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)) || len > file_size - 16) throw corrupt("bad header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw corrupt("truncated header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw corrupt(std::string("header is not JSON: ") + e.what());
  }
  const int version = header.value("format_version", -1);
  if (version != kCheckpointFormatVersion) {
    throw CheckpointError(CheckpointErrorKind::version, "'" + path.string() + "' has format_version " +
                                                            std::to_string(version) + ", this build reads " +
                                                            std::to_string(kCheckpointFormatVersion));
  }
  std::vector<NamedArray> arrays;
  try {
    const auto n = header.at("payload_floats").get<std::uint64_t>();
    if (file_size != 16 + len + n * sizeof(float)) throw corrupt("payload size does not match header");
    std::vector<float> payload(n);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw corrupt("truncated payload");
    if (hex64(payload_hash(payload)) != header.at("payload_fnv1a64").get<std::string>()) {
      throw corrupt("payload checksum mismatch");
    }
    for (const auto& t : header.at("tensors")) {
      NamedArray a;
      a.name = t.at("name").get<std::string>();
      a.shape = t.at("shape").get<std::vector<int>>();
      std::size_t count = 1;
      for (int d : a.shape) count *= static_cast<std::size_t>(d);
      const auto offset = t.at("offset").get<std::size_t>();
      if (offset + count > payload.size()) throw corrupt("tensor '" + a.name + "' runs past the payload");
      a.values.assign(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                      payload.begin() + static_cast<std::ptrdiff_t>(offset + count));
      arrays.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw corrupt(std::string("malformed header: ") + e.what());
  }
  return {std::move(header), std::move(arrays)};
}

}  // namespace

Checkpoint make_checkpoint(Model& model, int training_epoch, double dev_eer_at_save) {
  Checkpoint cp;
  cp.model_config = model.config();
  cp.normalization = model.normalization();
  cp.training_epoch = training_epoch;
  cp.dev_eer_at_save = dev_eer_at_save;
  for (auto& [name, p] : model.parameters()) cp.parameters.push_back({name, p->shape, {p->value.begin(), p->value.end()}});
  return cp;
}

void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
  json header = {{"format_version", checkpoint.format_version},
                 {"kind", "checkpoint"},
                 {"model_config", checkpoint.model_config.to_json()},
                 {"normalization", {{"mean", checkpoint.normalization.mean}, {"std", checkpoint.normalization.std}}},
                 {"training_epoch", checkpoint.training_epoch},
                 {"dev_eer_at_save", checkpoint.dev_eer_at_save},
                 {"metrics", checkpoint.metrics}};
  write_container(path, std::move(header), checkpoint.parameters);
}

Checkpoint read_checkpoint(const fs::path& path) {
  auto [header, arrays] = read_container(path);
  Checkpoint cp;
  try {
    if (header.value("kind", std::string()) != "checkpoint") {
      throw CheckpointError(CheckpointErrorKind::corrupt, "'" + path.string() + "' is not a checkpoint");
    }
    cp.format_version = header.at("format_version").get<int>();
    cp.model_config = ModelConfig::from_json(header.at("model_config"));
    cp.normalization.mean = header.at("normalization").at("mean").get<std::array<float, 3>>();
    cp.normalization.std = header.at("normalization").at("std").get<std::array<float, 3>>();
    cp.training_epoch = header.value("training_epoch", -1);
    cp.dev_eer_at_save = header.value("dev_eer_at_save", -1.0);
    cp.metrics = header.value("metrics", json::object());
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointErrorKind::corrupt, "corrupt checkpoint header: " + std::string(e.what()));
  } catch (const ModelError& e) {
    throw CheckpointError(CheckpointErrorKind::corrupt, "corrupt checkpoint header: " + std::string(e.what()));
  }
  cp.parameters = std::move(arrays);
  return cp;
}

void load_parameters(Model& model, const std::vector<NamedArray>& arrays) {
  std::unordered_map<std::string, const NamedArray*> by_name;
  for (const auto& a : arrays) by_name[a.name] = &a;
  auto params = model.parameters();
  if (params.size() != arrays.size()) {
    throw CheckpointError(CheckpointErrorKind::shape, "checkpoint holds " + std::to_string(arrays.size()) +
                                                          " tensors, the model expects " +
                                                          std::to_string(params.size()));
  }
  for (auto& [name, p] : params) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError(CheckpointErrorKind::shape, "checkpoint lacks tensor '" + name + "'");
    if (it->second->shape != p->shape) {
      throw CheckpointError(CheckpointErrorKind::shape, "tensor '" + name + "' has a mismatched shape");
    }
  }
  for (auto& [name, p] : params) {
    const auto& values = by_name.at(name)->values;
    p->value.assign(values.begin(), values.end());
  }
}

Model model_from_checkpoint(const Checkpoint& checkpoint) {
  Model model = Model::build(checkpoint.model_config, /*load_pretrained=*/false);
  load_parameters(model, checkpoint.parameters);
  model.set_normalization(checkpoint.normalization);
  return model;
}

Model load_checkpoint(const fs::path& path, Checkpoint* meta) {
  Checkpoint cp = read_checkpoint(path);
  Model model = model_from_checkpoint(cp);
  if (meta) *meta = std::move(cp);
  return model;
}

void save_weights(const fs::path& path, const std::vector<NamedArray>& arrays) {
  write_container(path, json{{"format_version", kCheckpointFormatVersion}, {"kind", "weights"}}, arrays);
}

std::vector<NamedArray> read_weights(const fs::path& path) { return read_container(path).second; }

}  // namespace padkit
