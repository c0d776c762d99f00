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

/**
 * @file model.hpp
 * @brief Map-producing network: 224x224x3 image in, 14x14 probability map out.
 *
 * Two backbones share the same contract (x16 spatial downsampling, then a
 * 1x1 convolution to one channel and a sigmoid):
 *
 *  - dense_truncated: the first `dense_prefix_layers` children of a
 *    DenseNet-161 feature stack (conv0, norm0, relu0, pool0, denseblock1,
 *    transition1, denseblock2, transition2 for the default of 8).
 *  - tiny: four stride-2 conv3x3/BN/ReLU stages, for desk-scale runs.
 *
 * Parameter names follow torchvision's DenseNet state_dict under the
 * "features." prefix, so converted pretrained weights load by name.
 */

#ifndef PADKIT_MODEL_HPP
#define PADKIT_MODEL_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "padkit/common.hpp"
#include "padkit/image.hpp"
#include "padkit/nn/layers.hpp"

namespace padkit {

enum class Backbone : std::uint8_t { dense_truncated, tiny };

std::string_view to_string(Backbone backbone);
Backbone parse_backbone(std::string_view text);

struct ModelConfig {
  Backbone backbone = Backbone::tiny;
  bool pretrained = false;
  std::uint64_t seed = 0;
  /// External weight file for pretrained dense_truncated backbones.
  std::string pretrained_weights;
  /// Number of DenseNet feature children kept; only 8 yields the x16 contract.
  int dense_prefix_layers = 8;
  /// Output channels of the four tiny stages (about 47k parameters by default).
  std::array<int, 4> tiny_widths{16, 32, 48, 64};

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Per-channel input normalization, (x - mean) / std, applied inside the model.
struct Normalization {
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> std{0.229f, 0.224f, 0.225f};
};

/// Sigmoid outputs are clamped to [kProbFloor, 1 - kProbFloor] so every map
/// entry stays strictly inside (0, 1) in single precision.
inline constexpr float kProbFloor = 1e-7f;

struct ProbabilityMap {
  std::array<float, kMapSize * kMapSize> values{};

  float at(int row, int col) const { return values[static_cast<std::size_t>(row * kMapSize + col)]; }
  double mean() const;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

/// Builds the full logit network (backbone + 1x1 head) for either scalar
/// type. The double instantiation exists for finite-difference checks.
template <typename T>
std::unique_ptr<nn::Sequential<T>> build_network(const ModelConfig& config);

class Model {
 public:
  /// Validates the config, initializes weights from config.seed and, when
  /// config.pretrained is set, loads backbone weights from the external file.
  /// load_pretrained = false skips the file (weights restored elsewhere).
  static Model build(const ModelConfig& config, bool load_pretrained = true);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  const Normalization& normalization() const { return norm_; }
  void set_normalization(const Normalization& norm) { norm_ = norm; }

  /// Normalized NCHW batch; throws ModelError on a wrong spatial size.
  nn::Tensor<float> to_input(std::span<const Image> images) const;

  /// Inference mode: batch-norm running statistics, no cached state.
  std::vector<ProbabilityMap> predict(std::span<const Image> images) const;
  nn::Tensor<float> infer_logits(const nn::Tensor<float>& input) const;

  /// Training mode: batch statistics; caches activations for backward().
  nn::Tensor<float> forward_logits(const nn::Tensor<float>& input);
  void backward(const nn::Tensor<float>& grad_logits);

  std::vector<nn::NamedParameter<float>> parameters();
  std::size_t trainable_parameter_count();
  void zero_grad();

 private:
  Model() = default;
  ModelConfig config_;
  Normalization norm_;
  std::unique_ptr<nn::Sequential<float>> net_;
};

float sigmoid_prob(float logit);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Container layout (little endian):
//   8 bytes   magic "PADKCKPT"
//   8 bytes   u64 header length L
//   L bytes   UTF-8 JSON header: format_version, kind, model_config,
//             normalization, training_epoch, dev_eer_at_save, metrics,
//             tensors [{name, shape, offset}], payload_floats,
//             payload_fnv1a64
//   rest      float32 payload, tensors concatenated in header order
// Pretrained weight files use the same container with kind "weights".

inline constexpr int kCheckpointFormatVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
};

struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  ModelConfig model_config;
  Normalization normalization;
  std::vector<NamedArray> parameters;
  int training_epoch = -1;
  double dev_eer_at_save = -1.0;
  nlohmann::json metrics = nlohmann::json::object();
};

enum class CheckpointErrorKind : std::uint8_t { io, corrupt, version, shape };

class CheckpointError : public Error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

Checkpoint make_checkpoint(Model& model, int training_epoch, double dev_eer_at_save);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Copies values by name; every model tensor must be present with its shape.
void load_parameters(Model& model, const std::vector<NamedArray>& arrays);
Model model_from_checkpoint(const Checkpoint& checkpoint);
Model load_checkpoint(const std::filesystem::path& path, Checkpoint* meta = nullptr);

/// Bare named-tensor file for pretrained backbone weights.
void save_weights(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_weights(const std::filesystem::path& path);

}  // namespace padkit

#endif  // PADKIT_MODEL_HPP
