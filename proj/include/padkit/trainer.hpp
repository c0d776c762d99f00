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
 * @file trainer.hpp
 * @brief Pixel-wise BCE training over stitched samples with Adam and a
 *        step-halving learning rate; best-on-dev-EER checkpointing.
 */

#ifndef PADKIT_TRAINER_HPP
#define PADKIT_TRAINER_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "padkit/ingest.hpp"
#include "padkit/model.hpp"
#include "padkit/patcher.hpp"

namespace padkit {

class TrainerError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kBceEpsilon = 1e-7;

/// Mean over every map entry of -[y log p + (1 - y) log(1 - p)], with p
/// clamped to [kBceEpsilon, 1 - kBceEpsilon].
double pixelwise_bce(std::span<const ProbabilityMap> pred, std::span<const LabelMap> target);

/// Loss and d(loss)/d(logit) = (p - y) / N for a (B, 1, 14, 14) logit batch.
template <typename T>
double bce_with_logits(const nn::Tensor<T>& logits, std::span<const LabelMap> target, nn::Tensor<T>* grad);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction; moments are kept per trainable parameter.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  void step(std::vector<nn::NamedParameter<float>>& params, double lr);
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Where stitched patches come from: the faces of the current batch, or
/// every training face.
enum class StitchPool : std::uint8_t { batch, epoch };
/// Augment the stitched composite, or each source face before decomposition.
enum class AugmentStage : std::uint8_t { composite, source };

std::string_view to_string(StitchPool pool);
StitchPool parse_stitch_pool(std::string_view text);
std::string_view to_string(AugmentStage stage);
AugmentStage parse_augment_stage(std::string_view text);

struct TrainConfig {
  double initial_lr = 0.001;
  int lr_halving_period_epochs = 10;
  int batch_size = 32;
  int epochs = 30;
  std::uint64_t seed = 0;
  StitchStrategy stitch_strategy = StitchStrategy::random;
  StitchPolicy stitch_policy;
  StitchPool stitch_pool = StitchPool::batch;
  AugmentConfig augment;
  AugmentStage augment_stage = AugmentStage::composite;
  AdamConfig adam;
  /// Probability that a training sample is the plain source face instead of
  /// a stitched one; 1 gives the no-stitching baseline.
  double unstitched_fraction = 0.0;
  /// Samples generated per training face per epoch.
  int samples_per_face = 1;
  /// Empty: keep checkpoints in memory only.
  std::filesystem::path checkpoint_dir;

  void validate() const;
  nlohmann::json to_json() const;
};

double lr_at_epoch(const TrainConfig& config, int epoch);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double dev_eer = 0.0;  // percent
  bool checkpoint_saved = false;

  nlohmann::json to_json() const;
};

struct TrainState {
  int epoch = 0;
  std::int64_t step = 0;
  double current_lr = 0.0;
  double best_dev_eer = 0.0;  // percent
  int best_epoch = -1;
  std::vector<EpochRecord> history;
};

struct TrainResult {
  Checkpoint best;
  TrainState state;
};

struct TrainHooks {
  /// Receives one JSON line per epoch.
  std::ostream* log = nullptr;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains `model` in place. On return the model holds the best-epoch weights.
TrainResult train(Model& model, std::span<const AlignedFace> train_faces, std::span<const AlignedFace> dev_faces,
                  const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace padkit

#endif  // PADKIT_TRAINER_HPP
