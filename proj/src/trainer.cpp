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

#include "padkit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "padkit/metrics.hpp"
#include "padkit/rng.hpp"
#include "padkit/scorer.hpp"

namespace padkit {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::size_t kMapCells = static_cast<std::size_t>(kMapSize) * kMapSize;

double clamp_prob(double p) { return std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon); }

double bce_term(double p, std::uint8_t y) {
  p = clamp_prob(p);
  return y ? -std::log(p) : -std::log(1.0 - p);
}

}  // namespace

double pixelwise_bce(std::span<const ProbabilityMap> pred, std::span<const LabelMap> target) {
  if (pred.size() != target.size()) {
    throw TrainerError("pixelwise_bce: " + std::to_string(pred.size()) + " predictions but " +
                       std::to_string(target.size()) + " targets");
  }
  if (pred.empty()) throw TrainerError("pixelwise_bce: empty batch");
  double sum = 0.0;
  for (std::size_t b = 0; b < pred.size(); ++b) {
    for (std::size_t i = 0; i < kMapCells; ++i) {
      const std::uint8_t y = target[b].values[i];
      if (y > 1) throw TrainerError("pixelwise_bce: target entries must be 0 or 1");
      sum += bce_term(pred[b].values[i], y);
    }
  }
  return sum / static_cast<double>(pred.size() * kMapCells);
}

template <typename T>
double bce_with_logits(const nn::Tensor<T>& logits, std::span<const LabelMap> target, nn::Tensor<T>* grad) {
  if (logits.c() != 1 || logits.h() != kMapSize || logits.w() != kMapSize ||
      static_cast<std::size_t>(logits.n()) != target.size()) {
    throw TrainerError("bce_with_logits: logits do not match the target batch");
  }
  const double n = static_cast<double>(logits.numel());
  if (grad) *grad = nn::Tensor<T>(logits.n(), 1, kMapSize, kMapSize);
  double sum = 0.0;
  for (int b = 0; b < logits.n(); ++b) {
    const T* z = logits.sample(b);
    for (std::size_t i = 0; i < kMapCells; ++i) {
      const double p = clamp_prob(1.0 / (1.0 + std::exp(-static_cast<double>(z[i]))));
      const std::uint8_t y = target[static_cast<std::size_t>(b)].values[i];
      sum += bce_term(p, y);
      if (grad) grad->sample(b)[i] = static_cast<T>((p - static_cast<double>(y)) / n);
    }
  }
  return sum / n;
}

template double bce_with_logits<float>(const nn::Tensor<float>&, std::span<const LabelMap>, nn::Tensor<float>*);
template double bce_with_logits<double>(const nn::Tensor<double>&, std::span<const LabelMap>, nn::Tensor<double>*);

std::string_view to_string(StitchPool pool) { return pool == StitchPool::batch ? "batch" : "epoch"; }

StitchPool parse_stitch_pool(std::string_view text) {
  if (text == "batch") return StitchPool::batch;
  if (text == "epoch") return StitchPool::epoch;
  throw TrainerError("unknown stitch pool '" + std::string(text) + "' (expected batch or epoch)");
}

std::string_view to_string(AugmentStage stage) { return stage == AugmentStage::composite ? "composite" : "source"; }

AugmentStage parse_augment_stage(std::string_view text) {
  if (text == "composite") return AugmentStage::composite;
  if (text == "source") return AugmentStage::source;
  throw TrainerError("unknown augment stage '" + std::string(text) + "' (expected composite or source)");
}

void Adam::step(std::vector<nn::NamedParameter<float>>& params, double lr) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].param->trainable) continue;
      m_[i].assign(params[i].param->value.size(), 0.0);
      v_[i].assign(params[i].param->value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw TrainerError("Adam: parameter list changed between steps");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i].param;
    if (!p.trainable) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.value[k] = static_cast<float>(p.value[k] - lr * mhat / (std::sqrt(vhat) + config_.epsilon));
    }
  }
}

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) throw TrainerError("initial_lr must be positive");
  if (lr_halving_period_epochs <= 0) throw TrainerError("lr_halving_period_epochs must be positive");
  if (batch_size <= 0) throw TrainerError("batch_size must be positive");
  if (epochs <= 0) throw TrainerError("epochs must be positive");
  if (samples_per_face <= 0) throw TrainerError("samples_per_face must be positive");
  if (!(unstitched_fraction >= 0.0 && unstitched_fraction <= 1.0)) {
    throw TrainerError("unstitched_fraction must lie in [0, 1]");
  }
  if (!(stitch_policy.bona_fide_fraction >= 0.0 && stitch_policy.bona_fide_fraction <= 1.0)) {
    throw TrainerError("bona_fide_fraction must lie in [0, 1]");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    throw TrainerError("Adam needs beta1, beta2 in [0, 1) and a positive epsilon");
  }
  padkit::validate(augment);
}

json TrainConfig::to_json() const {
  return {{"initial_lr", initial_lr},
          {"lr_halving_period_epochs", lr_halving_period_epochs},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"stitch_strategy", std::string(to_string(stitch_strategy))},
          {"bona_fide_fraction", stitch_policy.bona_fide_fraction},
          {"stitch_pool", std::string(to_string(stitch_pool))},
          {"augment_stage", std::string(to_string(augment_stage))},
          {"unstitched_fraction", unstitched_fraction},
          {"samples_per_face", samples_per_face},
          {"augment",
           {{"flip_probability", augment.flip_probability},
            {"brightness", augment.brightness},
            {"contrast", augment.contrast},
            {"saturation", augment.saturation}}},
          {"optimizer", {{"name", "adam"}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"epsilon", adam.epsilon}}}};
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw TrainerError("epoch must be nonnegative");
  return config.initial_lr * std::ldexp(1.0, -(epoch / config.lr_halving_period_epochs));
}

json EpochRecord::to_json() const {
  return {{"epoch", epoch}, {"lr", lr}, {"train_loss", train_loss}, {"dev_eer", dev_eer},
          {"checkpoint_saved", checkpoint_saved}};
}

namespace {

void require_both(std::span<const AlignedFace> faces, const char* what) {
  bool bona = false, attack = false;
  for (const auto& f : faces) (f.label == Label::bona_fide ? bona : attack) = true;
  if (!bona || !attack) {
    throw TrainerError(std::string(what) + " set must contain both bona fide and attack faces");
  }
}

bool has_both(std::span<const PatchGrid> pool) {
  bool bona = false, attack = false;
  for (const auto& g : pool) (g.label() == Label::bona_fide ? bona : attack) = true;
  return bona && attack;
}

/// One training pair. `own` is the source face's grid, used for plain samples.
StitchedSample make_sample(const TrainConfig& config, std::span<const PatchGrid> pool, const PatchGrid& own,
                           int epoch, std::uint64_t index) {
  Rng stitch_rng(derive_seed(config.seed, {kStreamStitch, static_cast<std::uint64_t>(epoch), index}));
  StitchedSample s = stitch_rng.bernoulli(config.unstitched_fraction)
                         ? unstitched(own)
                         : stitch(config.stitch_strategy, pool, stitch_rng, config.stitch_policy);
  if (config.augment_stage == AugmentStage::source) return s;
  Rng aug_rng(derive_seed(config.seed, {kStreamAugment, static_cast<std::uint64_t>(epoch), index}));
  return augment(std::move(s), aug_rng, config.augment);
}

/// Source-stage augmentation: each face once per epoch, on its own substream.
PatchGrid source_grid(const TrainConfig& config, const AlignedFace& face, int epoch, std::size_t face_index) {
  if (config.augment_stage == AugmentStage::composite) return decompose(face);
  Rng rng(derive_seed(config.seed, {kStreamAugment, static_cast<std::uint64_t>(epoch), 1ULL << 40,
                                    static_cast<std::uint64_t>(face_index)}));
  return decompose(augment_face(face, rng, config.augment));
}

}  // namespace

TrainResult train(Model& model, std::span<const AlignedFace> train_faces, std::span<const AlignedFace> dev_faces,
                  const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (train_faces.empty() || dev_faces.empty()) throw TrainerError("train and dev sets must be nonempty");
  require_both(train_faces, "training");
  require_both(dev_faces, "dev");

  if (!config.checkpoint_dir.empty()) fs::create_directories(config.checkpoint_dir);

  auto params = model.parameters();
  Adam adam(config.adam);
  TrainResult result;
  TrainState& state = result.state;
  const std::size_t per_epoch = train_faces.size() * static_cast<std::size_t>(config.samples_per_face);

  std::vector<Image> images;
  std::vector<LabelMap> targets;
  nn::Tensor<float> grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    state.epoch = epoch;
    state.current_lr = lr_at_epoch(config, epoch);

    std::vector<std::uint64_t> order(per_epoch);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, {kStreamShuffle, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    std::vector<PatchGrid> epoch_pool;
    if (config.stitch_pool == StitchPool::epoch || config.augment_stage == AugmentStage::composite) {
      epoch_pool.reserve(train_faces.size());
      for (std::size_t f = 0; f < train_faces.size(); ++f) {
        epoch_pool.push_back(source_grid(config, train_faces[f], epoch, f));
      }
    }

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::vector<PatchGrid> batch_pool;
    for (std::size_t start = 0; start < per_epoch; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(per_epoch, start + static_cast<std::size_t>(config.batch_size));
      // Pool position of each sample's own face.
      std::vector<std::size_t> own(end - start);
      std::span<const PatchGrid> pool = epoch_pool;
      if (config.stitch_pool == StitchPool::batch) {
        batch_pool.clear();
        std::vector<std::size_t> seen;
        for (std::size_t k = start; k < end; ++k) {
          const std::size_t f = order[k] % train_faces.size();
          const auto it = std::find(seen.begin(), seen.end(), f);
          own[k - start] = static_cast<std::size_t>(it - seen.begin());
          if (it != seen.end()) continue;
          seen.push_back(f);
          batch_pool.push_back(epoch_pool.empty() ? source_grid(config, train_faces[f], epoch, f) : epoch_pool[f]);
        }
        pool = batch_pool;
        // A batch missing a class the policy needs falls back to the epoch pool.
        if (!has_both(pool) && config.unstitched_fraction < 1.0) {
          if (epoch_pool.empty()) {
            for (std::size_t f = 0; f < train_faces.size(); ++f) {
              epoch_pool.push_back(source_grid(config, train_faces[f], epoch, f));
            }
          }
          pool = epoch_pool;
          for (std::size_t k = start; k < end; ++k) own[k - start] = order[k] % train_faces.size();
        }
      } else {
        for (std::size_t k = start; k < end; ++k) own[k - start] = order[k] % train_faces.size();
      }
      images.clear();
      targets.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::uint64_t index = order[k];
        StitchedSample s = make_sample(config, pool, pool[own[k - start]], epoch, index);
        images.push_back(std::move(s.pixels));
        targets.push_back(s.label_map);
      }
      model.zero_grad();
      const nn::Tensor<float> logits = model.forward_logits(model.to_input(images));
      const double loss = bce_with_logits(logits, targets, &grad);
      if (!std::isfinite(loss)) {
        throw TrainerError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(state.step) + " (lr " + std::to_string(state.current_lr) + ")");
      }
      model.backward(grad);
      adam.step(params, state.current_lr);
      ++state.step;
      loss_sum += loss * static_cast<double>(end - start);
      loss_count += end - start;
    }

    const auto dev_scores = score_records(model, dev_faces, config.batch_size);
    const EerResult eer = eer_threshold(dev_scores);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = state.current_lr;
    rec.train_loss = loss_sum / static_cast<double>(loss_count);
    rec.dev_eer = eer.eer;
    rec.checkpoint_saved = state.best_epoch < 0 || eer.eer < state.best_dev_eer;
    if (rec.checkpoint_saved) {
      state.best_dev_eer = eer.eer;
      state.best_epoch = epoch;
      result.best = make_checkpoint(model, epoch, eer.eer);
      result.best.metrics = {{"dev_eer", eer.eer}, {"dev_threshold", eer.threshold}, {"train_loss", rec.train_loss}};
      if (!config.checkpoint_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof(name), "ckpt_epoch%03d.bin", epoch);
        save_checkpoint(config.checkpoint_dir / name, result.best);
        fs::copy_file(config.checkpoint_dir / name, config.checkpoint_dir / "best.bin",
                      fs::copy_options::overwrite_existing);
      }
    }
    state.history.push_back(rec);
    if (hooks.log) *hooks.log << rec.to_json().dump() << '\n' << std::flush;
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }

  load_parameters(model, result.best.parameters);
  return result;
}

}  // namespace padkit
