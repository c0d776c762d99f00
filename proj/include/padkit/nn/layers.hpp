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
 * @file layers.hpp
 * @brief Minimal CNN layers with hand-written backward passes.
 *
 * forward() is the training path: it caches what backward() needs and may
 * update persistent buffers. infer() is const and touches no layer state, so
 * a frozen network can be shared across threads. Layers are instantiated
 * for float (training) and double (gradient checks).
 */

#ifndef PADKIT_NN_LAYERS_HPP
#define PADKIT_NN_LAYERS_HPP

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "padkit/nn/tensor.hpp"

namespace padkit::nn {

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad) = 0;
  virtual void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    (void)prefix;
    (void)out;
  }
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, bool bias);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad) override;
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;

  Parameter<T>& weight() { return weight_; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

 private:
  int out_size(int n) const { return (n + 2 * pad_ - k_) / stride_ + 1; }
  bool pointwise() const { return k_ == 1 && stride_ == 1 && pad_ == 0; }
  void im2col(const T* img, int h, int w, T* cols) const;
  void col2im(const T* cols, int h, int w, T* img) const;

  int in_, out_, k_, stride_, pad_;
  bool has_bias_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

/// Batch normalization over (N, H, W) per channel. Running statistics use
/// momentum 0.1 and the unbiased batch variance.
template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(int channels, T eps = T(1e-5), T momentum = T(0.1));

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad) override;
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;

 private:
  int channels_;
  T eps_, momentum_;
  Parameter<T> weight_, bias_, running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad) override;

 private:
  Tensor<T> output_;
};

template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  MaxPool2d(int kernel, int stride, int padding) : k_(kernel), stride_(stride), pad_(padding) {}
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad) override;

 private:
  Tensor<T> run(const Tensor<T>& x, std::vector<int>* argmax) const;
  int k_, stride_, pad_;
  std::array<int, 4> in_shape_{};
  std::vector<int> argmax_;
};

/// Non-overlapping average pooling (kernel == stride).
template <typename T>
class AvgPool2d final : public Layer<T> {
 public:
  explicit AvgPool2d(int kernel) : k_(kernel) {}
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad) override;

 private:
  int k_;
  std::array<int, 4> in_shape_{};
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential& add(std::string name, std::unique_ptr<Layer<T>> layer) {
    layers_.emplace_back(std::move(name), std::move(layer));
    return *this;
  }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad) override;
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer<T>>>> layers_;
};

/// Densely connected block: layer i sees the concatenation of the block input
/// and the outputs of layers 0..i-1; the block emits the full concatenation.
/// Each layer is BN-ReLU-Conv1x1(bn_size*growth)-BN-ReLU-Conv3x3(growth).
template <typename T>
class DenseBlock final : public Layer<T> {
 public:
  DenseBlock(int in_channels, int num_layers, int growth_rate, int bn_size);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& grad) override;
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
  int out_channels() const { return in_ + static_cast<int>(layers_.size()) * growth_; }

 private:
  int in_, growth_;
  std::vector<std::unique_ptr<Sequential<T>>> layers_;
};

}  // namespace padkit::nn

#endif  // PADKIT_NN_LAYERS_HPP
