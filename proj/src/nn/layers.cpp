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

#include "padkit/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace padkit::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int begin, int count) {
  Tensor<T> out(t.n(), count, t.h(), t.w());
  const std::size_t bytes = static_cast<std::size_t>(count) * t.plane() * sizeof(T);
  for (int i = 0; i < t.n(); ++i) std::memcpy(out.sample(i), t.channel(i, begin), bytes);
  return out;
}

template <typename T>
void write_channels(Tensor<T>& dst, int begin, const Tensor<T>& src) {
  const std::size_t bytes = src.per_sample() * sizeof(T);
  for (int i = 0; i < dst.n(); ++i) std::memcpy(dst.channel(i, begin), src.sample(i), bytes);
}

template <typename T>
void add_channels(Tensor<T>& dst, int begin, const Tensor<T>& src) {
  const std::size_t n = src.per_sample();
  for (int i = 0; i < dst.n(); ++i) {
    T* d = dst.channel(i, begin);
    const T* s = src.sample(i);
    for (std::size_t k = 0; k < n; ++k) d[k] += s[k];
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, bool bias)
    : in_(in_channels),
      out_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding),
      has_bias_(bias),
      weight_({out_channels, in_channels, kernel, kernel}, true),
      bias_(bias ? Parameter<T>({out_channels}, true) : Parameter<T>()) {}

template <typename T>
void Conv2d<T>::im2col(const T* img, int h, int w, T* cols) const {
  const int oh = out_size(h), ow = out_size(w);
  for (int c = 0; c < in_; ++c) {
    const T* plane = img + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        T* row = cols + (static_cast<std::size_t>((c * k_ + ky) * k_ + kx)) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          T* dst = row + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void Conv2d<T>::col2im(const T* cols, int h, int w, T* img) const {
  const int oh = out_size(h), ow = out_size(w);
  for (int c = 0; c < in_; ++c) {
    T* plane = img + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const T* row = cols + (static_cast<std::size_t>((c * k_ + ky) * k_ + kx)) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * ow;
          T* dst = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::infer(const Tensor<T>& x) const {
  require(x.c() == in_, "Conv2d: input channel mismatch");
  const int oh = out_size(x.h()), ow = out_size(x.w());
  require(oh > 0 && ow > 0, "Conv2d: input smaller than kernel");
  const int rows = in_ * k_ * k_;
  const int pixels = oh * ow;
  Tensor<T> out(x.n(), out_, oh, ow);
  AlignedVector<T> cols(pointwise() ? 0 : static_cast<std::size_t>(rows) * pixels);
  Eigen::Map<const RowMat<T>> W(weight_.value.data(), out_, rows);
  for (int i = 0; i < x.n(); ++i) {
    const T* src = x.sample(i);
    if (!pointwise()) {
      im2col(src, x.h(), x.w(), cols.data());
      src = cols.data();
    }
    Eigen::Map<const RowMat<T>> C(src, rows, pixels);
    Eigen::Map<RowMat<T>> O(out.sample(i), out_, pixels);
    O.noalias() = W * C;
    if (has_bias_) O.colwise() += Eigen::Map<const Vec<T>>(bias_.value.data(), out_);
  }
  return out;
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return infer(x);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad) {
  const Tensor<T>& x = input_;
  const int oh = out_size(x.h()), ow = out_size(x.w());
  require(grad.n() == x.n() && grad.c() == out_ && grad.h() == oh && grad.w() == ow, "Conv2d: grad shape mismatch");
  const int rows = in_ * k_ * k_;
  const int pixels = oh * ow;
  Tensor<T> dx(x.n(), in_, x.h(), x.w());
  AlignedVector<T> cols(pointwise() ? 0 : static_cast<std::size_t>(rows) * pixels);
  AlignedVector<T> dcols(cols.size());
  Eigen::Map<const RowMat<T>> W(weight_.value.data(), out_, rows);
  Eigen::Map<RowMat<T>> dW(weight_.grad.data(), out_, rows);
  for (int i = 0; i < x.n(); ++i) {
    const T* src = x.sample(i);
    if (!pointwise()) {
      im2col(src, x.h(), x.w(), cols.data());
      src = cols.data();
    }
    Eigen::Map<const RowMat<T>> C(src, rows, pixels);
    Eigen::Map<const RowMat<T>> G(grad.sample(i), out_, pixels);
    dW.noalias() += G * C.transpose();
    if (has_bias_) Eigen::Map<Vec<T>>(bias_.grad.data(), out_) += G.rowwise().sum();
    if (pointwise()) {
      Eigen::Map<RowMat<T>>(dx.sample(i), in_, pixels).noalias() = W.transpose() * G;
    } else {
      Eigen::Map<RowMat<T>>(dcols.data(), rows, pixels).noalias() = W.transpose() * G;
      col2im(dcols.data(), x.h(), x.w(), dx.sample(i));
    }
  }
  return dx;
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
  out.push_back({prefix + "weight", &weight_});
  if (has_bias_) out.push_back({prefix + "bias", &bias_});
}

// ---------------------------------------------------------------------------
// BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(int channels, T eps, T momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      weight_({channels}, true, T(1)),
      bias_({channels}, true, T(0)),
      running_mean_({channels}, false, T(0)),
      running_var_({channels}, false, T(1)) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::infer(const Tensor<T>& x) const {
  require(x.c() == channels_, "BatchNorm2d: channel mismatch");
  Tensor<T> y(x.n(), x.c(), x.h(), x.w());
  const std::size_t plane = x.plane();
  for (int c = 0; c < channels_; ++c) {
    const T inv = T(1) / std::sqrt(running_var_.value[c] + eps_);
    const T scale = weight_.value[c] * inv;
    const T shift = bias_.value[c] - running_mean_.value[c] * scale;
    for (int i = 0; i < x.n(); ++i) {
      const T* src = x.channel(i, c);
      T* dst = y.channel(i, c);
      for (std::size_t k = 0; k < plane; ++k) dst[k] = src[k] * scale + shift;
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x) {
  require(x.c() == channels_, "BatchNorm2d: channel mismatch");
  const std::size_t plane = x.plane();
  const double count = static_cast<double>(x.n()) * static_cast<double>(plane);
  Tensor<T> y(x.n(), x.c(), x.h(), x.w());
  xhat_ = Tensor<T>(x.n(), x.c(), x.h(), x.w());
  inv_std_.assign(static_cast<std::size_t>(channels_), T(0));
  for (int c = 0; c < channels_; ++c) {
    double sum = 0.0;
    for (int i = 0; i < x.n(); ++i) {
      const T* src = x.channel(i, c);
      for (std::size_t k = 0; k < plane; ++k) sum += static_cast<double>(src[k]);
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (int i = 0; i < x.n(); ++i) {
      const T* src = x.channel(i, c);
      for (std::size_t k = 0; k < plane; ++k) {
        const double d = static_cast<double>(src[k]) - mean;
        sq += d * d;
      }
    }
    const double var = sq / count;
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps_));
    inv_std_[static_cast<std::size_t>(c)] = static_cast<T>(inv);
    const T g = weight_.value[c], b = bias_.value[c];
    for (int i = 0; i < x.n(); ++i) {
      const T* src = x.channel(i, c);
      T* xh = xhat_.channel(i, c);
      T* dst = y.channel(i, c);
      for (std::size_t k = 0; k < plane; ++k) {
        xh[k] = static_cast<T>((static_cast<double>(src[k]) - mean) * inv);
        dst[k] = g * xh[k] + b;
      }
    }
    const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
    running_mean_.value[c] = static_cast<T>((1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean);
    running_var_.value[c] = static_cast<T>((1.0 - momentum_) * running_var_.value[c] + momentum_ * unbiased);
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad) {
  const std::size_t plane = grad.plane();
  const double count = static_cast<double>(grad.n()) * static_cast<double>(plane);
  Tensor<T> dx(grad.n(), grad.c(), grad.h(), grad.w());
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < grad.n(); ++i) {
      const T* dy = grad.channel(i, c);
      const T* xh = xhat_.channel(i, c);
      for (std::size_t k = 0; k < plane; ++k) {
        sum_dy += static_cast<double>(dy[k]);
        sum_dy_xhat += static_cast<double>(dy[k]) * static_cast<double>(xh[k]);
      }
    }
    weight_.grad[c] += static_cast<T>(sum_dy_xhat);
    bias_.grad[c] += static_cast<T>(sum_dy);
    const double scale = static_cast<double>(weight_.value[c]) * inv_std_[static_cast<std::size_t>(c)] / count;
    const double mean_dy = sum_dy, mean_dy_xhat = sum_dy_xhat;
    for (int i = 0; i < grad.n(); ++i) {
      const T* dy = grad.channel(i, c);
      const T* xh = xhat_.channel(i, c);
      T* d = dx.channel(i, c);
      for (std::size_t k = 0; k < plane; ++k) {
        d[k] = static_cast<T>(scale * (count * dy[k] - mean_dy - static_cast<double>(xh[k]) * mean_dy_xhat));
      }
    }
  }
  return dx;
}

template <typename T>
void BatchNorm2d<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
  out.push_back({prefix + "weight", &weight_});
  out.push_back({prefix + "bias", &bias_});
  out.push_back({prefix + "running_mean", &running_mean_});
  out.push_back({prefix + "running_var", &running_var_});
}

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
Tensor<T> ReLU<T>::infer(const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (T& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x) {
  output_ = infer(x);
  return output_;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad) {
  Tensor<T> dx = grad;
  for (std::size_t k = 0; k < dx.numel(); ++k) {
    if (!(output_.data[k] > T(0))) dx.data[k] = T(0);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling

template <typename T>
Tensor<T> MaxPool2d<T>::run(const Tensor<T>& x, std::vector<int>* argmax) const {
  const int oh = (x.h() + 2 * pad_ - k_) / stride_ + 1;
  const int ow = (x.w() + 2 * pad_ - k_) / stride_ + 1;
  Tensor<T> y(x.n(), x.c(), oh, ow);
  if (argmax) argmax->assign(y.numel(), -1);
  std::size_t o = 0;
  for (int i = 0; i < x.n(); ++i) {
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.channel(i, c);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          int best_idx = -1;
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= x.h()) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= x.w()) continue;
              const T v = src[iy * x.w() + ix];
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = iy * x.w() + ix;
              }
            }
          }
          y.data[o] = best;
          if (argmax) (*argmax)[o] = best_idx;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2d<T>::infer(const Tensor<T>& x) const {
  return run(x, nullptr);
}

template <typename T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& x) {
  in_shape_ = x.shape;
  return run(x, &argmax_);
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& grad) {
  Tensor<T> dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
  const std::size_t out_plane = grad.plane();
  for (int i = 0; i < grad.n(); ++i) {
    for (int c = 0; c < grad.c(); ++c) {
      T* d = dx.channel(i, c);
      const T* g = grad.channel(i, c);
      const int* idx = argmax_.data() + (static_cast<std::size_t>(i) * grad.c() + c) * out_plane;
      for (std::size_t k = 0; k < out_plane; ++k) d[idx[k]] += g[k];
    }
  }
  return dx;
}

template <typename T>
Tensor<T> AvgPool2d<T>::infer(const Tensor<T>& x) const {
  const int oh = x.h() / k_, ow = x.w() / k_;
  Tensor<T> y(x.n(), x.c(), oh, ow);
  const T scale = T(1) / static_cast<T>(k_ * k_);
  for (int i = 0; i < x.n(); ++i) {
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.channel(i, c);
      T* dst = y.channel(i, c);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          T acc = T(0);
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) acc += src[(oy * k_ + ky) * x.w() + ox * k_ + kx];
          }
          dst[oy * ow + ox] = acc * scale;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> AvgPool2d<T>::forward(const Tensor<T>& x) {
  in_shape_ = x.shape;
  return infer(x);
}

template <typename T>
Tensor<T> AvgPool2d<T>::backward(const Tensor<T>& grad) {
  Tensor<T> dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
  const T scale = T(1) / static_cast<T>(k_ * k_);
  for (int i = 0; i < grad.n(); ++i) {
    for (int c = 0; c < grad.c(); ++c) {
      const T* g = grad.channel(i, c);
      T* d = dx.channel(i, c);
      for (int oy = 0; oy < grad.h(); ++oy) {
        for (int ox = 0; ox < grad.w(); ++ox) {
          const T v = g[oy * grad.w() + ox] * scale;
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) d[(oy * k_ + ky) * dx.w() + ox * k_ + kx] += v;
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Containers

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x) {
  Tensor<T> h = x;
  for (auto& [_, layer] : layers_) h = layer->forward(h);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::infer(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& [_, layer] : layers_) h = layer->infer(h);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad) {
  Tensor<T> g = grad;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->second->backward(g);
  return g;
}

template <typename T>
void Sequential<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
  for (auto& [name, layer] : layers_) layer->collect(prefix + name + ".", out);
}

template <typename T>
DenseBlock<T>::DenseBlock(int in_channels, int num_layers, int growth_rate, int bn_size)
    : in_(in_channels), growth_(growth_rate) {
  for (int i = 0; i < num_layers; ++i) {
    const int c = in_channels + i * growth_rate;
    auto layer = std::make_unique<Sequential<T>>();
    layer->add("norm1", std::make_unique<BatchNorm2d<T>>(c))
        .add("relu1", std::make_unique<ReLU<T>>())
        .add("conv1", std::make_unique<Conv2d<T>>(c, bn_size * growth_rate, 1, 1, 0, false))
        .add("norm2", std::make_unique<BatchNorm2d<T>>(bn_size * growth_rate))
        .add("relu2", std::make_unique<ReLU<T>>())
        .add("conv2", std::make_unique<Conv2d<T>>(bn_size * growth_rate, growth_rate, 3, 1, 1, false));
    layers_.push_back(std::move(layer));
  }
}

template <typename T>
Tensor<T> DenseBlock<T>::infer(const Tensor<T>& x) const {
  require(x.c() == in_, "DenseBlock: channel mismatch");
  Tensor<T> features(x.n(), out_channels(), x.h(), x.w());
  write_channels(features, 0, x);
  int c = in_;
  for (const auto& layer : layers_) {
    write_channels(features, c, layer->infer(slice_channels(features, 0, c)));
    c += growth_;
  }
  return features;
}

template <typename T>
Tensor<T> DenseBlock<T>::forward(const Tensor<T>& x) {
  require(x.c() == in_, "DenseBlock: channel mismatch");
  Tensor<T> features(x.n(), out_channels(), x.h(), x.w());
  write_channels(features, 0, x);
  int c = in_;
  for (auto& layer : layers_) {
    write_channels(features, c, layer->forward(slice_channels(features, 0, c)));
    c += growth_;
  }
  return features;
}

template <typename T>
Tensor<T> DenseBlock<T>::backward(const Tensor<T>& grad) {
  Tensor<T> g = grad;
  int c = out_channels();
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    c -= growth_;
    add_channels(g, 0, (*it)->backward(slice_channels(g, c, growth_)));
  }
  return slice_channels(g, 0, in_);
}

template <typename T>
void DenseBlock<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect(prefix + "denselayer" + std::to_string(i + 1) + ".", out);
  }
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class ReLU<float>;
template class ReLU<double>;
template class MaxPool2d<float>;
template class MaxPool2d<double>;
template class AvgPool2d<float>;
template class AvgPool2d<double>;
template class Sequential<float>;
template class Sequential<double>;
template class DenseBlock<float>;
template class DenseBlock<double>;

}  // namespace padkit::nn
