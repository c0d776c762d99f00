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

#ifndef PADKIT_NN_TENSOR_HPP
#define PADKIT_NN_TENSOR_HPP

#include <array>
#include <cstddef>
#include <new>
#include <string>
#include <vector>

namespace padkit::nn {

/// Cache-line aligned storage: Eigen's vectorized kernels peel loops based on
/// pointer alignment, so fixed alignment keeps results bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense NCHW activation tensor.
template <typename T>
struct Tensor {
  std::array<int, 4> shape{0, 0, 0, 0};
  AlignedVector<T> data;

  Tensor() = default;
  Tensor(int n, int c, int h, int w, T fill = T(0))
      : shape{n, c, h, w}, data(static_cast<std::size_t>(n) * c * h * w, fill) {}

  int n() const { return shape[0]; }
  int c() const { return shape[1]; }
  int h() const { return shape[2]; }
  int w() const { return shape[3]; }
  std::size_t plane() const { return static_cast<std::size_t>(h()) * w(); }
  std::size_t per_sample() const { return static_cast<std::size_t>(c()) * plane(); }
  std::size_t numel() const { return data.size(); }

  T* sample(int i) { return data.data() + static_cast<std::size_t>(i) * per_sample(); }
  const T* sample(int i) const { return data.data() + static_cast<std::size_t>(i) * per_sample(); }
  T* channel(int i, int ch) { return sample(i) + static_cast<std::size_t>(ch) * plane(); }
  const T* channel(int i, int ch) const { return sample(i) + static_cast<std::size_t>(ch) * plane(); }
};

/// A learnable weight or a persistent buffer (e.g. batch-norm running stats).
template <typename T>
struct Parameter {
  std::vector<int> shape;
  AlignedVector<T> value;
  AlignedVector<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::vector<int> s, bool is_trainable, T fill = T(0)) : shape(std::move(s)), trainable(is_trainable) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    value.assign(n, fill);
    grad.assign(is_trainable ? n : 0, T(0));
  }
};

template <typename T>
struct NamedParameter {
  std::string name;
  Parameter<T>* param = nullptr;
};

}  // namespace padkit::nn

#endif  // PADKIT_NN_TENSOR_HPP
