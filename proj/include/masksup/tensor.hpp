/* Copyright 2026 The MaskSup Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef MASKSUP_TENSOR_HPP_
#define MASKSUP_TENSOR_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "masksup/common.hpp"

namespace masksup {

// Dense channel-planar (C x H x W) array. Images, feature maps and logits all
// use this layout; element (y, x, c) of an image lives at At(c, y, x).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, T fill = T(0))
      : channels_(channels),
        height_(height),
        width_(width),
        data_(static_cast<std::size_t>(channels) * height * width, fill) {}

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& At(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  const T& At(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::span<T> plane(int c) {
    return std::span<T>(data_).subspan(c * plane_size(), plane_size());
  }
  std::span<const T> plane(int c) const {
    return std::span<const T>(data_).subspan(c * plane_size(), plane_size());
  }

  void Fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool SameShape(const Tensor& o) const {
    return channels_ == o.channels_ && height_ == o.height_ &&
           width_ == o.width_;
  }

  std::string ShapeString() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" +
           std::to_string(channels_);
  }

  bool operator==(const Tensor&) const = default;

  template <typename U>
  Tensor<U> Cast() const {
    Tensor<U> out(channels_, height_, width_);
    std::transform(data_.begin(), data_.end(), out.data(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

// Image with values normalized to [0, 1].
using ImageTensor = Tensor<float>;

// Pre-softmax class scores, K planes of H x W.
template <typename T>
using LogitsMap = Tensor<T>;

// H x W grid of small values; backs both label maps and hole masks.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T(0))
      : height_(height),
        width_(width),
        data_(static_cast<std::size_t>(height) * width, fill) {}
  Grid(int height, int width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(height) * width) {
      throw ShapeMismatch("grid data size does not match " +
                          std::to_string(height) + "x" +
                          std::to_string(width));
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  T& At(int y, int x) {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& At(int y, int x) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool operator==(const Grid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

// Per-pixel class index in {0..K-1}, or the ignore label.
using LabelMap = Grid<std::int32_t>;

// 1 = pixel kept, 0 = pixel removed.
using HoleMask = Grid<std::uint8_t>;

}  // namespace masksup

#endif  // MASKSUP_TENSOR_HPP_
