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

// Encoder-decoder segmentation network and the shared-weight two-branch
// forward used for masked supervision.

#ifndef MASKSUP_MODELS_HPP_
#define MASKSUP_MODELS_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "masksup/common.hpp"
#include "masksup/layers.hpp"
#include "masksup/tensor.hpp"

namespace masksup {

template <typename T>
struct ParamArray {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;

  bool operator==(const ParamArray&) const = default;
};

// Flat collection of named trainable arrays. Gradients use the same type.
template <typename T>
class ParameterSet {
 public:
  int Add(std::string name, std::vector<int> shape) {
    const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                          std::size_t{1}, std::multiplies<>());
    arrays_.push_back({std::move(name), std::move(shape), std::vector<T>(n)});
    return static_cast<int>(arrays_.size()) - 1;
  }

  std::size_t size() const { return arrays_.size(); }
  ParamArray<T>& operator[](std::size_t i) { return arrays_[i]; }
  const ParamArray<T>& operator[](std::size_t i) const { return arrays_[i]; }
  auto begin() { return arrays_.begin(); }
  auto end() { return arrays_.end(); }
  auto begin() const { return arrays_.begin(); }
  auto end() const { return arrays_.end(); }

  std::span<T> values(int i) { return arrays_[i].values; }
  std::span<const T> values(int i) const { return arrays_[i].values; }

  std::int64_t ScalarCount() const {
    std::int64_t n = 0;
    for (const auto& a : arrays_) n += static_cast<std::int64_t>(a.values.size());
    return n;
  }

  ParameterSet ZerosLike() const {
    ParameterSet out = *this;
    out.SetZero();
    return out;
  }

  void SetZero() {
    for (auto& a : arrays_) std::fill(a.values.begin(), a.values.end(), T(0));
  }

  void Scale(T s) {
    for (auto& a : arrays_)
      for (T& v : a.values) v *= s;
  }

  // Visits every scalar as (array index, element index, value&).
  template <typename F>
  void ForEachScalar(F&& f) {
    for (std::size_t a = 0; a < arrays_.size(); ++a)
      for (std::size_t i = 0; i < arrays_[a].values.size(); ++i)
        f(a, i, arrays_[a].values[i]);
  }

  bool operator==(const ParameterSet&) const = default;

 private:
  std::vector<ParamArray<T>> arrays_;
};

template <typename T>
using GradientSet = ParameterSet<T>;

struct UNetSpec {
  int in_channels = 3;
  int num_classes = 2;
  int base_width = 8;
  int depth = 3;
  int max_groups = 4;
  std::uint64_t seed = 0;

  bool operator==(const UNetSpec&) const = default;
};

inline constexpr const char* kReferenceUNetId = "unet";

// Activations of one forward pass, needed by Backward. One tape per forward;
// two tapes let the two Siamese branches share a single parameter set.
template <typename T>
struct ForwardTape {
  struct Block {
    Tensor<T> input;
    layers::NormActCache<T> norm1;
    layers::NormActCache<T> norm2;
  };
  std::vector<Block> encoder;
  std::vector<std::vector<std::int32_t>> pool_argmax;
  std::vector<Block> decoder;
  std::vector<int> decoder_up_channels;
  Tensor<T> head_input;
};

// U-Net style encoder-decoder: `depth` resolution levels, two
// conv3x3-GroupNorm-ReLU units per level, 2x2 max pooling down, nearest
// upsampling plus skip concatenation up, and a 1x1 classification head.
// Level l has base_width * 2^l channels. Input sides must be divisible by
// 2^(depth-1).
template <typename T>
class UNet {
 public:
  explicit UNet(const UNetSpec& spec) : spec_(spec) {
    if (spec.depth < 1 || spec.base_width < 1 || spec.num_classes < 2 ||
        spec.in_channels < 1) {
      throw InvalidArgument("invalid network specification");
    }
    int c_prev = spec.in_channels;
    for (int l = 0; l < spec.depth; ++l) {
      const int c = LevelChannels(l);
      encoder_.push_back(AddBlock("enc" + std::to_string(l), c_prev, c));
      c_prev = c;
    }
    for (int l = spec.depth - 2; l >= 0; --l) {
      const int c = LevelChannels(l);
      decoder_.push_back(
          AddBlock("dec" + std::to_string(l), c_prev + c, c));
      c_prev = c;
    }
    head_weight_ = params_.Add("head.weight", {spec.num_classes, c_prev, 1, 1});
    head_bias_ = params_.Add("head.bias", {spec.num_classes});
    Initialize(spec.seed);
  }

  UNet(const UNet& o)
      : spec_(o.spec_),
        params_(o.params_),
        encoder_(o.encoder_),
        decoder_(o.decoder_),
        head_weight_(o.head_weight_),
        head_bias_(o.head_bias_),
        forward_calls_(o.forward_calls_.load()) {}
  UNet& operator=(const UNet& o) {
    spec_ = o.spec_;
    params_ = o.params_;
    encoder_ = o.encoder_;
    decoder_ = o.decoder_;
    head_weight_ = o.head_weight_;
    head_bias_ = o.head_bias_;
    forward_calls_ = o.forward_calls_.load();
    return *this;
  }

  const UNetSpec& spec() const { return spec_; }
  std::string backbone_id() const { return kReferenceUNetId; }
  int num_classes() const { return spec_.num_classes; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }
  std::int64_t parameter_count() const { return params_.ScalarCount(); }

  // Number of Forward invocations since construction or the last reset.
  std::int64_t forward_calls() const { return forward_calls_.load(); }
  void ResetForwardCalls() { forward_calls_ = 0; }

  int LevelChannels(int level) const { return spec_.base_width << level; }
  int SizeMultiple() const { return 1 << (spec_.depth - 1); }

  // Runs the network. When tape is non-null the activations needed by
  // Backward are recorded there.
  LogitsMap<T> Forward(const Tensor<T>& input, ForwardTape<T>* tape) const {
    ++forward_calls_;
    if (input.channels() != spec_.in_channels) {
      throw ShapeMismatch("network expects " +
                          std::to_string(spec_.in_channels) +
                          " input channels, got " + input.ShapeString());
    }
    const int m = SizeMultiple();
    if (input.height() % m != 0 || input.width() % m != 0 ||
        input.height() == 0 || input.width() == 0) {
      throw ShapeMismatch("input sides must be positive multiples of " +
                          std::to_string(m) + ", got " + input.ShapeString());
    }
    ForwardTape<T> local;
    ForwardTape<T>& t = tape ? *tape : local;
    t.encoder.assign(encoder_.size(), {});
    t.decoder.assign(decoder_.size(), {});
    t.pool_argmax.assign(encoder_.size(), {});
    t.decoder_up_channels.assign(decoder_.size(), 0);
    std::vector<T> scratch;

    std::vector<const Tensor<T>*> skips;
    Tensor<T> x = input;
    for (std::size_t l = 0; l < encoder_.size(); ++l) {
      if (l > 0) {
        x = layers::MaxPool2(*skips.back(), t.pool_argmax[l]);
      }
      skips.push_back(&BlockForward(encoder_[l], std::move(x), t.encoder[l],
                                    scratch));
    }
    const Tensor<T>* cur = skips.back();
    for (std::size_t d = 0; d < decoder_.size(); ++d) {
      const std::size_t level = encoder_.size() - 2 - d;
      Tensor<T> up = layers::Upsample2(*cur);
      t.decoder_up_channels[d] = up.channels();
      cur = &BlockForward(decoder_[d],
                          layers::ConcatChannels(up, *skips[level]),
                          t.decoder[d], scratch);
    }
    t.head_input = *cur;
    return layers::Conv2d<T>(*cur, params_.values(head_weight_),
                             params_.values(head_bias_), spec_.num_classes, 1,
                             scratch);
  }

  // Back-propagates grad_logits through the pass recorded in tape,
  // accumulating parameter gradients into grads.
  void Backward(const ForwardTape<T>& tape, const LogitsMap<T>& grad_logits,
                GradientSet<T>& grads) const {
    std::vector<T> scratch;
    Tensor<T> g(tape.head_input.channels(), tape.head_input.height(),
                tape.head_input.width());
    layers::Conv2dBackward<T>(tape.head_input, params_.values(head_weight_),
                              grad_logits, 1, grads.values(head_weight_),
                              grads.values(head_bias_), &g, scratch);
    const std::size_t depth = encoder_.size();
    // Gradients flowing into each encoder level's output through skips.
    std::vector<Tensor<T>> skip_grads(depth);
    for (std::size_t d = decoder_.size(); d-- > 0;) {
      const std::size_t level = depth - 2 - d;
      Tensor<T> g_cat = BlockBackward(decoder_[d], tape.decoder[d], g, grads,
                                      scratch);
      Tensor<T> g_up, g_skip;
      layers::SplitChannels(g_cat, tape.decoder_up_channels[d], g_up, g_skip);
      skip_grads[level] = std::move(g_skip);
      g = layers::Upsample2Backward(g_up);
    }
    // g now holds the gradient of the deepest encoder output.
    for (std::size_t l = depth; l-- > 0;) {
      if (!skip_grads[l].empty()) layers::AddInPlace(g, skip_grads[l]);
      const bool need_input = l > 0;
      Tensor<T> g_in =
          BlockBackward(encoder_[l], tape.encoder[l], g, grads, scratch,
                        need_input);
      if (!need_input) break;
      const Tensor<T>& prev_out = tape.encoder[l - 1].norm2.out;
      Tensor<T> g_prev(prev_out.channels(), prev_out.height(),
                       prev_out.width());
      layers::MaxPool2Backward(g_in, tape.pool_argmax[l], g_prev);
      g = std::move(g_prev);
    }
  }

 private:
  struct Block {
    int c_in = 0;
    int c_out = 0;
    int groups = 1;
    int conv1 = -1, gamma1 = -1, beta1 = -1;
    int conv2 = -1, gamma2 = -1, beta2 = -1;
  };

  Block AddBlock(const std::string& name, int c_in, int c_out) {
    Block b;
    b.c_in = c_in;
    b.c_out = c_out;
    b.groups = layers::GroupCount(c_out, spec_.max_groups);
    b.conv1 = params_.Add(name + ".conv1.weight", {c_out, c_in, 3, 3});
    b.gamma1 = params_.Add(name + ".norm1.gamma", {c_out});
    b.beta1 = params_.Add(name + ".norm1.beta", {c_out});
    b.conv2 = params_.Add(name + ".conv2.weight", {c_out, c_out, 3, 3});
    b.gamma2 = params_.Add(name + ".norm2.gamma", {c_out});
    b.beta2 = params_.Add(name + ".norm2.beta", {c_out});
    return b;
  }

  const Tensor<T>& BlockForward(const Block& b, Tensor<T> input,
                                typename ForwardTape<T>::Block& t,
                                std::vector<T>& scratch) const {
    t.input = std::move(input);
    Tensor<T> z1 = layers::Conv2d<T>(t.input, params_.values(b.conv1), {},
                                     b.c_out, 3, scratch);
    const Tensor<T>& a1 =
        layers::GroupNormRelu<T>(z1, params_.values(b.gamma1),
                                 params_.values(b.beta1), b.groups, t.norm1);
    Tensor<T> z2 = layers::Conv2d<T>(a1, params_.values(b.conv2), {}, b.c_out,
                                     3, scratch);
    return layers::GroupNormRelu<T>(z2, params_.values(b.gamma2),
                                    params_.values(b.beta2), b.groups,
                                    t.norm2);
  }

  Tensor<T> BlockBackward(const Block& b,
                          const typename ForwardTape<T>::Block& t,
                          const Tensor<T>& grad_out, GradientSet<T>& grads,
                          std::vector<T>& scratch,
                          bool need_input = true) const {
    Tensor<T> g_z2 = layers::GroupNormReluBackward<T>(
        grad_out, params_.values(b.gamma2), b.groups, t.norm2,
        grads.values(b.gamma2), grads.values(b.beta2));
    const Tensor<T>& a1 = t.norm1.out;
    Tensor<T> g_a1(a1.channels(), a1.height(), a1.width());
    layers::Conv2dBackward<T>(a1, params_.values(b.conv2), g_z2, 3,
                              grads.values(b.conv2), {}, &g_a1, scratch);
    Tensor<T> g_z1 = layers::GroupNormReluBackward<T>(
        g_a1, params_.values(b.gamma1), b.groups, t.norm1,
        grads.values(b.gamma1), grads.values(b.beta1));
    Tensor<T> g_in;
    if (need_input) {
      g_in = Tensor<T>(t.input.channels(), t.input.height(), t.input.width());
    }
    layers::Conv2dBackward<T>(t.input, params_.values(b.conv1), g_z1, 3,
                              grads.values(b.conv1), {},
                              need_input ? &g_in : nullptr, scratch);
    return g_in;
  }

  // He-normal convolution weights, unit gamma, zero beta and bias.
  void Initialize(std::uint64_t seed) {
    for (std::size_t a = 0; a < params_.size(); ++a) {
      auto& arr = params_[a];
      const std::string& n = arr.name;
      if (n.ends_with(".gamma")) {
        std::fill(arr.values.begin(), arr.values.end(), T(1));
      } else if (n.ends_with(".beta") || n.ends_with(".bias")) {
        std::fill(arr.values.begin(), arr.values.end(), T(0));
      } else {
        const int fan_in = arr.shape[1] * arr.shape[2] * arr.shape[3];
        const bool head = static_cast<int>(a) == head_weight_;
        const double stddev = std::sqrt((head ? 1.0 : 2.0) / fan_in);
        Rng rng(DeriveSeed({seed, a}));
        for (T& v : arr.values) v = static_cast<T>(stddev * rng.Normal());
      }
    }
  }

  UNetSpec spec_;
  ParameterSet<T> params_;
  std::vector<Block> encoder_;
  std::vector<Block> decoder_;
  int head_weight_ = -1;
  int head_bias_ = -1;
  mutable std::atomic<std::int64_t> forward_calls_{0};
};

// Reference backbone with the documented construction limits.
template <typename T = float>
UNet<T> BuildReferenceUNet(int num_classes, int base_width, int depth,
                           std::uint64_t seed, int in_channels = 3) {
  if (depth < 2) throw InvalidArgument("depth must be >= 2");
  if (base_width < 4) throw InvalidArgument("base_width must be >= 4");
  if (num_classes < 2) throw InvalidArgument("num_classes must be >= 2");
  UNetSpec spec;
  spec.in_channels = in_channels;
  spec.num_classes = num_classes;
  spec.base_width = base_width;
  spec.depth = depth;
  spec.seed = seed;
  return UNet<T>(spec);
}

template <typename T>
std::int64_t ParameterCount(const UNet<T>& net) {
  return net.parameter_count();
}

template <typename T>
struct SiameseOutputs {
  LogitsMap<T> plain;   // segmentation branch
  LogitsMap<T> masked;  // context branch
};

// Both branches run through the same network object, so there is exactly one
// parameter set and gradients from either branch land in it.
template <typename T>
SiameseOutputs<T> SiameseForward(const UNet<T>& net, const Tensor<T>& image,
                                 const Tensor<T>& masked_image,
                                 ForwardTape<T>* plain_tape = nullptr,
                                 ForwardTape<T>* masked_tape = nullptr) {
  if (!image.SameShape(masked_image)) {
    throw ShapeMismatch("siamese inputs differ: " + image.ShapeString() +
                        " vs " + masked_image.ShapeString());
  }
  return {net.Forward(image, plain_tape), net.Forward(masked_image, masked_tape)};
}

// Training-time view of a backbone: the two branches are two calls into the
// wrapped network, so the wrapper owns no parameters of its own.
template <typename T>
class MaskSupModel {
 public:
  explicit MaskSupModel(UNet<T>& backbone) : backbone_(&backbone) {}

  UNet<T>& backbone() { return *backbone_; }
  const UNet<T>& backbone() const { return *backbone_; }
  std::int64_t parameter_count() const { return backbone_->parameter_count(); }

  SiameseOutputs<T> Forward(const Tensor<T>& image,
                            const Tensor<T>& masked_image,
                            ForwardTape<T>* plain_tape = nullptr,
                            ForwardTape<T>* masked_tape = nullptr) const {
    return SiameseForward(*backbone_, image, masked_image, plain_tape,
                          masked_tape);
  }

 private:
  UNet<T>* backbone_;
};

template <typename T>
std::int64_t ParameterCount(const MaskSupModel<T>& model) {
  return model.parameter_count();
}

}  // namespace masksup

#endif  // MASKSUP_MODELS_HPP_
