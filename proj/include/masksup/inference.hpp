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

#ifndef MASKSUP_INFERENCE_HPP_
#define MASKSUP_INFERENCE_HPP_

#include <cstdint>

#include "masksup/models.hpp"
#include "masksup/tensor.hpp"

namespace masksup {

// Per-pixel argmax over classes; ties go to the lowest class index.
template <typename T>
LabelMap ArgmaxLabels(const LogitsMap<T>& logits) {
  const int k = logits.channels();
  const std::size_t hw = logits.plane_size();
  LabelMap out(logits.height(), logits.width());
  const T* z = logits.data();
  for (std::size_t i = 0; i < hw; ++i) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (z[c * hw + i] > z[best * hw + i]) best = c;
    }
    out[i] = best;
  }
  return out;
}

// One unmasked forward pass followed by argmax. No mask is ever built here.
template <typename T>
LabelMap Infer(const UNet<T>& net, const Tensor<T>& image) {
  return ArgmaxLabels(net.Forward(image, nullptr));
}

}  // namespace masksup

#endif  // MASKSUP_INFERENCE_HPP_
