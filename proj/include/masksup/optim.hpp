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

#ifndef MASKSUP_OPTIM_HPP_
#define MASKSUP_OPTIM_HPP_

#include <cmath>
#include <cstdint>

#include "masksup/models.hpp"

namespace masksup {

// Adam with bias correction.
template <typename T>
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(const ParameterSet<T>& params, Options opts)
      : opts_(opts), m_(params.ZerosLike()), v_(params.ZerosLike()) {}

  void Step(ParameterSet<T>& params, const GradientSet<T>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    const double step = opts_.learning_rate * std::sqrt(c2) / c1;
    for (std::size_t a = 0; a < params.size(); ++a) {
      auto& p = params[a].values;
      const auto& g = grads[a].values;
      auto& m = m_[a].values;
      auto& v = v_[a].values;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        m[i] = static_cast<T>(opts_.beta1 * m[i] + (1.0 - opts_.beta1) * gi);
        v[i] = static_cast<T>(opts_.beta2 * v[i] + (1.0 - opts_.beta2) * gi * gi);
        p[i] -= static_cast<T>(step * m[i] /
                               (std::sqrt(static_cast<double>(v[i])) +
                                opts_.eps * std::sqrt(c2)));
      }
    }
  }

  std::int64_t steps() const { return t_; }

 private:
  Options opts_;
  ParameterSet<T> m_;
  ParameterSet<T> v_;
  std::int64_t t_ = 0;
};

}  // namespace masksup

#endif  // MASKSUP_OPTIM_HPP_
