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

#ifndef MASKSUP_BLAS_HPP_
#define MASKSUP_BLAS_HPP_

#include <cblas.h>

#include <type_traits>

namespace masksup::blas {

// Row-major C = alpha * op(A) * op(B) + beta * C.
template <typename T>
void Gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha,
          const T* a, const T* b, T beta, T* c) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  const int lda = trans_a ? m : k;
  const int ldb = trans_b ? k : n;
  const auto ta = trans_a ? CblasTrans : CblasNoTrans;
  const auto tb = trans_b ? CblasTrans : CblasNoTrans;
  if constexpr (std::is_same_v<T, float>) {
    cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c,
                n);
  } else {
    cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c,
                n);
  }
}

}  // namespace masksup::blas

#endif  // MASKSUP_BLAS_HPP_
