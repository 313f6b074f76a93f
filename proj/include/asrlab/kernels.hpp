// Copyright 2026 The asrlab Authors. All Rights Reserved.
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

#pragma once

#include <cstddef>
#include <string_view>

namespace asrlab::kernels {

// Dense double-precision inner loops. Every variant computes the same
// mathematical result; vector variants may differ from the scalar reference
// by floating-point reassociation (and FMA contraction) only.
//
// Matrices are row-major and contiguous. The gemm family accumulates into C.
struct KernelTable {
  std::string_view name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = a * b (elementwise)
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out = a + b
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  // out = alpha * x
  void (*scale)(double alpha, const double* x, double* out, std::size_t n);
  double (*sum)(const double* x, std::size_t n);

  // C[m,n] += A[m,k] * B[k,n]
  void (*gemm)(std::size_t m, std::size_t k, std::size_t n, const double* a,
               const double* b, double* c);
  // C[m,n] += A[k,m]^T * B[k,n]
  void (*gemm_at)(std::size_t m, std::size_t k, std::size_t n, const double* a,
                  const double* b, double* c);
  // C[m,n] += A[m,k] * B[n,k]^T
  void (*gemm_bt)(std::size_t m, std::size_t k, std::size_t n, const double* a,
                  const double* b, double* c);
};

/// Portable reference implementation.
const KernelTable& scalar_table();

/// AVX2+FMA variant, or nullptr when it was not compiled in or the running
/// CPU lacks the instructions.
const KernelTable* avx2_table();

/// The table used by all tensor ops. Chosen once at first use: the best
/// supported variant, unless the environment variable ASRLAB_SIMD is set to
/// "scalar" (or "avx2" to insist on it when available).
const KernelTable& active();

}  // namespace asrlab::kernels
