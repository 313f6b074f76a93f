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

#include <cstdlib>
#include <string_view>

#include "asrlab/kernels.hpp"

namespace asrlab::kernels {

#if defined(ASRLAB_HAVE_AVX2)
const KernelTable& avx2_table_unchecked();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(ASRLAB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__)) && \
    (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select() {
  const char* env = std::getenv("ASRLAB_SIMD");
  const std::string_view want = env ? env : "auto";
  if (want == "scalar") return scalar_table();
  if (const KernelTable* v = avx2_table()) return *v;
  return scalar_table();
}

}  // namespace

const KernelTable* avx2_table() {
#if defined(ASRLAB_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace asrlab::kernels
