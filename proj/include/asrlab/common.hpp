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

#include <cstdint>
#include <utility>
#include <random>
#include <stdexcept>
#include <string>

namespace asrlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or op attributes that do not conform to an op's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened at all (missing, unreadable).
class MissingInputError : public Error {
 public:
  using Error::Error;
};

/// A file was opened but its content violates the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Engine used for every random draw. Always seeded explicitly.
using Rng = std::mt19937_64;

/// Deterministically derives a child seed from a parent seed and a stream tag
/// (splitmix64 finalizer over the combination).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) built from the top 53 bits, so sequences are
/// identical across standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Fisher-Yates over uniform01 draws, so orderings do not depend on the
/// standard library's distribution implementations.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace asrlab
