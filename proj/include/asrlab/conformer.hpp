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
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "asrlab/tensor.hpp"

namespace asrlab::model {

struct ModelConfig {
  std::size_t num_layers = 18;
  std::size_t d_model = 512;
  std::size_t num_heads = 8;
  std::size_t conv_kernel = 31;
  std::size_t ff_expansion = 4;
  double dropout = 0.1;
  std::size_t vocab_out = 129;
  std::size_t subsample_factor = 4;
  std::size_t input_dim = 80;

  void validate() const;  // throws ConfigError

  static ModelConfig large();
  // 2 layers, d=16, 2 heads, kernel 7.
  static ModelConfig tiny();
};

/// Parameter path -> tensor, e.g. "layer.3.conv.depthwise.weight".
using ParameterSet = std::map<std::string, Tensor>;

// Every parameter path with its shape, in a fixed order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& config);

ParameterSet init_params(const ModelConfig& config, std::uint64_t seed);
std::size_t count_params(const ParameterSet& params);
// Shape arithmetic only; nothing is allocated.
std::size_t count_params(const ModelConfig& config);

// Throws ShapeError naming the first missing, unexpected or misshaped path.
void check_params(const ParameterSet& params, const ModelConfig& config);

// Length after one kernel-3, stride-2, pad-1 convolution.
constexpr std::size_t conv_out_length(std::size_t t) { return (t - 1) / 2 + 1; }
// Length after the two-stage 4x subsampling; throws for T < 4.
std::size_t subsampled_length(std::size_t num_frames);

enum class Mode { kTrain, kEval };

struct EncoderOutput {
  Tensor log_probs;  // [B, T', vocab_out]
  std::vector<std::size_t> lengths;
};

// features: [B, T, input_dim], zero beyond each utterance's length.
// Returns [B, T', d_model]; frames past each subsampled length are zero.
Tensor subsample(const Tensor& features, const std::vector<std::size_t>& lengths, const ParameterSet& params,
                 const ModelConfig& config);

// Sinusoidal table for relative distances T-1, T-2, ..., -(T-1): [2T-1, d].
Tensor relative_position_table(std::size_t num_frames, std::size_t d_model);

// rng is required in train mode (dropout) and ignored in eval mode.
EncoderOutput encoder_forward(const Tensor& features, const std::vector<std::size_t>& lengths,
                              const ParameterSet& params, const ModelConfig& config, Mode mode,
                              Rng* rng = nullptr);

}  // namespace asrlab::model
