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
#include <optional>
#include <span>
#include <vector>

#include "asrlab/tensor.hpp"

// Differentiable tensor ops. Shapes must match exactly unless an op documents
// its own broadcast rule. Every op rejects non-finite inputs.
namespace asrlab::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// Broadcast rule: bias.shape equals the trailing dims of x.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// a: [..., m, k]. b: either [k, n] (shared across the leading dims of a) or
// [..., k, n] with leading dims identical to a's. Result: [..., m, n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Swaps the last two axes.
Tensor transpose(const Tensor& x);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor reshape(const Tensor& x, Shape shape);

// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end);
Tensor concat(const std::vector<Tensor>& xs, int axis);

Tensor softmax(const Tensor& x, int axis = -1);
// Softmax over the last axis where mask[i] != 0 marks an excluded position.
// Excluded positions get probability exactly 0; a fully excluded row is all 0.
Tensor masked_softmax(const Tensor& x, std::span<const std::uint8_t> mask);
Tensor log_softmax(const Tensor& x, int axis = -1);
// Reduces `axis` away.
Tensor logsumexp(const Tensor& x, int axis = -1);

// Normalizes over the last axis, then applies gain and bias (both [last]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor sigmoid(const Tensor& x);
Tensor swish(const Tensor& x);
Tensor relu(const Tensor& x);
// First half of the last axis gated by sigmoid of the second half.
Tensor glu(const Tensor& x);

// x: [B, T, C]; weight: [C, K] with K odd; bias: [C] or undefined.
// Zero "same" padding along T, cross-correlation orientation.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);

// x: [B, Cin, H, W]; weight: [Cout, Cin, KH, KW]; bias: [Cout] or undefined.
// Output [B, Cout, (H + 2p - KH)/s + 1, (W + 2p - KW)/s + 1].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

// Inverted dropout. Eval mode (training == false) or rate 0 returns x itself.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

// table: [V, D]; result: [ids.size(), D].
Tensor embedding(const Tensor& table, std::span<const std::size_t> ids);

// Positions with mask[i] != 0 are replaced by `value`. mask.size() == x.numel().
Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, double value);

// Reductions to a scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// out[i] = x[indices[i]] (flat indices), reshaped to `shape`.
Tensor gather(const Tensor& x, Shape shape, std::vector<std::size_t> indices);

/// Attribute bag for the generic entry point.
struct OpAttrs {
  int axis = -1;
  double value = 0.0;  // scale factor, fill value, dropout rate, layer-norm eps
  std::size_t begin = 0, end = 0;
  std::size_t stride = 1, padding = 0;
  bool training = false;
  Rng* rng = nullptr;
  Shape shape;
  std::vector<std::size_t> indices;  // permutation, gather indices, embedding ids
  std::vector<std::uint8_t> mask;
};

/// Uniform dispatch over op kinds; forwards to the typed functions above.
/// Inputs in declaration order of the typed function; optional trailing
/// tensors (biases) may be omitted.
Tensor kernel_forward(OpKind kind, const std::vector<Tensor>& inputs, const OpAttrs& attrs = {});

}  // namespace asrlab::ops
