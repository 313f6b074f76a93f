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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "asrlab/common.hpp"

namespace asrlab {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

enum class OpKind {
  kAdd,
  kMul,
  kScale,
  kAddBias,
  kMatmul,
  kTranspose,
  kPermute,
  kReshape,
  kSlice,
  kConcat,
  kSoftmax,
  kLogSoftmax,
  kLogSumExp,
  kLayerNorm,
  kSigmoid,
  kSwish,
  kRelu,
  kGlu,
  kDepthwiseConv1d,
  kConv2d,
  kDropout,
  kEmbedding,
  kMaskedFill,
  kSum,
  kMean,
  kGather,
  kCtcLoss,
};

std::string_view op_name(OpKind kind);

namespace detail {

struct Node;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until something flows into it
  std::shared_ptr<Node> node;  // null for leaves

  std::vector<double>& grad_buffer();
};

// Adjoint of one recorded op: receives dLoss/dOutput and accumulates into the
// grad buffers of whichever inputs require grad.
using BackwardFn = std::function<void(std::span<const double> grad_out)>;

struct Node {
  OpKind kind;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
  bool consumed = false;
};

}  // namespace detail

/// Handle to a dense row-major array of doubles. Copies share storage; the
/// data of a tensor produced by an op is never modified afterwards.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  // Negative axes count from the end.
  std::size_t dim(int axis) const;

  std::span<const double> data() const { return impl_->data; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const;

  // Direct write access, restricted to leaves (parameters, inputs).
  std::span<double> mutable_data();

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value);
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad();
  void zero_grad() { impl_->grad.clear(); }

  bool is_leaf() const { return impl_->node == nullptr; }
  // Fresh leaf holding a copy of the data, no grad.
  Tensor detach() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Propagates dLoss/dx to every requires_grad tensor reachable from `loss`.
/// Each graph can be walked once; a second call on a consumed graph throws.
/// Leaf gradients accumulate across distinct graphs until zero_grad().
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

// Builds an op output; records a node when grad mode is on and some input
// requires grad. `make_backward` is only invoked in that case.
Tensor make_result(OpKind kind, Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs,
                   const std::function<BackwardFn()>& make_backward);
Tensor make_result(OpKind kind, Shape shape, std::vector<double> data,
                   const std::vector<Tensor>& inputs,
                   const std::function<BackwardFn()>& make_backward);

}  // namespace detail

}  // namespace asrlab
