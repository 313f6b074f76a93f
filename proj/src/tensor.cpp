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

#include "asrlab/tensor.hpp"

#include <algorithm>
#include <unordered_set>
#include <utility>

namespace asrlab {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kPermute: return "permute";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSlice: return "slice";
    case OpKind::kConcat: return "concat";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kLogSumExp: return "logsumexp";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSwish: return "swish";
    case OpKind::kRelu: return "relu";
    case OpKind::kGlu: return "glu";
    case OpKind::kDepthwiseConv1d: return "depthwise_conv1d";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kDropout: return "dropout";
    case OpKind::kEmbedding: return "embedding";
    case OpKind::kMaskedFill: return "masked_fill";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kGather: return "gather";
    case OpKind::kCtcLoss: return "ctc_loss";
  }
  return "unknown";
}

namespace detail {

std::vector<double>& TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

void validate_shape(const Shape& shape, std::size_t size) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
  }
  if (numel(shape) != size) {
    throw ShapeError("shape " + to_string(shape) + " needs " + std::to_string(numel(shape)) +
                     " values, got " + std::to_string(size));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(asrlab::numel(shape), value);
  return from(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  validate_shape(shape, data.size());
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

std::size_t Tensor::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape()));
  }
  return impl_->shape[static_cast<std::size_t>(a)];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw Error("mutable_data() is only allowed on leaf tensors");
  return impl_->data;
}

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw Error("requires_grad can only be changed on leaf tensors");
  impl_->requires_grad = value;
}

std::span<double> Tensor::mutable_grad() { return impl_->grad_buffer(); }

Tensor Tensor::detach() const { return from(impl_->shape, impl_->data, false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (!loss.defined()) throw Error("backward on an undefined tensor");
  if (loss.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) throw Error("backward: loss does not require grad");

  // Post-order DFS gives a topological order (inputs before outputs).
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> seen;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(loss.impl().get(), 0);
  seen.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    const auto& node = impl->node;
    if (node && node->consumed) {
      throw Error("backward: graph already consumed (op " + std::string(op_name(node->kind)) + ")");
    }
    if (node && next < node->inputs.size()) {
      detail::TensorImpl* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(impl);
    stack.pop_back();
  }

  loss.impl()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* impl = *it;
    const auto& node = impl->node;
    if (!node) continue;
    if (!impl->grad.empty()) node->backward(impl->grad);
    node->consumed = true;
    node->backward = nullptr;
  }
}

namespace detail {

namespace {

template <typename Range>
Tensor make_result_impl(OpKind kind, Shape shape, std::vector<double> data, const Range& inputs,
                        const std::function<BackwardFn()>& make_backward) {
  Tensor out = Tensor::from(std::move(shape), std::move(data));
  if (!g_grad_enabled) return out;
  bool needs = false;
  for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  if (!needs) return out;
  auto node = std::make_shared<Node>();
  node->kind = kind;
  for (const Tensor& t : inputs) node->inputs.push_back(t.impl());
  node->backward = make_backward();
  out.impl()->requires_grad = true;
  out.impl()->node = std::move(node);
  return out;
}

}  // namespace

Tensor make_result(OpKind kind, Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs,
                   const std::function<BackwardFn()>& make_backward) {
  return make_result_impl(kind, std::move(shape), std::move(data), inputs, make_backward);
}

Tensor make_result(OpKind kind, Shape shape, std::vector<double> data,
                   const std::vector<Tensor>& inputs,
                   const std::function<BackwardFn()>& make_backward) {
  return make_result_impl(kind, std::move(shape), std::move(data), inputs, make_backward);
}

}  // namespace detail

}  // namespace asrlab
