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

#include "asrlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "asrlab/kernels.hpp"

namespace asrlab::ops {

using detail::BackwardFn;
using detail::make_result;

namespace {

const kernels::KernelTable& K() { return kernels::active(); }

void check_finite(std::string_view op, const Tensor& t) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": undefined input tensor");
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw ShapeError(std::string(op) + ": non-finite input value in tensor of shape " +
                       to_string(t.shape()));
    }
  }
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

std::size_t normalize_axis(std::string_view op, int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for rank " +
                     std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// outer x n x inner decomposition around one axis.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::vector<double>& gbuf(const Tensor& t) { return t.impl()->grad_buffer(); }

template <typename F>
Tensor unary(OpKind kind, const Tensor& x, F&& f, std::vector<double> (*deriv)(const std::vector<double>&, const std::vector<double>&)) {
  check_finite(op_name(kind), x);
  std::vector<double> y(x.numel());
  const auto xs = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xs[i]);
  std::vector<double> ycopy = y;
  return make_result(kind, x.shape(), std::move(y), {x}, [&]() -> BackwardFn {
    return [x, yv = std::move(ycopy), deriv](std::span<const double> g) {
      std::vector<double> xv(x.data().begin(), x.data().end());
      const std::vector<double> d = deriv(xv, yv);
      auto& gx = gbuf(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * d[i];
    };
  });
}

double stable_sigmoid(double v) {
  if (v >= 0) {
    const double e = std::exp(-v);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_finite("add", a);
  check_finite("add", b);
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  K().add(a.data().data(), b.data().data(), out.data(), out.size());
  return make_result(OpKind::kAdd, a.shape(), std::move(out), {a, b}, [&]() -> BackwardFn {
    return [a, b](std::span<const double> g) {
      if (a.requires_grad()) K().axpy(1.0, g.data(), gbuf(a).data(), g.size());
      if (b.requires_grad()) K().axpy(1.0, g.data(), gbuf(b).data(), g.size());
    };
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_finite("mul", a);
  check_finite("mul", b);
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  K().mul(a.data().data(), b.data().data(), out.data(), out.size());
  return make_result(OpKind::kMul, a.shape(), std::move(out), {a, b}, [&]() -> BackwardFn {
    return [a, b](std::span<const double> g) {
      std::vector<double> tmp(g.size());
      if (a.requires_grad()) {
        K().mul(g.data(), b.data().data(), tmp.data(), g.size());
        K().axpy(1.0, tmp.data(), gbuf(a).data(), g.size());
      }
      if (b.requires_grad()) {
        K().mul(g.data(), a.data().data(), tmp.data(), g.size());
        K().axpy(1.0, tmp.data(), gbuf(b).data(), g.size());
      }
    };
  });
}

Tensor scale(const Tensor& x, double factor) {
  check_finite("scale", x);
  if (!std::isfinite(factor)) throw ShapeError("scale: non-finite factor");
  std::vector<double> out(x.numel());
  K().scale(factor, x.data().data(), out.data(), out.size());
  return make_result(OpKind::kScale, x.shape(), std::move(out), {x}, [&]() -> BackwardFn {
    return [x, factor](std::span<const double> g) {
      K().axpy(factor, g.data(), gbuf(x).data(), g.size());
    };
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  check_finite("add_bias", x);
  check_finite("add_bias", bias);
  const Shape& xs = x.shape();
  const Shape& bs = bias.shape();
  if (bs.size() > xs.size() || !std::equal(bs.begin(), bs.end(), xs.end() - static_cast<long>(bs.size()))) {
    throw ShapeError("add_bias: bias shape " + to_string(bs) + " is not a suffix of " + to_string(xs));
  }
  const std::size_t n = bias.numel();
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    K().add(x.data().data() + r * n, bias.data().data(), out.data() + r * n, n);
  }
  return make_result(OpKind::kAddBias, xs, std::move(out), {x, bias}, [&]() -> BackwardFn {
    return [x, bias, rows, n](std::span<const double> g) {
      if (x.requires_grad()) K().axpy(1.0, g.data(), gbuf(x).data(), g.size());
      if (bias.requires_grad()) {
        auto& gb = gbuf(bias);
        for (std::size_t r = 0; r < rows; ++r) K().axpy(1.0, g.data() + r * n, gb.data(), n);
      }
    };
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_finite("matmul", a);
  check_finite("matmul", b);
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul: operands need rank >= 2, got " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(-2), k = a.dim(-1);
  const std::size_t kb = b.dim(-2), n = b.dim(-1);
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions differ: " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  const bool shared_rhs = b.rank() == 2;
  std::size_t batch = 1;
  if (!shared_rhs) {
    if (b.rank() != a.rank() ||
        !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
      throw ShapeError("matmul: batch dimensions differ: " + to_string(a.shape()) + " x " +
                       to_string(b.shape()));
    }
    batch = a.numel() / (m * k);
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  std::vector<double> out(numel(out_shape), 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  if (shared_rhs) {
    K().gemm(a.numel() / k, k, n, A, B, out.data());
  } else {
    for (std::size_t i = 0; i < batch; ++i) {
      K().gemm(m, k, n, A + i * m * k, B + i * k * n, out.data() + i * m * n);
    }
  }
  return make_result(OpKind::kMatmul, out_shape, std::move(out), {a, b}, [&]() -> BackwardFn {
    return [a, b, m, k, n, batch, shared_rhs](std::span<const double> g) {
      const double* A = a.data().data();
      const double* B = b.data().data();
      if (shared_rhs) {
        const std::size_t rows = a.numel() / k;
        if (a.requires_grad()) K().gemm_bt(rows, n, k, g.data(), B, gbuf(a).data());
        if (b.requires_grad()) K().gemm_at(k, rows, n, A, g.data(), gbuf(b).data());
        return;
      }
      for (std::size_t i = 0; i < batch; ++i) {
        const double* gi = g.data() + i * m * n;
        if (a.requires_grad()) K().gemm_bt(m, n, k, gi, B + i * k * n, gbuf(a).data() + i * m * k);
        if (b.requires_grad()) K().gemm_at(k, m, n, A + i * m * k, gi, gbuf(b).data() + i * k * n);
      }
    };
  });
}

namespace {

Tensor permute_as(OpKind kind, const Tensor& x, const std::vector<std::size_t>& perm) {
  check_finite(op_name(kind), x);
  const std::size_t r = x.rank();
  std::vector<std::size_t> check = perm;
  std::sort(check.begin(), check.end());
  for (std::size_t i = 0; i < check.size(); ++i) {
    if (check.size() != r || check[i] != i) {
      throw ShapeError("permute: invalid permutation for shape " + to_string(x.shape()));
    }
  }
  Shape out_shape(r);
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.shape()[i];
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.shape()[perm[i]];
  const std::size_t total = x.numel();
  std::vector<std::size_t> src(total);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < total; ++o) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < r; ++i) s += idx[i] * in_stride[perm[i]];
    src[o] = s;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<double> out(total);
  const auto xs = x.data();
  for (std::size_t o = 0; o < total; ++o) out[o] = xs[src[o]];
  return make_result(kind, out_shape, std::move(out), {x}, [&]() -> BackwardFn {
    return [x, src = std::move(src)](std::span<const double> g) {
      auto& gx = gbuf(x);
      for (std::size_t o = 0; o < src.size(); ++o) gx[src[o]] += g[o];
    };
  });
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) { return permute_as(OpKind::kPermute, x, perm); }

Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose: rank < 2 for shape " + to_string(x.shape()));
  std::vector<std::size_t> perm(x.rank());
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
  return permute_as(OpKind::kTranspose, x, perm);
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_finite("reshape", x);
  if (numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(OpKind::kReshape, std::move(shape), std::move(out), {x}, [&]() -> BackwardFn {
    return [x](std::span<const double> g) { K().axpy(1.0, g.data(), gbuf(x).data(), g.size()); };
  });
}

Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end) {
  check_finite("slice", x);
  const std::size_t ax = normalize_axis("slice", axis, x.rank());
  const AxisSplit s = split_axis(x.shape(), ax);
  if (begin >= end || end > s.n) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for dimension " + std::to_string(s.n));
  }
  const std::size_t len = end - begin;
  Shape out_shape = x.shape();
  out_shape[ax] = len;
  std::vector<double> out(s.outer * len * s.inner);
  const auto xs = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xs.begin() + static_cast<long>((o * s.n + begin) * s.inner), len * s.inner,
                out.begin() + static_cast<long>(o * len * s.inner));
  }
  return make_result(OpKind::kSlice, out_shape, std::move(out), {x}, [&]() -> BackwardFn {
    return [x, s, begin, len](std::span<const double> g) {
      auto& gx = gbuf(x);
      for (std::size_t o = 0; o < s.outer; ++o) {
        K().axpy(1.0, g.data() + o * len * s.inner, gx.data() + (o * s.n + begin) * s.inner,
                 len * s.inner);
      }
    };
  });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  for (const Tensor& t : xs) check_finite("concat", t);
  const std::size_t ax = normalize_axis("concat", axis, xs[0].rank());
  Shape out_shape = xs[0].shape();
  out_shape[ax] = 0;
  std::vector<std::size_t> widths;
  for (const Tensor& t : xs) {
    Shape a = t.shape(), b = xs[0].shape();
    if (a.size() != b.size()) throw ShapeError("concat: rank mismatch " + to_string(a) + " vs " + to_string(b));
    a[ax] = b[ax] = 0;
    if (a != b) throw ShapeError("concat: shape mismatch " + to_string(t.shape()) + " vs " + to_string(xs[0].shape()));
    out_shape[ax] += t.shape()[ax];
    widths.push_back(t.shape()[ax]);
  }
  const AxisSplit s = split_axis(out_shape, ax);
  std::vector<double> out(numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto d = xs[i].data();
    const std::size_t w = widths[i] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(d.begin() + static_cast<long>(o * w), w,
                  out.begin() + static_cast<long>(o * s.n * s.inner + offset));
    }
    offset += w;
  }
  return make_result(OpKind::kConcat, out_shape, std::move(out), xs, [&]() -> BackwardFn {
    return [xs, widths, s](std::span<const double> g) {
      std::size_t offset = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::size_t w = widths[i] * s.inner;
        if (xs[i].requires_grad()) {
          auto& gx = gbuf(xs[i]);
          for (std::size_t o = 0; o < s.outer; ++o) {
            K().axpy(1.0, g.data() + o * s.n * s.inner + offset, gx.data() + o * w, w);
          }
        }
        offset += w;
      }
    };
  });
}

namespace {

// Softmax along one axis, optionally with excluded positions.
std::vector<double> softmax_forward(const Tensor& x, const AxisSplit& s,
                                    std::span<const std::uint8_t> mask) {
  std::vector<double> y(x.numel(), 0.0);
  const auto xs = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < s.n; ++i) {
        const std::size_t p = base + i * s.inner;
        if (mask.empty() || !mask[p]) mx = std::max(mx, xs[p]);
      }
      if (!std::isfinite(mx)) continue;  // fully masked row
      double z = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) {
        const std::size_t p = base + i * s.inner;
        if (mask.empty() || !mask[p]) {
          y[p] = std::exp(xs[p] - mx);
          z += y[p];
        }
      }
      for (std::size_t i = 0; i < s.n; ++i) y[base + i * s.inner] /= z;
    }
  }
  return y;
}

BackwardFn softmax_backward(const Tensor& x, std::vector<double> y, AxisSplit s) {
  return [x, y = std::move(y), s](std::span<const double> g) {
    auto& gx = gbuf(x);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.n * s.inner + in;
        double dotv = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) dotv += g[base + i * s.inner] * y[base + i * s.inner];
        for (std::size_t i = 0; i < s.n; ++i) {
          const std::size_t p = base + i * s.inner;
          gx[p] += y[p] * (g[p] - dotv);
        }
      }
    }
  };
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  check_finite("softmax", x);
  const AxisSplit s = split_axis(x.shape(), normalize_axis("softmax", axis, x.rank()));
  std::vector<double> y = softmax_forward(x, s, {});
  std::vector<double> ycopy = y;
  return make_result(OpKind::kSoftmax, x.shape(), std::move(y), {x},
                     [&]() { return softmax_backward(x, std::move(ycopy), s); });
}

Tensor masked_softmax(const Tensor& x, std::span<const std::uint8_t> mask) {
  check_finite("masked_softmax", x);
  if (x.rank() == 0) throw ShapeError("masked_softmax: scalar input");
  if (mask.size() != x.numel()) {
    throw ShapeError("masked_softmax: mask has " + std::to_string(mask.size()) +
                     " entries, tensor has " + std::to_string(x.numel()));
  }
  const AxisSplit s = split_axis(x.shape(), x.rank() - 1);
  std::vector<double> y = softmax_forward(x, s, mask);
  std::vector<double> ycopy = y;
  return make_result(OpKind::kSoftmax, x.shape(), std::move(y), {x},
                     [&]() { return softmax_backward(x, std::move(ycopy), s); });
}

namespace {

std::vector<double> lse_along(const Tensor& x, const AxisSplit& s) {
  std::vector<double> out(s.outer * s.inner);
  const auto xs = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = xs[base];
      for (std::size_t i = 1; i < s.n; ++i) mx = std::max(mx, xs[base + i * s.inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) z += std::exp(xs[base + i * s.inner] - mx);
      out[o * s.inner + in] = mx + std::log(z);
    }
  }
  return out;
}

}  // namespace

Tensor log_softmax(const Tensor& x, int axis) {
  check_finite("log_softmax", x);
  const AxisSplit s = split_axis(x.shape(), normalize_axis("log_softmax", axis, x.rank()));
  const std::vector<double> lse = lse_along(x, s);
  std::vector<double> y(x.numel());
  const auto xs = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.n; ++i) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t p = (o * s.n + i) * s.inner + in;
        y[p] = xs[p] - lse[o * s.inner + in];
      }
    }
  }
  std::vector<double> ycopy = y;
  return make_result(OpKind::kLogSoftmax, x.shape(), std::move(y), {x}, [&]() -> BackwardFn {
    return [x, y = std::move(ycopy), s](std::span<const double> g) {
      auto& gx = gbuf(x);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.n * s.inner + in;
          double gs = 0.0;
          for (std::size_t i = 0; i < s.n; ++i) gs += g[base + i * s.inner];
          for (std::size_t i = 0; i < s.n; ++i) {
            const std::size_t p = base + i * s.inner;
            gx[p] += g[p] - std::exp(y[p]) * gs;
          }
        }
      }
    };
  });
}

Tensor logsumexp(const Tensor& x, int axis) {
  check_finite("logsumexp", x);
  const std::size_t ax = normalize_axis("logsumexp", axis, x.rank());
  const AxisSplit s = split_axis(x.shape(), ax);
  std::vector<double> out = lse_along(x, s);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<long>(ax));
  std::vector<double> lse = out;
  return make_result(OpKind::kLogSumExp, out_shape, std::move(out), {x}, [&]() -> BackwardFn {
    return [x, lse = std::move(lse), s](std::span<const double> g) {
      auto& gx = gbuf(x);
      const auto xs = x.data();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.n; ++i) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t p = (o * s.n + i) * s.inner + in;
            const std::size_t r = o * s.inner + in;
            gx[p] += g[r] * std::exp(xs[p] - lse[r]);
          }
        }
      }
    };
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  check_finite("layer_norm", x);
  check_finite("layer_norm", gain);
  check_finite("layer_norm", bias);
  if (x.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = x.dim(-1);
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeError("layer_norm: gain/bias " + to_string(gain.shape()) + "/" +
                     to_string(bias.shape()) + " do not match last dim " + std::to_string(d));
  }
  if (!(eps > 0.0)) throw ShapeError("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  std::vector<double> xhat(x.numel()), rstd(rows), y(x.numel());
  const auto xs = x.data();
  const auto gs = gain.data();
  const auto bs = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xs.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * rstd[r];
      y[r * d + j] = gs[j] * xhat[r * d + j] + bs[j];
    }
  }
  return make_result(OpKind::kLayerNorm, x.shape(), std::move(y), {x, gain, bias}, [&]() -> BackwardFn {
    return [x, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd), rows, d](std::span<const double> g) {
      const auto gs = gain.data();
      if (gain.requires_grad()) {
        auto& gg = gbuf(gain);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * xhat[r * d + j];
      }
      if (bias.requires_grad()) {
        auto& gb = gbuf(bias);
        for (std::size_t r = 0; r < rows; ++r) K().axpy(1.0, g.data() + r * d, gb.data(), d);
      }
      if (x.requires_grad()) {
        auto& gx = gbuf(x);
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = g[r * d + j] * gs[j];
            m1 += gh;
            m2 += gh * xhat[r * d + j];
          }
          m1 *= inv_d;
          m2 *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = g[r * d + j] * gs[j];
            gx[r * d + j] += rstd[r] * (gh - m1 - xhat[r * d + j] * m2);
          }
        }
      }
    };
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(OpKind::kSigmoid, x, stable_sigmoid,
               [](const std::vector<double>&, const std::vector<double>& y) {
                 std::vector<double> d(y.size());
                 for (std::size_t i = 0; i < y.size(); ++i) d[i] = y[i] * (1.0 - y[i]);
                 return d;
               });
}

Tensor swish(const Tensor& x) {
  return unary(OpKind::kSwish, x, [](double v) { return v * stable_sigmoid(v); },
               [](const std::vector<double>& xv, const std::vector<double>&) {
                 std::vector<double> d(xv.size());
                 for (std::size_t i = 0; i < xv.size(); ++i) {
                   const double s = stable_sigmoid(xv[i]);
                   d[i] = s + xv[i] * s * (1.0 - s);
                 }
                 return d;
               });
}

Tensor relu(const Tensor& x) {
  return unary(OpKind::kRelu, x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](const std::vector<double>& xv, const std::vector<double>&) {
                 std::vector<double> d(xv.size());
                 for (std::size_t i = 0; i < xv.size(); ++i) d[i] = xv[i] > 0.0 ? 1.0 : 0.0;
                 return d;
               });
}

Tensor glu(const Tensor& x) {
  check_finite("glu", x);
  if (x.rank() == 0 || x.dim(-1) % 2 != 0) {
    throw ShapeError("glu: last dimension must be even, got shape " + to_string(x.shape()));
  }
  const std::size_t d2 = x.dim(-1), h = d2 / 2, rows = x.numel() / d2;
  Shape out_shape = x.shape();
  out_shape.back() = h;
  std::vector<double> y(rows * h), gate(rows * h);
  const auto xs = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < h; ++j) {
      gate[r * h + j] = stable_sigmoid(xs[r * d2 + h + j]);
      y[r * h + j] = xs[r * d2 + j] * gate[r * h + j];
    }
  }
  return make_result(OpKind::kGlu, out_shape, std::move(y), {x}, [&]() -> BackwardFn {
    return [x, gate = std::move(gate), rows, h, d2](std::span<const double> g) {
      auto& gx = gbuf(x);
      const auto xs = x.data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < h; ++j) {
          const double s = gate[r * h + j];
          const double gv = g[r * h + j];
          gx[r * d2 + j] += gv * s;
          gx[r * d2 + h + j] += gv * xs[r * d2 + j] * s * (1.0 - s);
        }
      }
    };
  });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  check_finite("depthwise_conv1d", x);
  check_finite("depthwise_conv1d", weight);
  if (bias.defined()) check_finite("depthwise_conv1d", bias);
  if (x.rank() != 3 || weight.rank() != 2 || weight.dim(0) != x.dim(2)) {
    throw ShapeError("depthwise_conv1d: expected x [B,T,C] and weight [C,K], got " +
                     to_string(x.shape()) + " and " + to_string(weight.shape()));
  }
  const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2), Kw = weight.dim(1);
  if (Kw % 2 == 0) throw ShapeError("depthwise_conv1d: kernel size must be odd, got " + std::to_string(Kw));
  if (bias.defined() && bias.shape() != Shape{C}) {
    throw ShapeError("depthwise_conv1d: bias " + to_string(bias.shape()) + " expected [" + std::to_string(C) + "]");
  }
  const long P = static_cast<long>(Kw / 2);
  const auto xs = x.data();
  const auto ws = weight.data();
  std::vector<double> y(x.numel(), 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      double* out = y.data() + (b * T + t) * C;
      if (bias.defined()) std::copy_n(bias.data().begin(), C, out);
      for (std::size_t k = 0; k < Kw; ++k) {
        const long src = static_cast<long>(t) + static_cast<long>(k) - P;
        if (src < 0 || src >= static_cast<long>(T)) continue;
        const double* in = xs.data() + (b * T + static_cast<std::size_t>(src)) * C;
        for (std::size_t c = 0; c < C; ++c) out[c] += ws[c * Kw + k] * in[c];
      }
    }
  }
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(OpKind::kDepthwiseConv1d, x.shape(), std::move(y), inputs, [&]() -> BackwardFn {
    return [x, weight, bias, B, T, C, Kw, P](std::span<const double> g) {
      const auto xs = x.data();
      const auto ws = weight.data();
      double* gx = x.requires_grad() ? gbuf(x).data() : nullptr;
      double* gw = weight.requires_grad() ? gbuf(weight).data() : nullptr;
      if (bias.defined() && bias.requires_grad()) {
        auto& gb = gbuf(bias);
        for (std::size_t r = 0; r < B * T; ++r) K().axpy(1.0, g.data() + r * C, gb.data(), C);
      }
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < T; ++t) {
          const double* go = g.data() + (b * T + t) * C;
          for (std::size_t k = 0; k < Kw; ++k) {
            const long src = static_cast<long>(t) + static_cast<long>(k) - P;
            if (src < 0 || src >= static_cast<long>(T)) continue;
            const std::size_t off = (b * T + static_cast<std::size_t>(src)) * C;
            for (std::size_t c = 0; c < C; ++c) {
              if (gx) gx[off + c] += ws[c * Kw + k] * go[c];
              if (gw) gw[c * Kw + k] += xs[off + c] * go[c];
            }
          }
        }
      }
    };
  });
}

namespace {

struct ConvGeom {
  std::size_t B, Ci, H, W, Co, KH, KW, Ho, Wo, stride, pad;
  std::size_t col_rows() const { return Ci * KH * KW; }
  std::size_t col_cols() const { return Ho * Wo; }
};

void im2col(const double* img, const ConvGeom& g, double* cols) {
  for (std::size_t c = 0; c < g.Ci; ++c)
    for (std::size_t kh = 0; kh < g.KH; ++kh)
      for (std::size_t kw = 0; kw < g.KW; ++kw) {
        double* row = cols + ((c * g.KH + kh) * g.KW + kw) * g.col_cols();
        for (std::size_t oh = 0; oh < g.Ho; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.pad);
          for (std::size_t ow = 0; ow < g.Wo; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.pad);
            const bool inside = ih >= 0 && ih < static_cast<long>(g.H) && iw >= 0 && iw < static_cast<long>(g.W);
            row[oh * g.Wo + ow] = inside ? img[(c * g.H + static_cast<std::size_t>(ih)) * g.W + static_cast<std::size_t>(iw)] : 0.0;
          }
        }
      }
}

void col2im(const double* cols, const ConvGeom& g, double* img) {
  for (std::size_t c = 0; c < g.Ci; ++c)
    for (std::size_t kh = 0; kh < g.KH; ++kh)
      for (std::size_t kw = 0; kw < g.KW; ++kw) {
        const double* row = cols + ((c * g.KH + kh) * g.KW + kw) * g.col_cols();
        for (std::size_t oh = 0; oh < g.Ho; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.pad);
          if (ih < 0 || ih >= static_cast<long>(g.H)) continue;
          for (std::size_t ow = 0; ow < g.Wo; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.pad);
            if (iw < 0 || iw >= static_cast<long>(g.W)) continue;
            img[(c * g.H + static_cast<std::size_t>(ih)) * g.W + static_cast<std::size_t>(iw)] += row[oh * g.Wo + ow];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  check_finite("conv2d", x);
  check_finite("conv2d", weight);
  if (bias.defined()) check_finite("conv2d", bias);
  if (x.rank() != 4 || weight.rank() != 4 || weight.dim(1) != x.dim(1)) {
    throw ShapeError("conv2d: expected x [B,Cin,H,W] and weight [Cout,Cin,KH,KW], got " +
                     to_string(x.shape()) + " and " + to_string(weight.shape()));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), weight.dim(3),
             0, 0, stride, padding};
  if (g.H + 2 * padding < g.KH || g.W + 2 * padding < g.KW) {
    throw ShapeError("conv2d: kernel larger than padded input " + to_string(x.shape()));
  }
  g.Ho = (g.H + 2 * padding - g.KH) / stride + 1;
  g.Wo = (g.W + 2 * padding - g.KW) / stride + 1;
  if (bias.defined() && bias.shape() != Shape{g.Co}) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " expected [" + std::to_string(g.Co) + "]");
  }
  const std::size_t cr = g.col_rows(), cc = g.col_cols();
  std::vector<double> cols(g.B * cr * cc);
  std::vector<double> y(g.B * g.Co * cc, 0.0);
  const auto xs = x.data();
  for (std::size_t b = 0; b < g.B; ++b) {
    double* colb = cols.data() + b * cr * cc;
    im2col(xs.data() + b * g.Ci * g.H * g.W, g, colb);
    double* yb = y.data() + b * g.Co * cc;
    if (bias.defined()) {
      for (std::size_t o = 0; o < g.Co; ++o) std::fill_n(yb + o * cc, cc, bias[o]);
    }
    K().gemm(g.Co, cr, cc, weight.data().data(), colb, yb);
  }
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(OpKind::kConv2d, {g.B, g.Co, g.Ho, g.Wo}, std::move(y), inputs, [&]() -> BackwardFn {
    return [x, weight, bias, g, cols = std::move(cols)](std::span<const double> go) {
      const std::size_t cr = g.col_rows(), cc = g.col_cols();
      std::vector<double> gcols(cr * cc);
      for (std::size_t b = 0; b < g.B; ++b) {
        const double* gb = go.data() + b * g.Co * cc;
        if (weight.requires_grad()) K().gemm_bt(g.Co, cc, cr, gb, cols.data() + b * cr * cc, gbuf(weight).data());
        if (bias.defined() && bias.requires_grad()) {
          auto& gbias = gbuf(bias);
          for (std::size_t o = 0; o < g.Co; ++o) gbias[o] += K().sum(gb + o * cc, cc);
        }
        if (x.requires_grad()) {
          std::fill(gcols.begin(), gcols.end(), 0.0);
          K().gemm_at(cr, g.Co, cc, weight.data().data(), gb, gcols.data());
          col2im(gcols.data(), g, gbuf(x).data() + b * g.Ci * g.H * g.W);
        }
      }
    };
  });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  check_finite("dropout", x);
  if (!(rate >= 0.0 && rate < 1.0)) throw ShapeError("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = uniform01(rng) < rate ? 0.0 : keep_scale;
  std::vector<double> y(x.numel());
  K().mul(x.data().data(), mask.data(), y.data(), y.size());
  return make_result(OpKind::kDropout, x.shape(), std::move(y), {x}, [&]() -> BackwardFn {
    return [x, mask = std::move(mask)](std::span<const double> g) {
      auto& gx = gbuf(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * mask[i];
    };
  });
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
  check_finite("embedding", table);
  if (table.rank() != 2) throw ShapeError("embedding: table must be [V,D], got " + to_string(table.shape()));
  if (ids.empty()) throw ShapeError("embedding: empty id list");
  const std::size_t V = table.dim(0), D = table.dim(1);
  std::vector<double> y(ids.size() * D);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= V) throw ShapeError("embedding: id " + std::to_string(ids[i]) + " out of range " + std::to_string(V));
    std::copy_n(table.data().begin() + static_cast<long>(ids[i] * D), D, y.begin() + static_cast<long>(i * D));
  }
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  return make_result(OpKind::kEmbedding, {ids.size(), D}, std::move(y), {table}, [&]() -> BackwardFn {
    return [table, idv = std::move(idv), D](std::span<const double> g) {
      auto& gt = gbuf(table);
      for (std::size_t i = 0; i < idv.size(); ++i) K().axpy(1.0, g.data() + i * D, gt.data() + idv[i] * D, D);
    };
  });
}

Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, double value) {
  check_finite("masked_fill", x);
  if (!std::isfinite(value)) throw ShapeError("masked_fill: non-finite fill value");
  if (mask.size() != x.numel()) {
    throw ShapeError("masked_fill: mask has " + std::to_string(mask.size()) + " entries, tensor has " +
                     std::to_string(x.numel()));
  }
  std::vector<double> y(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < y.size(); ++i)
    if (mask[i]) y[i] = value;
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return make_result(OpKind::kMaskedFill, x.shape(), std::move(y), {x}, [&]() -> BackwardFn {
    return [x, m = std::move(m)](std::span<const double> g) {
      auto& gx = gbuf(x);
      for (std::size_t i = 0; i < gx.size(); ++i)
        if (!m[i]) gx[i] += g[i];
    };
  });
}

Tensor sum(const Tensor& x) {
  check_finite("sum", x);
  const double s = K().sum(x.data().data(), x.numel());
  return make_result(OpKind::kSum, {}, {s}, {x}, [&]() -> BackwardFn {
    return [x](std::span<const double> g) {
      auto& gx = gbuf(x);
      for (double& v : gx) v += g[0];
    };
  });
}

Tensor mean(const Tensor& x) {
  check_finite("mean", x);
  const double n = static_cast<double>(x.numel());
  const double s = K().sum(x.data().data(), x.numel()) / n;
  return make_result(OpKind::kMean, {}, {s}, {x}, [&]() -> BackwardFn {
    return [x, n](std::span<const double> g) {
      auto& gx = gbuf(x);
      for (double& v : gx) v += g[0] / n;
    };
  });
}

Tensor gather(const Tensor& x, Shape shape, std::vector<std::size_t> indices) {
  check_finite("gather", x);
  if (numel(shape) != indices.size()) {
    throw ShapeError("gather: " + std::to_string(indices.size()) + " indices for shape " + to_string(shape));
  }
  std::vector<double> y(indices.size());
  const auto xs = x.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= xs.size()) {
      throw ShapeError("gather: index " + std::to_string(indices[i]) + " out of range " + std::to_string(xs.size()));
    }
    y[i] = xs[indices[i]];
  }
  return make_result(OpKind::kGather, std::move(shape), std::move(y), {x}, [&]() -> BackwardFn {
    return [x, idx = std::move(indices)](std::span<const double> g) {
      auto& gx = gbuf(x);
      for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
    };
  });
}

Tensor kernel_forward(OpKind kind, const std::vector<Tensor>& in, const OpAttrs& at) {
  auto need = [&](std::size_t n) {
    if (in.size() < n) {
      throw ShapeError(std::string(op_name(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                       std::to_string(in.size()));
    }
  };
  auto opt = [&](std::size_t i) { return i < in.size() ? in[i] : Tensor(); };
  switch (kind) {
    case OpKind::kAdd: need(2); return add(in[0], in[1]);
    case OpKind::kMul: need(2); return mul(in[0], in[1]);
    case OpKind::kScale: need(1); return scale(in[0], at.value);
    case OpKind::kAddBias: need(2); return add_bias(in[0], in[1]);
    case OpKind::kMatmul: need(2); return matmul(in[0], in[1]);
    case OpKind::kTranspose: need(1); return transpose(in[0]);
    case OpKind::kPermute: need(1); return permute(in[0], at.indices);
    case OpKind::kReshape: need(1); return reshape(in[0], at.shape);
    case OpKind::kSlice: need(1); return slice(in[0], at.axis, at.begin, at.end);
    case OpKind::kConcat: need(1); return concat(in, at.axis);
    case OpKind::kSoftmax:
      need(1);
      return at.mask.empty() ? softmax(in[0], at.axis) : masked_softmax(in[0], at.mask);
    case OpKind::kLogSoftmax: need(1); return log_softmax(in[0], at.axis);
    case OpKind::kLogSumExp: need(1); return logsumexp(in[0], at.axis);
    case OpKind::kLayerNorm: need(3); return layer_norm(in[0], in[1], in[2], at.value > 0 ? at.value : 1e-5);
    case OpKind::kSigmoid: need(1); return sigmoid(in[0]);
    case OpKind::kSwish: need(1); return swish(in[0]);
    case OpKind::kRelu: need(1); return relu(in[0]);
    case OpKind::kGlu: need(1); return glu(in[0]);
    case OpKind::kDepthwiseConv1d: need(2); return depthwise_conv1d(in[0], in[1], opt(2));
    case OpKind::kConv2d: need(2); return conv2d(in[0], in[1], opt(2), at.stride, at.padding);
    case OpKind::kDropout: {
      need(1);
      if (at.training && at.rng == nullptr) throw ShapeError("dropout: training mode needs an rng");
      Rng unused(0);
      return dropout(in[0], at.value, at.training, at.rng ? *at.rng : unused);
    }
    case OpKind::kEmbedding: need(1); return embedding(in[0], at.indices);
    case OpKind::kMaskedFill: need(1); return masked_fill(in[0], at.mask, at.value);
    case OpKind::kSum: need(1); return sum(in[0]);
    case OpKind::kMean: need(1); return mean(in[0]);
    case OpKind::kGather: need(1); return gather(in[0], at.shape, at.indices);
    case OpKind::kCtcLoss: break;
  }
  throw ShapeError(std::string(op_name(kind)) + ": not available through kernel_forward");
}

}  // namespace asrlab::ops
