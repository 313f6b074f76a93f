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


#include "asrlab/conformer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "asrlab/ops.hpp"

namespace asrlab::model {

namespace {

std::string layer_prefix(std::size_t i) { return "layer." + std::to_string(i) + "."; }

const Tensor& param(const ParameterSet& p, const std::string& name) {
  const auto it = p.find(name);
  if (it == p.end()) throw ShapeError("missing parameter " + name);
  return it->second;
}

Tensor linear(const Tensor& x, const ParameterSet& p, const std::string& name) {
  return ops::add_bias(ops::matmul(x, param(p, name + ".weight")), param(p, name + ".bias"));
}

Tensor norm(const Tensor& x, const ParameterSet& p, const std::string& name) {
  return ops::layer_norm(x, param(p, name + ".gain"), param(p, name + ".bias"));
}

// 1 where the time index (axis `time_axis`) is at or past the utterance length.
std::vector<std::uint8_t> time_mask(const Shape& shape, std::size_t time_axis,
                                    const std::vector<std::size_t>& lengths) {
  std::size_t inner = 1;
  for (std::size_t a = time_axis + 1; a < shape.size(); ++a) inner *= shape[a];
  std::size_t mid = 1;
  for (std::size_t a = 1; a < time_axis; ++a) mid *= shape[a];
  const std::size_t T = shape[time_axis];
  std::vector<std::uint8_t> mask(numel(shape));
  for (std::size_t b = 0; b < shape[0]; ++b)
    for (std::size_t m = 0; m < mid; ++m)
      for (std::size_t t = 0; t < T; ++t) {
        const std::uint8_t v = t >= lengths[b];
        std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(((b * mid + m) * T + t) * inner),
                    inner, v);
      }
  return mask;
}

struct Context {
  const ParameterSet& p;
  const ModelConfig& cfg;
  bool training;
  Rng* rng;
  std::vector<std::size_t> lengths;  // subsampled

  Tensor drop(const Tensor& x) const {
    if (!training) return x;
    return ops::dropout(x, cfg.dropout, true, *rng);
  }
};

Tensor feed_forward(const Context& c, const Tensor& x, const std::string& name) {
  Tensor h = norm(x, c.p, name + ".norm");
  h = c.drop(ops::swish(linear(h, c.p, name + ".linear1")));
  return c.drop(linear(h, c.p, name + ".linear2"));
}

Tensor self_attention(const Context& c, const Tensor& x, const std::string& name) {
  const std::size_t B = x.dim(0), T = x.dim(1), d = c.cfg.d_model, H = c.cfg.num_heads, dk = d / H;
  const Tensor y = norm(x, c.p, name + ".norm");
  const Tensor q = ops::reshape(linear(y, c.p, name + ".query"), {B, T, H, dk});
  const Tensor qu = ops::permute(ops::add_bias(q, param(c.p, name + ".pos_bias_u")), {0, 2, 1, 3});
  const Tensor qv = ops::permute(ops::add_bias(q, param(c.p, name + ".pos_bias_v")), {2, 0, 1, 3});
  const Tensor k = ops::permute(ops::reshape(linear(y, c.p, name + ".key"), {B, T, H, dk}), {0, 2, 3, 1});
  const Tensor v = ops::permute(ops::reshape(linear(y, c.p, name + ".value"), {B, T, H, dk}), {0, 2, 1, 3});

  const Tensor content = ops::matmul(qu, k);  // [B,H,T,T]

  const std::size_t R = 2 * T - 1;
  const Tensor pos = ops::permute(
      ops::reshape(ops::matmul(relative_position_table(T, d), param(c.p, name + ".pos.weight")), {R, H, dk}),
      {1, 2, 0});                                                                         // [H,dk,R]
  const Tensor full = ops::matmul(ops::reshape(qv, {H, B * T, dk}), pos);                // [H,B*T,R]
  std::vector<std::size_t> idx;
  idx.reserve(B * H * T * T);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = 0; j < T; ++j) idx.push_back((h * B * T + b * T + i) * R + (T - 1 - i + j));
  const Tensor position = ops::gather(full, {B, H, T, T}, std::move(idx));

  const Tensor scores = ops::scale(ops::add(content, position), 1.0 / std::sqrt(static_cast<double>(dk)));
  const Tensor attn = ops::masked_softmax(scores, time_mask({B, H, T, T}, 3, c.lengths));
  const Tensor ctx = ops::reshape(ops::permute(ops::matmul(attn, v), {0, 2, 1, 3}), {B, T, d});
  return c.drop(linear(ctx, c.p, name + ".output"));
}

Tensor conv_module(const Context& c, const Tensor& x, const std::string& name) {
  Tensor h = ops::glu(linear(norm(x, c.p, name + ".norm"), c.p, name + ".pointwise1"));
  h = ops::masked_fill(h, time_mask(h.shape(), 1, c.lengths), 0.0);
  h = ops::depthwise_conv1d(h, param(c.p, name + ".depthwise.weight"), param(c.p, name + ".depthwise.bias"));
  h = ops::swish(norm(h, c.p, name + ".depthwise_norm"));
  return c.drop(linear(h, c.p, name + ".pointwise2"));
}

void check_finite_activation(const Tensor& x, const std::string& where) {
  for (double v : x.data())
    if (!std::isfinite(v)) throw Error("non-finite activation in " + where);
}

}  // namespace

void ModelConfig::validate() const {
  if (num_layers == 0) throw ConfigError("model: num_layers must be positive");
  if (d_model == 0 || num_heads == 0 || d_model % num_heads != 0) {
    throw ConfigError("model: d_model " + std::to_string(d_model) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (conv_kernel % 2 == 0) throw ConfigError("model: conv_kernel must be odd, got " + std::to_string(conv_kernel));
  if (ff_expansion == 0) throw ConfigError("model: ff_expansion must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must be in [0,1)");
  if (vocab_out < 2) throw ConfigError("model: vocab_out must be at least 2");
  if (subsample_factor != 4) throw ConfigError("model: only subsample_factor 4 is supported");
  if (input_dim < 4) throw ConfigError("model: input_dim too small");
}

ModelConfig ModelConfig::large() { return ModelConfig{}; }

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.num_layers = 2;
  c.d_model = 16;
  c.num_heads = 2;
  c.conv_kernel = 7;
  return c;
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model, H = cfg.num_heads, F = d * cfg.ff_expansion;
  const std::size_t freq = conv_out_length(conv_out_length(cfg.input_dim));
  std::vector<std::pair<std::string, Shape>> s;
  auto lin = [&](const std::string& n, std::size_t in, std::size_t out) {
    s.emplace_back(n + ".weight", Shape{in, out});
    s.emplace_back(n + ".bias", Shape{out});
  };
  auto ln = [&](const std::string& n) {
    s.emplace_back(n + ".gain", Shape{d});
    s.emplace_back(n + ".bias", Shape{d});
  };
  s.emplace_back("subsample.conv1.weight", Shape{d, 1, 3, 3});
  s.emplace_back("subsample.conv1.bias", Shape{d});
  s.emplace_back("subsample.conv2.weight", Shape{d, d, 3, 3});
  s.emplace_back("subsample.conv2.bias", Shape{d});
  lin("subsample.linear", d * freq, d);
  for (std::size_t i = 0; i < cfg.num_layers; ++i) {
    const std::string L = layer_prefix(i);
    for (const char* ff : {"ff1", "ff2"}) {
      ln(L + ff + ".norm");
      lin(L + ff + ".linear1", d, F);
      lin(L + ff + ".linear2", F, d);
    }
    ln(L + "mhsa.norm");
    for (const char* n : {"query", "key", "value", "output"}) lin(L + "mhsa." + n, d, d);
    s.emplace_back(L + "mhsa.pos.weight", Shape{d, d});
    s.emplace_back(L + "mhsa.pos_bias_u", Shape{H, d / H});
    s.emplace_back(L + "mhsa.pos_bias_v", Shape{H, d / H});
    ln(L + "conv.norm");
    lin(L + "conv.pointwise1", d, 2 * d);
    s.emplace_back(L + "conv.depthwise.weight", Shape{d, cfg.conv_kernel});
    s.emplace_back(L + "conv.depthwise.bias", Shape{d});
    ln(L + "conv.depthwise_norm");
    lin(L + "conv.pointwise2", d, d);
    ln(L + "final_norm");
  }
  lin("head", d, cfg.vocab_out);
  return s;
}

ParameterSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  for (const auto& [name, shape] : parameter_shapes(cfg)) {
    std::vector<double> v(numel(shape), 0.0);
    const bool is_gain = name.ends_with(".gain");
    const bool is_weight = name.ends_with(".weight");
    if (is_gain) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (is_weight) {
      double fan_in = 0, fan_out = 0;
      if (shape.size() == 2 && name.find("depthwise") != std::string::npos) {
        fan_in = fan_out = static_cast<double>(shape[1]);
      } else if (shape.size() == 2) {
        fan_in = static_cast<double>(shape[0]);
        fan_out = static_cast<double>(shape[1]);
      } else {
        const double area = static_cast<double>(shape[2] * shape[3]);
        fan_in = static_cast<double>(shape[1]) * area;
        fan_out = static_cast<double>(shape[0]) * area;
      }
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& x : v) x = limit * (2.0 * uniform01(rng) - 1.0);
    }
    params.emplace(name, Tensor::from(shape, std::move(v), true));
  }
  return params;
}

std::size_t count_params(const ParameterSet& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

std::size_t count_params(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_shapes(cfg)) n += numel(shape);
  return n;
}

void check_params(const ParameterSet& params, const ModelConfig& cfg) {
  const auto shapes = parameter_shapes(cfg);
  for (const auto& [name, shape] : shapes) {
    const auto it = params.find(name);
    if (it == params.end()) throw ShapeError("parameter " + name + " is missing");
    if (it->second.shape() != shape) {
      throw ShapeError("parameter " + name + " has shape " + to_string(it->second.shape()) + ", config expects " +
                       to_string(shape));
    }
  }
  if (params.size() != shapes.size()) {
    for (const auto& [name, t] : params) {
      const bool known = std::any_of(shapes.begin(), shapes.end(), [&](const auto& s) { return s.first == name; });
      if (!known) throw ShapeError("unexpected parameter " + name);
    }
  }
}

std::size_t subsampled_length(std::size_t num_frames) {
  if (num_frames < 4) {
    throw ShapeError("subsampling needs at least 4 frames, got " + std::to_string(num_frames));
  }
  return conv_out_length(conv_out_length(num_frames));
}

Tensor subsample(const Tensor& features, const std::vector<std::size_t>& lengths, const ParameterSet& p,
                 const ModelConfig& cfg) {
  if (features.rank() != 3 || features.dim(2) != cfg.input_dim) {
    throw ShapeError("subsample: expected features [B,T," + std::to_string(cfg.input_dim) + "], got " +
                     to_string(features.shape()));
  }
  const std::size_t B = features.dim(0), T = features.dim(1);
  if (lengths.size() != B) throw ShapeError("subsample: lengths do not match batch size");
  subsampled_length(T);
  std::vector<std::size_t> l1, l2;
  for (std::size_t len : lengths) {
    if (len < 4 || len > T) throw ShapeError("subsample: utterance length " + std::to_string(len) + " invalid for T=" + std::to_string(T));
    l1.push_back(conv_out_length(len));
    l2.push_back(conv_out_length(l1.back()));
  }
  Tensor h = ops::reshape(features, {B, 1, T, cfg.input_dim});
  h = ops::relu(ops::conv2d(h, param(p, "subsample.conv1.weight"), param(p, "subsample.conv1.bias"), 2, 1));
  h = ops::masked_fill(h, time_mask(h.shape(), 2, l1), 0.0);
  h = ops::relu(ops::conv2d(h, param(p, "subsample.conv2.weight"), param(p, "subsample.conv2.bias"), 2, 1));
  h = ops::masked_fill(h, time_mask(h.shape(), 2, l2), 0.0);
  const std::size_t T2 = h.dim(2), F2 = h.dim(3);
  h = ops::reshape(ops::permute(h, {0, 2, 1, 3}), {B, T2, cfg.d_model * F2});
  h = linear(h, p, "subsample.linear");
  return ops::masked_fill(h, time_mask(h.shape(), 1, l2), 0.0);
}

Tensor relative_position_table(std::size_t T, std::size_t d) {
  const std::size_t R = 2 * T - 1;
  std::vector<double> v(R * d);
  for (std::size_t r = 0; r < R; ++r) {
    const double dist = static_cast<double>(T - 1) - static_cast<double>(r);
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle = dist / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      v[r * d + i] = std::sin(angle);
      if (i + 1 < d) v[r * d + i + 1] = std::cos(angle);
    }
  }
  return Tensor::from({R, d}, std::move(v));
}

EncoderOutput encoder_forward(const Tensor& features, const std::vector<std::size_t>& lengths,
                              const ParameterSet& params, const ModelConfig& cfg, Mode mode, Rng* rng) {
  check_params(params, cfg);
  const bool training = mode == Mode::kTrain && cfg.dropout > 0.0;
  if (mode == Mode::kTrain && rng == nullptr) throw Error("encoder_forward: train mode needs an rng");

  Context c{params, cfg, training, rng, {}};
  for (std::size_t len : lengths) c.lengths.push_back(subsampled_length(len));

  Tensor x = c.drop(subsample(features, lengths, params, cfg));
  for (std::size_t i = 0; i < cfg.num_layers; ++i) {
    const std::string L = layer_prefix(i);
    try {
      x = ops::add(x, ops::scale(feed_forward(c, x, L + "ff1"), 0.5));
      x = ops::add(x, self_attention(c, x, L + "mhsa"));
      x = ops::add(x, conv_module(c, x, L + "conv"));
      x = ops::add(x, ops::scale(feed_forward(c, x, L + "ff2"), 0.5));
      x = norm(x, params, L + "final_norm");
    } catch (const ShapeError& e) {
      throw Error("layer " + std::to_string(i) + ": " + e.what());
    }
    check_finite_activation(x, "layer " + std::to_string(i));
  }
  EncoderOutput out;
  out.log_probs = ops::log_softmax(linear(x, params, "head"));
  out.lengths = std::move(c.lengths);
  return out;
}

}  // namespace asrlab::model
