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

#include "asrlab/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

#include "asrlab/kernels.hpp"
#include "binary_io.hpp"

namespace asrlab::audio {

namespace {

constexpr std::size_t kNumFftBins = kFftSize / 2 + 1;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

const std::vector<double>& hann_window() {
  static const std::vector<double> window = [] {
    std::vector<double> w(kFrameLength);
    for (std::size_t n = 0; n < kFrameLength; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                  static_cast<double>(kFrameLength - 1));
    }
    return w;
  }();
  return window;
}

// Transposed filterbank, [257, 80], for the frames x bins gemm.
const std::vector<double>& mel_filterbank_t() {
  static const std::vector<double> wt = [] {
    const auto& w = mel_filterbank();
    std::vector<double> t(kNumFftBins * kNumMelBins);
    for (std::size_t m = 0; m < kNumMelBins; ++m)
      for (std::size_t k = 0; k < kNumFftBins; ++k) t[k * kNumMelBins + m] = w[m * kNumFftBins + k];
    return t;
  }();
  return wt;
}

// One r2c plan shared by all calls; fftw_execute_dft_r2c on caller-owned
// buffers is thread-safe, plan creation is not.
fftw_plan r2c_plan() {
  static std::once_flag once;
  static fftw_plan plan = nullptr;
  std::call_once(once, [] {
    std::vector<double> in(kFftSize);
    fftw_complex* out = fftw_alloc_complex(kNumFftBins);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(kFftSize), in.data(), out,
                                FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_PRESERVE_INPUT);
    fftw_free(out);
  });
  return plan;
}

std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {  // inclusive
  const double u = uniform01(rng);
  return lo + std::min(hi - lo, static_cast<std::size_t>(u * static_cast<double>(hi - lo + 1)));
}

double gaussian(Rng& rng) {
  // Box-Muller on the portable uniform source.
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

void AugmentPolicy::validate() const {
  if (freq_mask_max_width > kNumMelBins) {
    throw ConfigError("augment: freq mask width " + std::to_string(freq_mask_max_width) +
                      " exceeds feature dimension 80");
  }
  if (!(time_mask_max_fraction >= 0.0 && time_mask_max_fraction <= 1.0)) {
    throw ConfigError("augment: time mask fraction must be in [0,1]");
  }
  for (double f : speed_factors) {
    if (!(f >= 0.8 && f <= 1.2)) throw ConfigError("augment: speed factor " + std::to_string(f) + " outside [0.8,1.2]");
  }
  if (!(gain_db_range >= 0.0)) throw ConfigError("augment: gain range must be non-negative");
}

AugmentPolicy AugmentPolicy::disabled() {
  AugmentPolicy p;
  p.enabled = false;
  return p;
}

Waveform load_wav(const std::filesystem::path& path) {
  const std::vector<char> bytes = io::read_file(path);
  const std::string what = path.string();
  io::ByteReader r(bytes, what);
  if (r.get_bytes(4) != "RIFF") throw FormatError(what + ": not a RIFF file");
  r.get<std::uint32_t>();
  if (r.get_bytes(4) != "WAVE") throw FormatError(what + ": not a WAVE file");

  bool have_fmt = false;
  Waveform wave;
  wave.id = path.stem().string();
  while (true) {
    const std::string tag = r.get_bytes(4);
    const std::uint32_t size = r.get<std::uint32_t>();
    if (tag == "fmt ") {
      if (size < 16) throw FormatError(what + ": fmt chunk too short");
      const auto format = r.get<std::uint16_t>();
      const auto channels = r.get<std::uint16_t>();
      const auto rate = r.get<std::uint32_t>();
      r.get<std::uint32_t>();  // byte rate
      r.get<std::uint16_t>();  // block align
      const auto bits = r.get<std::uint16_t>();
      r.get_bytes(size - 16);
      if (format != 1) throw FormatError(what + ": audio_format=" + std::to_string(format) + ", expected 1 (PCM)");
      if (channels != 1) throw FormatError(what + ": channels=" + std::to_string(channels) + ", expected 1");
      if (rate != kSampleRate) throw FormatError(what + ": sample_rate=" + std::to_string(rate) + ", expected 16000");
      if (bits != 16) throw FormatError(what + ": bits_per_sample=" + std::to_string(bits) + ", expected 16");
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw FormatError(what + ": data chunk before fmt chunk");
      if (size % 2 != 0) throw FormatError(what + ": odd data chunk size");
      if (size > r.remaining()) throw FormatError(what + ": truncated file");
      const std::size_t n = size / 2;
      if (n == 0) throw FormatError(what + ": no samples");
      wave.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) wave.samples[i] = r.get<std::int16_t>() / 32768.0;
      return wave;
    } else {
      r.get_bytes(size + (size & 1));
    }
  }
}

void save_wav(const std::filesystem::path& path, const Waveform& wave) {
  if (wave.sample_rate != kSampleRate) throw Error("save_wav: only 16 kHz is supported");
  io::ByteWriter w;
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  w.put_bytes("RIFF");
  w.put<std::uint32_t>(36 + data_bytes);
  w.put_bytes("WAVE");
  w.put_bytes("fmt ");
  w.put<std::uint32_t>(16);
  w.put<std::uint16_t>(1);
  w.put<std::uint16_t>(1);
  w.put<std::uint32_t>(kSampleRate);
  w.put<std::uint32_t>(kSampleRate * 2);
  w.put<std::uint16_t>(2);
  w.put<std::uint16_t>(16);
  w.put_bytes("data");
  w.put<std::uint32_t>(data_bytes);
  for (double s : wave.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    w.put<std::int16_t>(static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0)));
  }
  io::write_file(path, w.bytes());
}

std::size_t num_frames(std::size_t num_samples) {
  if (num_samples < kFrameLength) {
    throw Error("input of " + std::to_string(num_samples) + " samples is shorter than one frame (400)");
  }
  return (num_samples - kFrameLength) / kFrameShift + 1;
}

const std::vector<double>& mel_filterbank() {
  static const std::vector<double> weights = [] {
    std::vector<double> w(kNumMelBins * kNumFftBins, 0.0);
    const double lo = hz_to_mel(kMelLowHz), hi = hz_to_mel(kMelHighHz);
    std::vector<double> pts(kNumMelBins + 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      pts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kNumMelBins + 1);
    }
    for (std::size_t m = 0; m < kNumMelBins; ++m) {
      const double left = pts[m], center = pts[m + 1], right = pts[m + 2];
      for (std::size_t k = 0; k < kNumFftBins; ++k) {
        const double mel = hz_to_mel(static_cast<double>(k) * kSampleRate / static_cast<double>(kFftSize));
        double v = 0.0;
        if (mel > left && mel <= center) v = (mel - left) / (center - left);
        else if (mel > center && mel < right) v = (right - mel) / (right - center);
        w[m * kNumFftBins + k] = v;
      }
    }
    return w;
  }();
  return weights;
}

FeatureMatrix log_mel(const Waveform& wave) {
  if (wave.sample_rate != kSampleRate) {
    throw Error("log_mel: sample_rate=" + std::to_string(wave.sample_rate) + ", expected 16000");
  }
  const std::size_t T = num_frames(wave.samples.size());
  const auto& window = hann_window();
  const fftw_plan plan = r2c_plan();

  std::vector<double> power(T * kNumFftBins);
  std::vector<double> frame(kFftSize, 0.0);
  std::vector<fftw_complex> spec(kNumFftBins);
  for (std::size_t t = 0; t < T; ++t) {
    const double* src = wave.samples.data() + t * kFrameShift;
    kernels::active().mul(src, window.data(), frame.data(), kFrameLength);
    fftw_execute_dft_r2c(plan, frame.data(), spec.data());
    double* row = power.data() + t * kNumFftBins;
    for (std::size_t k = 0; k < kNumFftBins; ++k) row[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
  }

  FeatureMatrix out;
  out.num_frames = T;
  out.values.assign(T * kNumMelBins, 0.0);
  kernels::active().gemm(T, kNumFftBins, kNumMelBins, power.data(), mel_filterbank_t().data(), out.values.data());
  for (double& v : out.values) v = std::log(std::max(v, kLogFloor));
  return out;
}

void CmvnAccumulator::add(const FeatureMatrix& features) {
  for (std::size_t t = 0; t < features.num_frames; ++t) {
    ++count_;
    const double n = static_cast<double>(count_);
    for (std::size_t d = 0; d < kNumMelBins; ++d) {
      const double x = features.at(t, d);
      const double delta = x - mean_[d];
      mean_[d] += delta / n;
      m2_[d] += delta * (x - mean_[d]);
    }
  }
}

CmvnStats CmvnAccumulator::finish() const {
  if (count_ == 0) throw Error("cmvn: no frames accumulated");
  CmvnStats s;
  s.mean = mean_;
  s.var.resize(kNumMelBins);
  for (std::size_t d = 0; d < kNumMelBins; ++d) s.var[d] = std::max(m2_[d] / static_cast<double>(count_), 1e-8);
  return s;
}

FeatureMatrix cmvn(const FeatureMatrix& features, const CmvnStats& stats) {
  if (stats.mean.size() != kNumMelBins || stats.var.size() != kNumMelBins) {
    throw ShapeError("cmvn: stats have dimension " + std::to_string(stats.mean.size()) + "/" +
                     std::to_string(stats.var.size()) + ", features have 80");
  }
  FeatureMatrix out = features;
  std::vector<double> inv_std(kNumMelBins);
  for (std::size_t d = 0; d < kNumMelBins; ++d) {
    if (!(stats.var[d] >= 1e-8)) throw Error("cmvn: variance below 1e-8 in dimension " + std::to_string(d));
    inv_std[d] = 1.0 / std::sqrt(stats.var[d]);
  }
  for (std::size_t t = 0; t < out.num_frames; ++t)
    for (std::size_t d = 0; d < kNumMelBins; ++d) out.at(t, d) = (out.at(t, d) - stats.mean[d]) * inv_std[d];
  out.normalized = true;
  return out;
}

void save_cmvn(const std::filesystem::path& path, const CmvnStats& stats) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "mean";
  for (double v : stats.mean) out << ' ' << v;
  out << "\nvar";
  for (double v : stats.var) out << ' ' << v;
  out << '\n';
}

CmvnStats load_cmvn(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open " + path.string());
  CmvnStats s;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::vector<double>* dst = key == "mean" ? &s.mean : key == "var" ? &s.var : nullptr;
    if (!dst) {
      if (key.empty()) continue;
      throw FormatError(path.string() + ": unexpected line '" + key + "'");
    }
    double v;
    while (ls >> v) dst->push_back(v);
  }
  if (s.mean.size() != kNumMelBins || s.var.size() != kNumMelBins) {
    throw FormatError(path.string() + ": expected 80 means and 80 variances");
  }
  return s;
}

FeatureMatrix spec_augment(const FeatureMatrix& features, const AugmentPolicy& policy, Rng& rng) {
  if (!policy.enabled) return features;
  policy.validate();
  FeatureMatrix out = features;
  const std::size_t T = out.num_frames;
  for (std::size_t m = 0; m < policy.freq_masks; ++m) {
    const std::size_t width = uniform_int(rng, 0, policy.freq_mask_max_width);
    const std::size_t start = uniform_int(rng, 0, kNumMelBins - width);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t d = start; d < start + width; ++d) out.at(t, d) = 0.0;
  }
  const auto max_t = static_cast<std::size_t>(policy.time_mask_max_fraction * static_cast<double>(T));
  for (std::size_t m = 0; m < policy.time_masks; ++m) {
    const std::size_t width = uniform_int(rng, 0, max_t);
    const std::size_t start = uniform_int(rng, 0, T - width);
    for (std::size_t t = start; t < start + width; ++t)
      for (std::size_t d = 0; d < kNumMelBins; ++d) out.at(t, d) = 0.0;
  }
  return out;
}

Waveform speed_perturb(const Waveform& wave, double factor) {
  static constexpr double kAllowed[] = {0.9, 1.0, 1.1};
  if (std::none_of(std::begin(kAllowed), std::end(kAllowed), [&](double a) { return std::abs(a - factor) < 1e-9; })) {
    throw Error("speed_perturb: factor " + std::to_string(factor) + " not in {0.9, 1.0, 1.1}");
  }
  if (factor == 1.0) return wave;
  const std::size_t n = wave.samples.size();
  const auto out_n = static_cast<std::size_t>(std::llround(static_cast<double>(n) / factor));
  Waveform out;
  out.id = wave.id;
  out.sample_rate = wave.sample_rate;
  out.samples.resize(out_n);
  for (std::size_t i = 0; i < out_n; ++i) {
    const double pos = static_cast<double>(i) * factor;
    const auto i0 = std::min(static_cast<std::size_t>(pos), n - 1);
    const std::size_t i1 = std::min(i0 + 1, n - 1);
    const double frac = pos - static_cast<double>(i0);
    out.samples[i] = wave.samples[i0] * (1.0 - frac) + wave.samples[i1] * frac;
  }
  return out;
}

Waveform apply_gain(const Waveform& wave, double db) {
  Waveform out = wave;
  const double g = std::pow(10.0, db / 20.0);
  for (double& s : out.samples) s = std::clamp(s * g, -1.0, 1.0);
  return out;
}

void write_feature_cache(const std::filesystem::path& path, const FeatureMatrix& features) {
  io::ByteWriter w;
  w.put_bytes("MEL1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(features.num_frames));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kNumMelBins));
  for (double v : features.values) w.put<float>(static_cast<float>(v));
  io::write_file(path, w.bytes());
}

FeatureMatrix read_feature_cache(const std::filesystem::path& path) {
  const std::vector<char> bytes = io::read_file(path);
  io::ByteReader r(bytes, path.string());
  if (r.get_bytes(4) != "MEL1") throw FormatError(path.string() + ": bad magic, expected MEL1");
  FeatureMatrix f;
  f.num_frames = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  if (dim != kNumMelBins) throw FormatError(path.string() + ": dim=" + std::to_string(dim) + ", expected 80");
  f.values.resize(f.num_frames * kNumMelBins);
  for (double& v : f.values) v = r.get<float>();
  return f;
}

std::pair<Waveform, std::string> synth_utterance(const SynthRecipe& recipe,
                                                 const std::vector<std::string>& words,
                                                 std::uint64_t seed, std::string id) {
  if (words.empty()) throw Error("synth_utterance: empty transcript");
  if (!(recipe.noise_snr_db >= 20.0)) throw Error("synth_utterance: noise SNR must be at least 20 dB");
  auto silence = [](double seconds) {
    return static_cast<std::size_t>(std::llround(seconds * kSampleRate));
  };
  Waveform wave;
  wave.id = std::move(id);
  wave.samples.assign(silence(recipe.edge_silence_s), 0.0);
  std::string transcript;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto it = recipe.words.find(words[w]);
    if (it == recipe.words.end()) throw Error("synth_utterance: unknown word '" + words[w] + "'");
    if (w > 0) {
      wave.samples.insert(wave.samples.end(), silence(recipe.gap_s), 0.0);
      transcript += ' ';
    }
    transcript += words[w];
    for (const ToneSegment& seg : it->second) {
      const std::size_t n = silence(seg.seconds);
      for (std::size_t i = 0; i < n; ++i) {
        wave.samples.push_back(recipe.amplitude *
                               std::sin(2.0 * std::numbers::pi * seg.frequency_hz * static_cast<double>(i) / kSampleRate));
      }
    }
  }
  wave.samples.insert(wave.samples.end(), silence(recipe.edge_silence_s), 0.0);

  if (std::isfinite(recipe.noise_snr_db)) {
    double power = 0.0;
    for (double s : wave.samples) power += s * s;
    power /= static_cast<double>(wave.samples.size());
    const double sigma = std::sqrt(power / std::pow(10.0, recipe.noise_snr_db / 10.0));
    Rng rng(derive_seed(seed, 0x6e6f697365));
    for (double& s : wave.samples) s = std::clamp(s + sigma * gaussian(rng), -1.0, 1.0);
  }
  return {std::move(wave), transcript};
}

}  // namespace asrlab::audio
