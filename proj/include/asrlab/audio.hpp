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
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asrlab/common.hpp"

namespace asrlab::audio {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kFrameLength = 400;  // 25 ms
inline constexpr std::size_t kFrameShift = 160;   // 10 ms
inline constexpr std::size_t kFftSize = 512;
inline constexpr std::size_t kNumMelBins = 80;
inline constexpr double kMelLowHz = 20.0;
inline constexpr double kMelHighHz = 8000.0;
inline constexpr double kLogFloor = 1e-10;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
  std::string id;
};

/// T x 80 log-mel energies, row-major.
struct FeatureMatrix {
  std::size_t num_frames = 0;
  std::vector<double> values;
  bool normalized = false;

  static constexpr std::size_t kDim = kNumMelBins;
  double at(std::size_t t, std::size_t d) const { return values[t * kDim + d]; }
  double& at(std::size_t t, std::size_t d) { return values[t * kDim + d]; }
};

struct CmvnStats {
  std::vector<double> mean;
  std::vector<double> var;
};

struct AugmentPolicy {
  bool enabled = true;
  std::vector<double> speed_factors{0.9, 1.0, 1.1};
  std::size_t freq_masks = 2;
  std::size_t freq_mask_max_width = 8;
  std::size_t time_masks = 2;
  double time_mask_max_fraction = 0.05;
  double gain_db_range = 3.0;  // gain drawn uniformly from [-range, +range]

  void validate() const;
  static AugmentPolicy disabled();
};

// Reads a RIFF/WAVE PCM16 mono 16 kHz file; the id is the filename stem.
Waveform load_wav(const std::filesystem::path& path);
void save_wav(const std::filesystem::path& path, const Waveform& wave);

// floor((N - 400) / 160) + 1; throws for N < 400.
std::size_t num_frames(std::size_t num_samples);

FeatureMatrix log_mel(const Waveform& wave);

// 80 x 257 triangular weights over the one-sided power spectrum (row per mel bin).
const std::vector<double>& mel_filterbank();

/// Streaming per-dimension mean/variance (Welford).
class CmvnAccumulator {
 public:
  void add(const FeatureMatrix& features);
  std::size_t count() const { return count_; }
  // Variances are floored at 1e-8.
  CmvnStats finish() const;

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_ = std::vector<double>(kNumMelBins, 0.0);
  std::vector<double> m2_ = std::vector<double>(kNumMelBins, 0.0);
};

FeatureMatrix cmvn(const FeatureMatrix& features, const CmvnStats& stats);
void save_cmvn(const std::filesystem::path& path, const CmvnStats& stats);
CmvnStats load_cmvn(const std::filesystem::path& path);

// Frequency and time masks set to 0; identity when the policy is disabled.
FeatureMatrix spec_augment(const FeatureMatrix& features, const AugmentPolicy& policy, Rng& rng);

// Linear-interpolation resampling to round(N / factor) samples.
// factor must be one of 0.9, 1.0, 1.1.
Waveform speed_perturb(const Waveform& wave, double factor);

// Scales by 10^(db/20) and clips to [-1, 1].
Waveform apply_gain(const Waveform& wave, double db);

// Feature cache: "MEL1", u32 T, u32 dim=80, then T*80 little-endian float32.
void write_feature_cache(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix read_feature_cache(const std::filesystem::path& path);

struct ToneSegment {
  double frequency_hz = 0.0;
  double seconds = 0.0;
};

/// Maps each vocabulary word to a tone pattern so a small model can learn the
/// word/sound correspondence.
struct SynthRecipe {
  std::map<std::string, std::vector<ToneSegment>> words;
  double amplitude = 0.5;
  double edge_silence_s = 0.05;  // before the first and after the last word
  double gap_s = 0.05;           // between words
  // Additive white noise at this SNR (>= 20 dB); infinity disables noise.
  double noise_snr_db = std::numeric_limits<double>::infinity();
};

// Renders the words in order; the transcript is the words joined by spaces.
std::pair<Waveform, std::string> synth_utterance(const SynthRecipe& recipe,
                                                 const std::vector<std::string>& words,
                                                 std::uint64_t seed, std::string id = "synth");

}  // namespace asrlab::audio
