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


#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "asrlab/audio.hpp"

namespace asrlab::audio {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "asrlab_audio_test";
  fs::create_directories(dir);
  return dir / name;
}

void put16(std::string& s, std::uint16_t v) { s.append(reinterpret_cast<const char*>(&v), 2); }
void put32(std::string& s, std::uint32_t v) { s.append(reinterpret_cast<const char*>(&v), 4); }

// Hand-rolled RIFF writer so malformed headers can be produced.
void write_raw_wav(const fs::path& path, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                   const std::vector<std::int16_t>& pcm, std::size_t truncate_by = 0) {
  std::string fmt;
  put16(fmt, 1);
  put16(fmt, channels);
  put32(fmt, rate);
  put32(fmt, rate * channels * bits / 8);
  put16(fmt, static_cast<std::uint16_t>(channels * bits / 8));
  put16(fmt, bits);
  std::string data(reinterpret_cast<const char*>(pcm.data()), pcm.size() * 2);
  std::string body = "WAVE";
  body += "fmt ";
  put32(body, static_cast<std::uint32_t>(fmt.size()));
  body += fmt;
  body += "data";
  put32(body, static_cast<std::uint32_t>(data.size()));
  body += data;
  std::string file = "RIFF";
  put32(file, static_cast<std::uint32_t>(body.size()));
  file += body;
  file = file.substr(0, file.size() - truncate_by);
  std::ofstream(path, std::ios::binary).write(file.data(), static_cast<std::streamsize>(file.size()));
}

std::string error_of(const fs::path& p) {
  try {
    load_wav(p);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

Waveform tone(double hz, std::size_t n, double amp = 0.5) {
  Waveform w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(amp * std::sin(2.0 * M_PI * hz * i / kSampleRate));
  return w;
}

Waveform noise(std::size_t n, std::uint64_t seed, double amp = 0.3) {
  Rng rng(seed);
  Waveform w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(amp * (2.0 * uniform01(rng) - 1.0));
  return w;
}

FeatureMatrix random_features(std::size_t T, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix f;
  f.num_frames = T;
  for (std::size_t i = 0; i < T * kNumMelBins; ++i) f.values.push_back(0.5 + uniform01(rng));
  return f;
}

TEST(Wav, SilenceLoadsAsZeros) {
  const auto p = temp_path("silence.wav");
  write_raw_wav(p, 1, 16000, 16, std::vector<std::int16_t>(16000, 0));
  const Waveform w = load_wav(p);
  EXPECT_EQ(w.samples.size(), 16000u);
  for (double s : w.samples) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(w.id, "silence");
  EXPECT_EQ(w.sample_rate, 16000);
}

TEST(Wav, Pcm16ScaledBy32768) {
  const auto p = temp_path("half.wav");
  write_raw_wav(p, 1, 16000, 16, {16384, -32768, 0});
  const Waveform w = load_wav(p);
  EXPECT_EQ(w.samples[0], 16384.0 / 32768.0);
  EXPECT_EQ(w.samples[0], 0.5);
  EXPECT_EQ(w.samples[1], -1.0);
}

TEST(Wav, ViolatedFieldIsNamed) {
  const auto stereo = temp_path("stereo.wav");
  write_raw_wav(stereo, 2, 16000, 16, std::vector<std::int16_t>(64, 0));
  EXPECT_NE(error_of(stereo).find("channels=2, expected 1"), std::string::npos);

  const auto rate = temp_path("rate.wav");
  write_raw_wav(rate, 1, 8000, 16, std::vector<std::int16_t>(64, 0));
  EXPECT_NE(error_of(rate).find("sample_rate=8000"), std::string::npos);

  const auto trunc = temp_path("trunc.wav");
  write_raw_wav(trunc, 1, 16000, 16, std::vector<std::int16_t>(64, 0), 10);
  EXPECT_NE(error_of(trunc).find("truncated"), std::string::npos);

  EXPECT_THROW(load_wav(temp_path("does_not_exist.wav")), MissingInputError);
}

TEST(Wav, SaveLoadRoundTripWithinQuantization) {
  const Waveform w = noise(1234, 7, 0.9);
  const auto p = temp_path("rt.wav");
  save_wav(p, w);
  const Waveform r = load_wav(p);
  ASSERT_EQ(r.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) EXPECT_NEAR(r.samples[i], w.samples[i], 1.0 / 32768.0);
}

TEST(Frames, OneSecondGives98) {
  EXPECT_EQ(num_frames(16000), 98u);
  EXPECT_EQ(log_mel(noise(16000, 1)).num_frames, 98u);
  EXPECT_THROW(num_frames(399), Error);
}

TEST(Frames, FormulaHoldsAcrossSweep) {
  for (std::size_t n = 400; n <= 20000; ++n) ASSERT_EQ(num_frames(n), (n - 400) / 160 + 1) << n;
  for (std::size_t n : {400u, 559u, 560u, 4321u}) {
    const FeatureMatrix f = log_mel(noise(n, n));
    EXPECT_EQ(f.num_frames, (n - 400) / 160 + 1);
    EXPECT_EQ(f.values.size(), f.num_frames * 80);
  }
}

TEST(LogMel, ZeroInputHitsFloorEverywhere) {
  Waveform w;
  w.samples.assign(4000, 0.0);
  const FeatureMatrix f = log_mel(w);
  EXPECT_FALSE(f.normalized);
  for (double v : f.values) EXPECT_EQ(v, std::log(1e-10));
}

TEST(LogMel, PureToneArgmaxIsStable) {
  const FeatureMatrix f = log_mel(tone(1000.0, 16000));
  std::set<std::size_t> argmaxes;
  for (std::size_t t = 0; t < f.num_frames; ++t) {
    std::size_t best = 0;
    for (std::size_t d = 1; d < 80; ++d)
      if (f.at(t, d) > f.at(t, best)) best = d;
    argmaxes.insert(best);
  }
  EXPECT_EQ(argmaxes.size(), 1u);
  // HTK mel of 1000 Hz sits inside the filter whose centre is nearest it.
  const double mel = 2595.0 * std::log10(1.0 + 1000.0 / 700.0);
  const double lo = 2595.0 * std::log10(1.0 + 20.0 / 700.0), hi = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  const double expected = (mel - lo) / ((hi - lo) / 81.0) - 1.0;
  EXPECT_LE(std::abs(static_cast<double>(*argmaxes.begin()) - expected), 1.0);
}

TEST(LogMel, ShiftByHopShiftsFrames) {
  const Waveform w = noise(8000, 3);
  for (std::size_t k : {1u, 3u, 7u}) {
    Waveform shifted;
    shifted.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(160 * k), w.samples.end());
    const FeatureMatrix a = log_mel(w), b = log_mel(shifted);
    ASSERT_EQ(b.num_frames + k, a.num_frames);
    for (std::size_t t = 0; t < b.num_frames; ++t)
      for (std::size_t d = 0; d < 80; ++d) ASSERT_NEAR(b.at(t, d), a.at(t + k, d), 1e-6);
  }
}

TEST(LogMel, DoublingAmplitudeAddsLnFour) {
  const Waveform w = noise(6000, 4, 0.4);
  Waveform w2 = w;
  for (double& s : w2.samples) s *= 2.0;
  const FeatureMatrix a = log_mel(w), b = log_mel(w2);
  const double floor = std::log(1e-10);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] <= floor) continue;
    EXPECT_NEAR(b.values[i] - a.values[i], std::log(4.0), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

TEST(LogMel, FilterbankRowsArePositiveTriangles) {
  const auto& fb = mel_filterbank();
  ASSERT_EQ(fb.size(), 80u * 257u);
  for (std::size_t m = 0; m < 80; ++m) {
    double s = 0.0;
    for (std::size_t k = 0; k < 257; ++k) {
      EXPECT_GE(fb[m * 257 + k], 0.0);
      EXPECT_LE(fb[m * 257 + k], 1.0);
      s += fb[m * 257 + k];
    }
    EXPECT_GT(s, 0.0) << "empty mel filter " << m;
  }
}

TEST(Cmvn, UnitStatsAreIdentity) {
  const FeatureMatrix f = random_features(20, 1);
  const CmvnStats stats{std::vector<double>(80, 0.0), std::vector<double>(80, 1.0)};
  const FeatureMatrix g = cmvn(f, stats);
  EXPECT_TRUE(g.normalized);
  EXPECT_EQ(g.values, f.values);
}

TEST(Cmvn, ConstantCorpusNormalizesToZero) {
  FeatureMatrix f;
  f.num_frames = 10;
  f.values.assign(800, 3.25);
  CmvnAccumulator acc;
  acc.add(f);
  for (double v : cmvn(f, acc.finish()).values) EXPECT_EQ(v, 0.0);
}

TEST(Cmvn, RecomputedStatsAreStandard) {
  std::vector<FeatureMatrix> corpus;
  CmvnAccumulator acc;
  for (std::uint64_t s = 0; s < 5; ++s) {
    corpus.push_back(log_mel(noise(3000 + 500 * s, s)));
    acc.add(corpus.back());
  }
  const CmvnStats stats = acc.finish();
  CmvnAccumulator again;
  for (const auto& f : corpus) again.add(cmvn(f, stats));
  const CmvnStats check = again.finish();
  for (std::size_t d = 0; d < 80; ++d) {
    EXPECT_NEAR(check.mean[d], 0.0, 1e-10);
    EXPECT_NEAR(check.var[d], 1.0, 1e-10);
  }
}

TEST(Cmvn, DimensionMismatchRejected) {
  const CmvnStats bad{std::vector<double>(40, 0.0), std::vector<double>(40, 1.0)};
  EXPECT_THROW(cmvn(random_features(2, 1), bad), ShapeError);
}

TEST(Cmvn, FileRoundTrip) {
  CmvnAccumulator acc;
  acc.add(random_features(30, 2));
  const CmvnStats s = acc.finish();
  const auto p = temp_path("cmvn.txt");
  save_cmvn(p, s);
  const CmvnStats r = load_cmvn(p);
  EXPECT_EQ(r.mean, s.mean);
  EXPECT_EQ(r.var, s.var);
}

TEST(SpecAugment, DisabledIsIdentity) {
  const FeatureMatrix f = random_features(98, 1);
  Rng rng(1);
  EXPECT_EQ(spec_augment(f, AugmentPolicy::disabled(), rng).values, f.values);
}

TEST(SpecAugment, FrequencyMasksBounded) {
  AugmentPolicy p;
  p.time_masks = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const FeatureMatrix f = random_features(98, seed);
    Rng rng(seed);
    const FeatureMatrix g = spec_augment(f, p, rng);
    std::size_t zeroed = 0;
    for (std::size_t d = 0; d < 80; ++d) {
      bool all_zero = true;
      for (std::size_t t = 0; t < 98; ++t) all_zero = all_zero && g.at(t, d) == 0.0;
      zeroed += all_zero;
    }
    EXPECT_LE(zeroed, 16u);
  }
}

TEST(SpecAugment, DeterministicAndOnlyMasksCells) {
  const AugmentPolicy p;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const FeatureMatrix f = random_features(98, seed);
    Rng r1(seed), r2(seed);
    const FeatureMatrix a = spec_augment(f, p, r1), b = spec_augment(f, p, r2);
    EXPECT_EQ(a.values, b.values);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      if (a.values[i] != 0.0) EXPECT_EQ(a.values[i], f.values[i]);
    }
  }
}

TEST(SpecAugment, PolicyValidation) {
  AugmentPolicy p;
  p.freq_mask_max_width = 81;
  EXPECT_THROW(p.validate(), ConfigError);
  p = AugmentPolicy{};
  p.speed_factors = {1.3};
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(SpeedPerturb, Lengths) {
  const Waveform w = noise(16000, 5);
  EXPECT_EQ(speed_perturb(w, 1.0).samples, w.samples);
  EXPECT_EQ(speed_perturb(w, 0.9).samples.size(), 17778u);
  EXPECT_EQ(speed_perturb(w, 1.1).samples.size(), 14545u);
  EXPECT_THROW(speed_perturb(w, 1.2), Error);
}

TEST(Gain, ScalesAndClips) {
  Waveform w;
  w.samples = {0.1, -0.9};
  const Waveform g = apply_gain(w, 6.0);
  EXPECT_NEAR(g.samples[0], 0.1 * std::pow(10.0, 0.3), 1e-15);
  EXPECT_EQ(g.samples[1], -1.0);
}

TEST(FeatureCache, RoundTripAtFloatPrecision) {
  const FeatureMatrix f = log_mel(noise(4000, 9));
  const auto p = temp_path("feat.mel");
  write_feature_cache(p, f);
  const FeatureMatrix r = read_feature_cache(p);
  ASSERT_EQ(r.num_frames, f.num_frames);
  for (std::size_t i = 0; i < f.values.size(); ++i) EXPECT_EQ(r.values[i], static_cast<double>(static_cast<float>(f.values[i])));
}

TEST(Synth, ToneSegmentLength) {
  SynthRecipe recipe;
  recipe.words["ba"] = {{500.0, 0.2}};
  const auto [wave, text] = synth_utterance(recipe, {"ba"}, 1);
  EXPECT_EQ(text, "ba");
  const std::size_t edge = 800;
  ASSERT_EQ(wave.samples.size(), edge + 3200 + edge);
  for (std::size_t i = 0; i < edge; ++i) EXPECT_EQ(wave.samples[i], 0.0);
  EXPECT_NEAR(wave.samples[edge + 8], 0.5 * std::sin(2.0 * M_PI * 500.0 * 8 / 16000.0), 1e-15);
}

TEST(Synth, ContractAndDeterminism) {
  SynthRecipe recipe;
  recipe.words["ba"] = {{500.0, 0.2}};
  recipe.words["di"] = {{900.0, 0.1}, {1300.0, 0.1}};
  recipe.noise_snr_db = 25.0;
  EXPECT_THROW(synth_utterance(recipe, {}, 1), Error);
  EXPECT_THROW(synth_utterance(recipe, {"zz"}, 1), Error);
  const auto a = synth_utterance(recipe, {"ba", "di"}, 42);
  const auto b = synth_utterance(recipe, {"ba", "di"}, 42);
  EXPECT_EQ(a.first.samples, b.first.samples);
  EXPECT_EQ(a.second, "ba di");
  for (double s : a.first.samples) EXPECT_LE(std::abs(s), 1.0);
  recipe.noise_snr_db = 10.0;
  EXPECT_THROW(synth_utterance(recipe, {"ba"}, 1), Error);
}

}  // namespace
}  // namespace asrlab::audio
