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
#include <string>
#include <vector>

#include "asrlab/audio.hpp"
#include "asrlab/datapipe.hpp"

namespace asrlab::data {

// Sixteen short Arabic words, each rendered as a distinct pair of tones.
const std::vector<std::string>& toy_lexicon();
audio::SynthRecipe toy_recipe(double noise_snr_db = std::numeric_limits<double>::infinity());

struct SynthCorpusConfig {
  std::uint64_t seed = 1;
  std::size_t verified = 10;
  std::size_t weak = 40;
  std::size_t dev = 10;
  std::size_t test = 16;
  std::size_t min_words = 2;
  std::size_t max_words = 4;
  double noise_snr_db = std::numeric_limits<double>::infinity();
  // Fractions of the weak split with planted problems.
  double weak_news_fraction = 0.1;
  double weak_garbled_fraction = 0.1;

  void validate() const;
};

struct SynthCorpus {
  std::vector<ManifestEntry> verified;
  std::vector<ManifestEntry> weak;
  std::vector<ManifestEntry> dev;
  std::vector<ManifestEntry> test;
};

// Writes wav/<id>.wav plus verified.jsonl, weak.jsonl, dev.jsonl and test.jsonl
// under `dir`. Dialect tags cycle through the eight table dialects.
SynthCorpus synth_corpus(const SynthCorpusConfig& config, const std::filesystem::path& dir);

// One utterance written to dir/wav/<id>.wav.
ManifestEntry synth_entry(const std::filesystem::path& dir, const std::string& id,
                          const std::vector<std::string>& words, std::uint64_t seed, const audio::SynthRecipe& recipe);

}  // namespace asrlab::data
