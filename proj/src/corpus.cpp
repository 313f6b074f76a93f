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


#include "asrlab/corpus.hpp"

#include <algorithm>
#include <cmath>

#include "asrlab/eval.hpp"

namespace asrlab::data {

namespace fs = std::filesystem;

const std::vector<std::string>& toy_lexicon() {
  static const std::vector<std::string> words = {"كتاب", "مدرسة", "شمس", "قمر", "بحر", "جبل", "طريق", "سوق",
                                                 "بيت",  "ولد",   "بنت", "قلم", "باب", "نور", "ماء",  "خبز"};
  return words;
}

audio::SynthRecipe toy_recipe(double noise_snr_db) {
  audio::SynthRecipe r;
  const auto& words = toy_lexicon();
  for (std::size_t i = 0; i < words.size(); ++i) {
    const double low = 300.0 + 110.0 * static_cast<double>(i);
    const double high = 4200.0 - 170.0 * static_cast<double>((i * 7) % words.size());
    r.words[words[i]] = {{low, 0.15}, {high, 0.15}};
  }
  r.edge_silence_s = 0.25;
  r.gap_s = 0.05;
  r.noise_snr_db = noise_snr_db;
  return r;
}

void SynthCorpusConfig::validate() const {
  if (verified == 0) throw ConfigError("synth-corpus: need at least one verified utterance");
  if (min_words < 1 || min_words > max_words) throw ConfigError("synth-corpus: need 1 <= min_words <= max_words");
  if (!(noise_snr_db >= 20.0)) throw ConfigError("synth-corpus: noise_snr_db must be at least 20");
  if (!(weak_news_fraction >= 0.0 && weak_garbled_fraction >= 0.0 && weak_news_fraction + weak_garbled_fraction <= 1.0)) {
    throw ConfigError("synth-corpus: weak fractions must be non-negative and sum to at most 1");
  }
}

ManifestEntry synth_entry(const fs::path& dir, const std::string& id, const std::vector<std::string>& words,
                          std::uint64_t seed, const audio::SynthRecipe& recipe) {
  auto [wave, transcript] = audio::synth_utterance(recipe, words, seed, id);
  const auto rel = fs::path("wav") / (id + ".wav");
  audio::save_wav(dir / rel, wave);
  ManifestEntry e;
  e.id = id;
  e.audio = rel.generic_string();
  e.text = transcript;
  e.duration_s = static_cast<double>(wave.samples.size()) / audio::kSampleRate;
  e.base_dir = dir;
  e.source = "podcast";
  return e;
}

SynthCorpus synth_corpus(const SynthCorpusConfig& config, const fs::path& dir) {
  config.validate();
  fs::create_directories(dir / "wav");
  const auto recipe = toy_recipe(config.noise_snr_db);
  const auto& lexicon = toy_lexicon();
  Rng rng(derive_seed(config.seed, 0x636f72707573));
  auto pick_words = [&] {
    const std::size_t span = config.max_words - config.min_words + 1;
    const std::size_t n = config.min_words + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(span));
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) words.push_back(lexicon[static_cast<std::size_t>(uniform01(rng) * lexicon.size())]);
    return words;
  };
  std::size_t counter = 0;
  auto make = [&](const std::string& prefix, std::size_t i, LabelKind kind) {
    const std::string id = prefix + "_" + std::string(3 - std::min<std::size_t>(3, std::to_string(i).size()), '0') +
                           std::to_string(i);
    ManifestEntry e = synth_entry(dir, id, pick_words(), derive_seed(config.seed, ++counter), recipe);
    e.label_kind = kind;
    e.dialect = std::string(eval::kDialectOrder[i % eval::kDialectOrder.size()]);
    return e;
  };

  SynthCorpus c;
  for (std::size_t i = 0; i < config.verified; ++i) c.verified.push_back(make("ver", i, LabelKind::kVerified));
  for (std::size_t i = 0; i < config.dev; ++i) c.dev.push_back(make("dev", i, LabelKind::kVerified));
  for (std::size_t i = 0; i < config.test; ++i) c.test.push_back(make("tst", i, LabelKind::kVerified));
  const auto news = static_cast<std::size_t>(std::llround(config.weak_news_fraction * static_cast<double>(config.weak)));
  const auto garbled =
      static_cast<std::size_t>(std::llround(config.weak_garbled_fraction * static_cast<double>(config.weak)));
  for (std::size_t i = 0; i < config.weak; ++i) {
    ManifestEntry e = make("weak", i, LabelKind::kWeak);
    if (i < news) {
      e.source = "news";
    } else if (i < news + garbled) {
      // A wrong automatic transcript: every word replaced.
      std::string text;
      for (const auto& w : text::split_words(e.text)) {
        const auto pos = std::find(lexicon.begin(), lexicon.end(), w) - lexicon.begin();
        text += (text.empty() ? "" : " ") + lexicon[(static_cast<std::size_t>(pos) + 5) % lexicon.size()];
      }
      e.text = text + " " + lexicon[i % lexicon.size()];
    } else {
      e.source = i % 2 ? "tv" : "podcast";
    }
    c.weak.push_back(std::move(e));
  }
  // Planted problems are spread through the split rather than grouped at the front.
  Rng order(derive_seed(config.seed, 0x77656b));
  shuffle(c.weak, order);

  write_manifest(dir / "verified.jsonl", c.verified);
  write_manifest(dir / "weak.jsonl", c.weak);
  write_manifest(dir / "dev.jsonl", c.dev);
  write_manifest(dir / "test.jsonl", c.test);
  return c;
}

}  // namespace asrlab::data
