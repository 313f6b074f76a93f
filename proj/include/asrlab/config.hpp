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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "asrlab/audio.hpp"
#include "asrlab/corpus.hpp"
#include "asrlab/datapipe.hpp"
#include "asrlab/text.hpp"
#include "asrlab/training.hpp"

namespace asrlab {

/// Flat key=value settings with a fixed set of known keys. Files may group keys
/// under [section] headers, which prefix "section." to the keys that follow.
class Config {
 public:
  Config();  // every key at its default

  // Throws MissingInputError when the file is absent, ConfigError on unknown
  // keys or malformed lines.
  void load_file(const std::filesystem::path& path);
  // "key=value"
  void apply(std::string_view assignment);
  void set(const std::string& key, std::string value);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;  // comma separated

  // Every key, sorted, one "key=value" per line.
  std::string render() const;

  model::ModelConfig model() const;
  train::TrainRunConfig train_run(train::Stage stage) const;
  audio::AugmentPolicy augment() const;
  data::FilterPolicy filter_policy(std::string_view name) const;
  data::SynthCorpusConfig synth() const;
  text::NormalizationProfile normalization() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace asrlab
