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


#include "asrlab/config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace asrlab {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      {"seed", "1"},
      {"model.preset", "tiny"},
      {"model.num_layers", ""},
      {"model.d_model", ""},
      {"model.num_heads", ""},
      {"model.conv_kernel", ""},
      {"model.ff_expansion", ""},
      {"model.dropout", ""},
      {"pretrain.batch_size", "8"},
      {"pretrain.accumulation", "1"},
      {"pretrain.global_batch", "0"},
      {"pretrain.max_steps", "1000"},
      {"pretrain.eval_interval", "100"},
      {"pretrain.checkpoint_interval", "0"},
      {"pretrain.patience", "0"},
      {"pretrain.target_dev_wer", "-1"},
      {"pretrain.peak_lr", "2e-3"},
      {"pretrain.warmup_steps", "10000"},
      {"finetune.batch_size", "8"},
      {"finetune.accumulation", "1"},
      {"finetune.global_batch", "0"},
      {"finetune.max_steps", "500"},
      {"finetune.eval_interval", "100"},
      {"finetune.checkpoint_interval", "0"},
      {"finetune.patience", "0"},
      {"finetune.target_dev_wer", "-1"},
      {"finetune.warmup_steps", "1000"},
      {"finetune.weak_ratio", "1.0"},
      {"train.bucket_width_s", "2.0"},
      {"adam.beta1", "0.9"},
      {"adam.beta2", "0.98"},
      {"adam.eps", "1e-9"},
      {"adam.weight_decay", "1e-2"},
      {"augment.enabled", "true"},
      {"augment.speed_factors", "0.9,1.0,1.1"},
      {"augment.freq_masks", "2"},
      {"augment.freq_mask_max_width", "8"},
      {"augment.time_masks", "2"},
      {"augment.time_mask_max_fraction", "0.05"},
      {"augment.gain_db_range", "3.0"},
      {"filter.excluded_sources", "news"},
      {"filter.min_duration_s", "1.0"},
      {"filter.max_duration_s", "30.0"},
      {"filter.max_hypothesis_wer", "0.25"},
      {"normalization", "default"},
      {"decode.beam_width", "0"},
      {"decode.batch_size", "8"},
      {"synth.verified", "10"},
      {"synth.weak", "40"},
      {"synth.dev", "10"},
      {"synth.test", "16"},
      {"synth.min_words", "2"},
      {"synth.max_words", "4"},
      {"synth.noise_snr_db", "inf"},
      {"synth.weak_news_fraction", "0.1"},
      {"synth.weak_garbled_fraction", "0.1"},
  };
  return d;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Config::Config() : values_(defaults()) {}

void Config::set(const std::string& key, std::string value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = std::move(value);
}

void Config::apply(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open config " + path.string());
  std::string section;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(path.string() + ":" + std::to_string(n) + ": malformed section");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key=value");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!section.empty()) key = section + "." + key;
    try {
      set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const auto& v = get(key);
  if (v == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const auto& v = get(key);
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return x;
}

std::size_t Config::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

bool Config::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string Config::render() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

model::ModelConfig Config::model() const {
  const auto& preset = get("model.preset");
  model::ModelConfig m;
  if (preset == "tiny") m = model::ModelConfig::tiny();
  else if (preset == "large") m = model::ModelConfig::large();
  else throw ConfigError("model.preset: expected tiny or large, got '" + preset + "'");
  m.vocab_out = kNumOutputs;
  auto override_size = [&](const char* key, std::size_t& field) {
    if (!get(key).empty()) field = get_size(key);
  };
  override_size("model.num_layers", m.num_layers);
  override_size("model.d_model", m.d_model);
  override_size("model.num_heads", m.num_heads);
  override_size("model.conv_kernel", m.conv_kernel);
  override_size("model.ff_expansion", m.ff_expansion);
  if (!get("model.dropout").empty()) m.dropout = get_double("model.dropout");
  m.validate();
  return m;
}

audio::AugmentPolicy Config::augment() const {
  audio::AugmentPolicy p;
  p.enabled = get_bool("augment.enabled");
  p.speed_factors.clear();
  for (const auto& f : get_list("augment.speed_factors")) {
    try {
      p.speed_factors.push_back(std::stod(f));
    } catch (const std::logic_error&) {
      throw ConfigError("augment.speed_factors: bad value '" + f + "'");
    }
  }
  p.freq_masks = get_size("augment.freq_masks");
  p.freq_mask_max_width = get_size("augment.freq_mask_max_width");
  p.time_masks = get_size("augment.time_masks");
  p.time_mask_max_fraction = get_double("augment.time_mask_max_fraction");
  p.gain_db_range = get_double("augment.gain_db_range");
  try {
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return p;
}

train::TrainRunConfig Config::train_run(train::Stage stage) const {
  const std::string s = stage == train::Stage::kPretrain ? "pretrain." : "finetune.";
  train::TrainRunConfig run;
  run.model = model();
  run.batch_size = get_size(s + "batch_size");
  run.accumulation = get_size(s + "accumulation");
  run.global_batch = get_size(s + "global_batch");
  run.max_steps = get_size(s + "max_steps");
  run.eval_interval = get_size(s + "eval_interval");
  run.checkpoint_interval = get_size(s + "checkpoint_interval");
  run.patience = get_size(s + "patience");
  run.target_dev_wer = get_double(s + "target_dev_wer");
  run.schedule.stage = stage;
  run.schedule.peak_lr = get_double("pretrain.peak_lr");
  run.schedule.warmup_steps = get_size(s + "warmup_steps");
  run.adam = {get_double("adam.beta1"), get_double("adam.beta2"), get_double("adam.eps"),
              get_double("adam.weight_decay")};
  run.augment = augment();
  run.bucket_width_s = get_double("train.bucket_width_s");
  run.seed = get_u64("seed");
  run.validate();
  return run;
}

data::FilterPolicy Config::filter_policy(std::string_view name) const {
  auto p = data::FilterPolicy::by_name(name);
  if (name == "default") {
    const auto sources = get_list("filter.excluded_sources");
    p.excluded_sources = {sources.begin(), sources.end()};
    p.min_duration_s = get_double("filter.min_duration_s");
    p.max_duration_s = get_double("filter.max_duration_s");
    p.max_hypothesis_wer = get_double("filter.max_hypothesis_wer");
  }
  p.validate();
  return p;
}

data::SynthCorpusConfig Config::synth() const {
  data::SynthCorpusConfig c;
  c.seed = get_u64("seed");
  c.verified = get_size("synth.verified");
  c.weak = get_size("synth.weak");
  c.dev = get_size("synth.dev");
  c.test = get_size("synth.test");
  c.min_words = get_size("synth.min_words");
  c.max_words = get_size("synth.max_words");
  c.noise_snr_db = get_double("synth.noise_snr_db");
  c.weak_news_fraction = get_double("synth.weak_news_fraction");
  c.weak_garbled_fraction = get_double("synth.weak_garbled_fraction");
  c.validate();
  return c;
}

text::NormalizationProfile Config::normalization() const { return text::NormalizationProfile::by_name(get("normalization")); }

}  // namespace asrlab
