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


#include "asrlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "asrlab/eval.hpp"
#include "asrlab/ops.hpp"
#include "binary_io.hpp"

namespace asrlab::train {

namespace fs = std::filesystem;

std::string_view to_string(Stage stage) { return stage == Stage::kPretrain ? "pretrain" : "finetune"; }

Stage stage_from_string(std::string_view name) {
  if (name == "pretrain") return Stage::kPretrain;
  if (name == "finetune") return Stage::kFinetune;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

void ScheduleConfig::validate() const {
  if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) throw ConfigError("schedule: peak_lr must be positive");
  if (warmup_steps < 1) throw ConfigError("schedule: warmup_steps must be at least 1");
}

double noam_lr(std::size_t step, const ScheduleConfig& config) {
  if (step == 0) throw Error("noam_lr: steps count from 1");
  config.validate();
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(config.warmup_steps);
  return config.peak_lr * std::min(s / w, std::sqrt(w / s));
}

void AdamWConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adamw: betas must be in [0,1)");
  if (!(eps > 0.0)) throw ConfigError("adamw: eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("adamw: weight_decay must be non-negative");
}

OptimizerState OptimizerState::for_params(const model::ParameterSet& params, const AdamWConfig& config) {
  config.validate();
  OptimizerState s;
  s.config = config;
  for (const auto& [name, p] : params) {
    s.first_moment[name].assign(p.numel(), 0.0);
    s.second_moment[name].assign(p.numel(), 0.0);
  }
  return s;
}

GradientSet gradients_of(const model::ParameterSet& params) {
  GradientSet out;
  for (const auto& [name, p] : params) {
    if (p.has_grad()) out[name].assign(p.grad().begin(), p.grad().end());
    else out[name].assign(p.numel(), 0.0);
  }
  return out;
}

void zero_grads(model::ParameterSet& params) {
  for (auto& [name, p] : params) p.zero_grad();
}

void adamw_step(model::ParameterSet& params, const GradientSet& grads, OptimizerState& state, double lr) {
  for (const auto& [name, p] : params) {
    const auto it = grads.find(name);
    if (it == grads.end()) throw ShapeError("adamw: no gradient for " + name);
    if (it->second.size() != p.numel()) throw ShapeError("adamw: gradient size mismatch for " + name);
    if (!state.first_moment.contains(name) || state.first_moment.at(name).size() != p.numel() ||
        state.second_moment.at(name).size() != p.numel()) {
      throw ShapeError("adamw: optimizer state does not match parameter " + name);
    }
    for (double g : it->second) {
      if (!std::isfinite(g)) throw Error("adamw: non-finite gradient in " + name + ", step rejected");
    }
  }
  const auto& c = state.config;
  const std::size_t t = ++state.step_count;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (auto& [name, p] : params) {
    const auto& g = grads.at(name);
    auto& m = state.first_moment.at(name);
    auto& v = state.second_moment.at(name);
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= lr * c.weight_decay * w[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.eps);
    }
  }
}

// ---- checkpoint file ----

namespace {

constexpr char kMagic[4] = {'C', 'F', 'C', 'K'};
constexpr std::uint8_t kDtypeF64 = 1;

std::string exact(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string config_block(const Checkpoint& c) {
  std::ostringstream os;
  const auto& m = c.model;
  os << "model.num_layers=" << m.num_layers << '\n'
     << "model.d_model=" << m.d_model << '\n'
     << "model.num_heads=" << m.num_heads << '\n'
     << "model.conv_kernel=" << m.conv_kernel << '\n'
     << "model.ff_expansion=" << m.ff_expansion << '\n'
     << "model.dropout=" << exact(m.dropout) << '\n'
     << "model.vocab_out=" << m.vocab_out << '\n'
     << "model.subsample_factor=" << m.subsample_factor << '\n'
     << "model.input_dim=" << m.input_dim << '\n'
     << "stage=" << to_string(c.schedule.stage) << '\n'
     << "schedule.peak_lr=" << exact(c.schedule.peak_lr) << '\n'
     << "schedule.warmup_steps=" << c.schedule.warmup_steps << '\n'
     << "adam.beta1=" << exact(c.optimizer.config.beta1) << '\n'
     << "adam.beta2=" << exact(c.optimizer.config.beta2) << '\n'
     << "adam.eps=" << exact(c.optimizer.config.eps) << '\n'
     << "adam.weight_decay=" << exact(c.optimizer.config.weight_decay) << '\n'
     << "adam.step_count=" << c.optimizer.step_count << '\n'
     << "step=" << c.step << '\n'
     << "vocab_hash=" << c.vocab_hash << '\n'
     << "seed=" << c.seed << '\n'
     << "best_dev_wer=" << exact(c.best_dev_wer) << '\n'
     << "evals_since_best=" << c.evals_since_best << '\n'
     << "skipped_utterances=" << c.skipped_utterances << '\n';
  return os.str();
}

struct Array {
  std::string name;
  Shape shape;
  std::span<const double> view;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  std::vector<Array> arrays;
  for (const auto& [name, p] : ckpt.params) arrays.push_back({"param/" + name, p.shape(), p.data()});
  for (const auto& [name, m] : ckpt.optimizer.first_moment) arrays.push_back({"adam.m/" + name, {m.size()}, m});
  for (const auto& [name, v] : ckpt.optimizer.second_moment) arrays.push_back({"adam.v/" + name, {v.size()}, v});
  arrays.push_back({"cmvn.mean", {ckpt.cmvn.mean.size()}, ckpt.cmvn.mean});
  arrays.push_back({"cmvn.var", {ckpt.cmvn.var.size()}, ckpt.cmvn.var});

  io::ByteWriter w;
  w.put_bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put_string(config_block(ckpt));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(arrays.size()));
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    w.put_string(a.name);
    w.put<std::uint8_t>(kDtypeF64);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) w.put<std::uint64_t>(d);
    w.put<std::uint64_t>(offset);
    offset += a.view.size() * sizeof(double);
  }
  for (const auto& a : arrays)
    for (double v : a.view) w.put<double>(v);
  io::write_file(path, w.bytes());
}

Checkpoint load_checkpoint(const fs::path& path) {
  const auto bytes = io::read_file(path);
  const std::string what = path.string();
  io::ByteReader r(bytes, what);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(what + ": not a checkpoint (bad magic)");
  }
  r.seek(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(version));
  }
  std::map<std::string, std::string> kv;
  {
    std::istringstream in(r.get_string());
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError(what + ": malformed config line '" + line + "'");
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto field = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(what + ": config block lacks " + key);
    return it->second;
  };
  auto as_size = [&](const std::string& key) -> std::size_t {
    try {
      return static_cast<std::size_t>(std::stoull(field(key)));
    } catch (const std::logic_error&) {
      throw FormatError(what + ": bad value for " + key);
    }
  };
  auto as_double = [&](const std::string& key) {
    try {
      return std::stod(field(key));
    } catch (const std::logic_error&) {
      throw FormatError(what + ": bad value for " + key);
    }
  };

  Checkpoint c;
  c.model.num_layers = as_size("model.num_layers");
  c.model.d_model = as_size("model.d_model");
  c.model.num_heads = as_size("model.num_heads");
  c.model.conv_kernel = as_size("model.conv_kernel");
  c.model.ff_expansion = as_size("model.ff_expansion");
  c.model.dropout = as_double("model.dropout");
  c.model.vocab_out = as_size("model.vocab_out");
  c.model.subsample_factor = as_size("model.subsample_factor");
  c.model.input_dim = as_size("model.input_dim");
  try {
    c.schedule.stage = stage_from_string(field("stage"));
  } catch (const ConfigError& e) {
    throw FormatError(what + ": " + e.what());
  }
  c.schedule.peak_lr = as_double("schedule.peak_lr");
  c.schedule.warmup_steps = as_size("schedule.warmup_steps");
  c.optimizer.config.beta1 = as_double("adam.beta1");
  c.optimizer.config.beta2 = as_double("adam.beta2");
  c.optimizer.config.eps = as_double("adam.eps");
  c.optimizer.config.weight_decay = as_double("adam.weight_decay");
  c.optimizer.step_count = as_size("adam.step_count");
  c.step = as_size("step");
  c.vocab_hash = std::stoull(field("vocab_hash"));
  c.seed = std::stoull(field("seed"));
  c.best_dev_wer = as_double("best_dev_wer");
  c.evals_since_best = as_size("evals_since_best");
  c.skipped_utterances = as_size("skipped_utterances");

  struct Entry {
    std::string name;
    Shape shape;
    std::uint64_t offset;
  };
  std::vector<Entry> table(r.get<std::uint32_t>());
  for (auto& e : table) {
    e.name = r.get_string();
    if (r.get<std::uint8_t>() != kDtypeF64) throw FormatError(what + ": array " + e.name + " is not f64");
    e.shape.resize(r.get<std::uint32_t>());
    for (auto& d : e.shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    e.offset = r.get<std::uint64_t>();
  }
  const std::size_t payload = r.pos();
  for (const auto& e : table) {
    const std::size_t n = numel(e.shape);
    if (e.offset > bytes.size() - payload || n > (bytes.size() - payload - e.offset) / sizeof(double)) {
      throw FormatError(what + ": truncated file (array " + e.name + ")");
    }
    std::vector<double> values(n);
    std::memcpy(values.data(), bytes.data() + payload + e.offset, n * sizeof(double));
    auto strip = [&](std::string_view prefix) { return e.name.substr(prefix.size()); };
    if (e.name.starts_with("param/")) c.params[strip("param/")] = Tensor::from(e.shape, std::move(values), true);
    else if (e.name.starts_with("adam.m/")) c.optimizer.first_moment[strip("adam.m/")] = std::move(values);
    else if (e.name.starts_with("adam.v/")) c.optimizer.second_moment[strip("adam.v/")] = std::move(values);
    else if (e.name == "cmvn.mean") c.cmvn.mean = std::move(values);
    else if (e.name == "cmvn.var") c.cmvn.var = std::move(values);
    else throw FormatError(what + ": unexpected array " + e.name);
  }
  try {
    c.model.validate();
    model::check_params(c.params, c.model);
  } catch (const Error& e) {
    throw FormatError(what + ": " + e.what());
  }
  return c;
}

bool bit_identical(const Checkpoint& a, const Checkpoint& b) {
  auto same = [](std::span<const double> x, std::span<const double> y) {
    return x.size() == y.size() && (x.empty() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
  };
  if (config_block(a) != config_block(b)) return false;
  if (a.params.size() != b.params.size()) return false;
  for (const auto& [name, p] : a.params) {
    const auto it = b.params.find(name);
    if (it == b.params.end() || p.shape() != it->second.shape() || !same(p.data(), it->second.data())) return false;
  }
  auto same_map = [&](const auto& x, const auto& y) {
    if (x.size() != y.size()) return false;
    for (const auto& [name, v] : x) {
      const auto it = y.find(name);
      if (it == y.end() || !same(v, it->second)) return false;
    }
    return true;
  };
  return same_map(a.optimizer.first_moment, b.optimizer.first_moment) &&
         same_map(a.optimizer.second_moment, b.optimizer.second_moment) && same(a.cmvn.mean, b.cmvn.mean) &&
         same(a.cmvn.var, b.cmvn.var);
}

// ---- features and batches ----

Featurizer::Featurizer(audio::CmvnStats cmvn, audio::AugmentPolicy augment)
    : cmvn_(std::move(cmvn)), augment_(std::move(augment)) {
  if (augment_.enabled) augment_.validate();
}

const audio::Waveform& Featurizer::waveform(const fs::path& path) {
  auto it = waves_.find(path);
  if (it == waves_.end()) it = waves_.emplace(path, audio::load_wav(path)).first;
  return it->second;
}

audio::FeatureMatrix Featurizer::features(const data::ManifestEntry& entry, bool training, Rng& rng) {
  const double factor = data::speed_factor_of(entry.id);
  const auto path = entry.audio_path();
  if (!training || !augment_.enabled) {
    const auto key = std::make_pair(path, factor);
    auto it = clean_.find(key);
    if (it == clean_.end()) {
      it = clean_.emplace(key, audio::cmvn(audio::log_mel(audio::speed_perturb(waveform(path), factor)), cmvn_)).first;
    }
    return it->second;
  }
  const double db = (2.0 * uniform01(rng) - 1.0) * augment_.gain_db_range;
  const auto wave = audio::apply_gain(audio::speed_perturb(waveform(path), factor), db);
  return audio::spec_augment(audio::cmvn(audio::log_mel(wave), cmvn_), augment_, rng);
}

Example Featurizer::example(const data::ManifestEntry& entry, const Vocabulary& vocab, bool training, Rng& rng) {
  Example ex;
  ex.id = entry.id;
  ex.features = features(entry, training, rng);
  ex.target = encode(entry.text, vocab).ids;
  return ex;
}

std::pair<Tensor, std::vector<std::size_t>> collate(const std::vector<const audio::FeatureMatrix*>& features) {
  if (features.empty()) throw ShapeError("collate: empty batch");
  std::size_t t_max = 0;
  for (const auto* f : features) t_max = std::max(t_max, f->num_frames);
  constexpr std::size_t d = audio::FeatureMatrix::kDim;
  std::vector<double> values(features.size() * t_max * d, 0.0);
  std::vector<std::size_t> lengths;
  for (std::size_t b = 0; b < features.size(); ++b) {
    std::copy(features[b]->values.begin(), features[b]->values.end(),
              values.begin() + static_cast<std::ptrdiff_t>(b * t_max * d));
    lengths.push_back(features[b]->num_frames);
  }
  return {Tensor::from({features.size(), t_max, d}, std::move(values)), std::move(lengths)};
}

AccumulatedLoss accumulate_gradients(const std::vector<std::vector<Example>>& micro_batches,
                                     model::ParameterSet& params, const model::ModelConfig& config,
                                     std::uint64_t seed) {
  AccumulatedLoss out;
  std::vector<std::vector<const Example*>> usable(micro_batches.size());
  for (std::size_t k = 0; k < micro_batches.size(); ++k) {
    for (const auto& ex : micro_batches[k]) {
      const std::size_t frames = ex.features.num_frames;
      if (frames >= 4 && ctc::feasible(model::subsampled_length(frames), ex.target)) {
        usable[k].push_back(&ex);
        ++out.utterances;
      } else {
        out.skipped.push_back(ex.id);
      }
    }
  }
  if (out.utterances == 0) return out;
  const double total = static_cast<double>(out.utterances);
  double loss_sum = 0.0;
  for (std::size_t k = 0; k < usable.size(); ++k) {
    if (usable[k].empty()) continue;
    std::vector<const audio::FeatureMatrix*> feats;
    std::vector<std::vector<int>> targets;
    for (const auto* ex : usable[k]) {
      feats.push_back(&ex->features);
      targets.push_back(ex->target);
    }
    auto batch_ids = [&] {
      std::string ids;
      for (const auto* ex : usable[k]) ids += (ids.empty() ? "" : " ") + ex->id;
      return ids;
    };
    auto [x, lengths] = collate(feats);
    Rng rng(derive_seed(seed, k));
    Tensor loss;
    try {
      const auto enc = model::encoder_forward(x, lengths, params, config, model::Mode::kTrain, &rng);
      loss = ctc::ctc_loss(enc.log_probs, enc.lengths, targets);
    } catch (const Error& e) {
      if (std::string_view(e.what()).find("non-finite") == std::string_view::npos) throw;
      throw Error(std::string(e.what()) + "; batch: " + batch_ids());
    }
    const double value = loss.item();
    if (!std::isfinite(value)) throw Error("non-finite loss; batch: " + batch_ids());
    const double n = static_cast<double>(usable[k].size());
    backward(ops::scale(loss, n / total));
    loss_sum += value * n;
  }
  out.mean_loss = loss_sum / total;
  return out;
}

// ---- stage runner ----

void TrainRunConfig::validate() const {
  model.validate();
  schedule.validate();
  adam.validate();
  if (augment.enabled) augment.validate();
  if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (accumulation < 1) throw ConfigError("train: accumulation must be at least 1");
  if (global_batch != 0 && global_batch != batch_size * accumulation) {
    throw ConfigError("train: batch_size * accumulation (" + std::to_string(batch_size * accumulation) +
                      ") != global_batch (" + std::to_string(global_batch) + ")");
  }
  if (!(bucket_width_s > 0.0)) throw ConfigError("train: bucket_width_s must be positive");
}

std::string LogRow::format() const {
  std::ostringstream os;
  os << step << ',';
  if (loss) os << std::setprecision(10) << *loss;
  else os << '-';
  os << ',' << std::setprecision(6) << lr << ',';
  if (dev_wer) os << std::fixed << std::setprecision(4) << *dev_wer;
  else os << '-';
  return os.str();
}

Checkpoint fresh_checkpoint(const TrainRunConfig& run, const Vocabulary& vocab, const audio::CmvnStats& cmvn) {
  run.validate();
  if (vocab.size() + 1 != run.model.vocab_out) {
    throw ConfigError("model vocab_out " + std::to_string(run.model.vocab_out) + " does not match " +
                      std::to_string(vocab.size()) + " pieces plus blank");
  }
  if (cmvn.mean.size() != audio::kNumMelBins || cmvn.var.size() != audio::kNumMelBins) {
    throw ConfigError("cmvn statistics must have 80 dimensions");
  }
  Checkpoint c;
  c.model = run.model;
  c.params = model::init_params(run.model, derive_seed(run.seed, 0x696e6974));
  c.optimizer = OptimizerState::for_params(c.params, run.adam);
  c.schedule = run.schedule;
  c.schedule.stage = Stage::kPretrain;
  c.vocab_hash = vocab.hash();
  c.cmvn = cmvn;
  c.seed = run.seed;
  return c;
}

Checkpoint finetune_handoff(const Checkpoint& pretrained, const Vocabulary& vocab, std::size_t warmup_steps) {
  if (pretrained.stage() != Stage::kPretrain) throw ConfigError("fine-tuning must start from a pretrain checkpoint");
  if (vocab.hash() != pretrained.vocab_hash) {
    throw ConfigError("vocabulary hash does not match the pretrain checkpoint");
  }
  Checkpoint c;
  c.model = pretrained.model;
  for (const auto& [name, p] : pretrained.params) c.params[name] = Tensor::from(p.shape(), {p.data().begin(), p.data().end()}, true);
  c.optimizer = OptimizerState::for_params(c.params, pretrained.optimizer.config);
  c.schedule.peak_lr = pretrained.schedule.peak_lr / 10.0;
  c.schedule.warmup_steps = warmup_steps;
  c.schedule.stage = Stage::kFinetune;
  c.schedule.validate();
  c.vocab_hash = pretrained.vocab_hash;
  c.cmvn = pretrained.cmvn;
  c.seed = pretrained.seed;
  return c;
}

StageResult run_stage(const TrainRunConfig& run, Checkpoint start, const Vocabulary& vocab,
                      const std::vector<data::ManifestEntry>& train, const std::vector<data::ManifestEntry>& dev) {
  run.validate();
  if (train.empty()) throw ConfigError("train: the training manifest is empty");
  if (vocab.hash() != start.vocab_hash) throw ConfigError("vocabulary hash does not match the checkpoint");
  model::check_params(start.params, start.model);

  StageResult result;
  result.checkpoint = std::move(start);
  Checkpoint& ck = result.checkpoint;
  const std::uint64_t seed = derive_seed(ck.seed, ck.stage() == Stage::kPretrain ? 1 : 2);

  Featurizer featurizer(ck.cmvn, run.augment);
  const std::size_t per_epoch = data::make_batches(train, run.batch_size, 0, run.bucket_width_s).size();
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::vector<std::size_t>> epoch_batches;

  std::ofstream log;
  if (!run.log_path.empty()) {
    if (run.log_path.has_parent_path()) fs::create_directories(run.log_path.parent_path());
    // On resume, rows past the checkpoint's step are dropped before appending.
    std::string kept = "step,loss,lr,wer\n";
    if (ck.step > 0 && fs::exists(run.log_path)) {
      std::ifstream in(run.log_path);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        if (std::stoull(line.substr(0, comma)) <= ck.step) kept += line + '\n';
      }
    }
    log.open(run.log_path, std::ios::trunc);
    if (!log) throw Error("cannot write " + run.log_path.string());
    log << kept;
  }

  while (ck.step < run.max_steps) {
    std::vector<std::vector<Example>> micro(run.accumulation);
    for (std::size_t k = 0; k < run.accumulation; ++k) {
      const std::size_t g = ck.step * run.accumulation + k;
      const std::size_t epoch = g / per_epoch;
      if (epoch != cached_epoch) {
        epoch_batches = data::make_batches(train, run.batch_size, derive_seed(seed, 1000 + epoch), run.bucket_width_s);
        cached_epoch = epoch;
      }
      Rng rng(derive_seed(seed, 2 * g + 1));
      for (std::size_t i : epoch_batches[g % per_epoch]) micro[k].push_back(featurizer.example(train[i], vocab, true, rng));
    }
    const auto acc = accumulate_gradients(micro, ck.params, ck.model, derive_seed(seed, 2 * ck.step + 2));
    ck.skipped_utterances += acc.skipped.size();
    result.skipped_ids.insert(result.skipped_ids.end(), acc.skipped.begin(), acc.skipped.end());

    LogRow row;
    row.lr = noam_lr(ck.step + 1, ck.schedule);
    if (acc.utterances > 0) {
      adamw_step(ck.params, gradients_of(ck.params), ck.optimizer, row.lr);
      row.loss = acc.mean_loss;
    }
    zero_grads(ck.params);
    row.step = ++ck.step;

    bool stop = false;
    if (run.eval_interval > 0 && !dev.empty() && (ck.step % run.eval_interval == 0 || ck.step == run.max_steps)) {
      const double w = dev_wer(ck, vocab, dev);
      row.dev_wer = w;
      if (w < ck.best_dev_wer) {
        ck.best_dev_wer = w;
        ck.evals_since_best = 0;
      } else {
        ++ck.evals_since_best;
      }
      if (run.target_dev_wer >= 0.0 && w <= run.target_dev_wer) stop = true;
      if (run.patience > 0 && ck.evals_since_best >= run.patience) stop = true;
    }
    result.log.push_back(row);
    if (log) log << row.format() << '\n' << std::flush;
    if (!run.checkpoint_dir.empty() && run.checkpoint_interval > 0 && ck.step % run.checkpoint_interval == 0) {
      save_checkpoint(ck, run.checkpoint_dir / ("step-" + std::to_string(ck.step) + ".ckpt"));
    }
    if (stop) {
      result.stopped_early = ck.step < run.max_steps;
      break;
    }
  }
  return result;
}

// ---- inference ----

CheckpointRecognizer::CheckpointRecognizer(const Checkpoint& ckpt, const Vocabulary& vocab, std::size_t beam_width)
    : ckpt_(ckpt), vocab_(vocab), beam_width_(beam_width), featurizer_(ckpt.cmvn, audio::AugmentPolicy::disabled()) {
  if (vocab.hash() != ckpt.vocab_hash) throw ConfigError("vocabulary hash does not match the checkpoint");
}

std::string CheckpointRecognizer::transcribe(const data::ManifestEntry& entry) { return transcribe_all({entry}, 1)[0]; }

std::vector<std::string> CheckpointRecognizer::transcribe_all(const std::vector<data::ManifestEntry>& entries,
                                                              std::size_t batch_size) {
  if (batch_size < 1) throw ConfigError("decode: batch_size must be at least 1");
  NoGradGuard no_grad;
  std::vector<std::string> out;
  out.reserve(entries.size());
  Rng unused(0);
  for (std::size_t begin = 0; begin < entries.size(); begin += batch_size) {
    const std::size_t end = std::min(entries.size(), begin + batch_size);
    std::vector<audio::FeatureMatrix> feats;
    for (std::size_t i = begin; i < end; ++i) {
      feats.push_back(featurizer_.features(entries[i], false, unused));
      if (feats.back().num_frames < 4) throw FormatError("audio too short to decode: " + entries[i].id);
    }
    std::vector<const audio::FeatureMatrix*> ptrs;
    for (const auto& f : feats) ptrs.push_back(&f);
    auto [x, lengths] = collate(ptrs);
    const auto enc = model::encoder_forward(x, lengths, ckpt_.params, ckpt_.model, model::Mode::kEval);
    for (std::size_t b = 0; b < feats.size(); ++b) {
      const auto lattice = ctc::Lattice::of(enc.log_probs, b, enc.lengths[b]);
      const auto ids = beam_width_ == 0 ? ctc::greedy_decode(lattice).ids
                                        : ctc::prefix_beam_decode(lattice, beam_width_).front().ids;
      out.push_back(decode(ids, vocab_));
    }
  }
  return out;
}

double dev_wer(const Checkpoint& ckpt, const Vocabulary& vocab, const std::vector<data::ManifestEntry>& dev) {
  CheckpointRecognizer recognizer(ckpt, vocab);
  const auto hyps = recognizer.transcribe_all(dev);
  std::size_t errors = 0, words = 0;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    const auto ref = text::split_words(text::normalize_text(dev[i].text));
    const auto hyp = text::split_words(text::normalize_text(hyps[i]));
    errors += eval::edit_distance(ref, hyp).total();
    words += ref.size();
  }
  if (words == 0) throw Error("dev set has no reference words");
  return static_cast<double>(errors) / static_cast<double>(words);
}

}  // namespace asrlab::train
