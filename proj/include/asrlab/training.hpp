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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asrlab/audio.hpp"
#include "asrlab/conformer.hpp"
#include "asrlab/ctc.hpp"
#include "asrlab/datapipe.hpp"
#include "asrlab/tokenizer.hpp"

namespace asrlab::train {

enum class Stage { kPretrain, kFinetune };
std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);  // throws ConfigError

struct ScheduleConfig {
  double peak_lr = 2e-3;
  std::size_t warmup_steps = 10000;
  Stage stage = Stage::kPretrain;

  void validate() const;  // throws ConfigError
};

// peak * min(s / warmup, sqrt(warmup / s)); step counts from 1.
double noam_lr(std::size_t step, const ScheduleConfig& config);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  double weight_decay = 1e-2;

  void validate() const;
  bool operator==(const AdamWConfig&) const = default;
};

using GradientSet = std::map<std::string, std::vector<double>>;

struct OptimizerState {
  AdamWConfig config;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  std::size_t step_count = 0;

  // Zeroed moments mirroring the parameter shapes.
  static OptimizerState for_params(const model::ParameterSet& params, const AdamWConfig& config = {});
  bool operator==(const OptimizerState&) const = default;
};

// Current leaf gradients of every parameter (zeros where nothing flowed).
GradientSet gradients_of(const model::ParameterSet& params);
void zero_grads(model::ParameterSet& params);

// Decoupled decay p -= lr * wd * p, then the bias-corrected Adam step.
// A non-finite gradient rejects the whole step (nothing is modified) and the
// error names the parameter path.
void adamw_step(model::ParameterSet& params, const GradientSet& grads, OptimizerState& state, double lr);

/// Everything needed to resume a stage or to start the next one.
struct Checkpoint {
  model::ModelConfig model;
  model::ParameterSet params;
  OptimizerState optimizer;
  ScheduleConfig schedule;
  std::size_t step = 0;  // optimizer steps taken in this stage
  std::uint64_t vocab_hash = 0;
  audio::CmvnStats cmvn;
  std::uint64_t seed = 0;
  double best_dev_wer = std::numeric_limits<double>::infinity();
  std::size_t evals_since_best = 0;
  std::size_t skipped_utterances = 0;

  Stage stage() const { return schedule.stage; }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "CFCK", u32 version, config block (key=value text), named-array table
// (path, dtype=f64, shape, offset), little-endian f64 payload.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
bool bit_identical(const Checkpoint& a, const Checkpoint& b);

/// One utterance ready for the encoder.
struct Example {
  std::string id;
  audio::FeatureMatrix features;  // normalized
  std::vector<int> target;
};

/// Loads audio, applies speed (from the id suffix) and, in training, gain and
/// masking, then log-mel and CMVN.
class Featurizer {
 public:
  Featurizer(audio::CmvnStats cmvn, audio::AugmentPolicy augment);

  audio::FeatureMatrix features(const data::ManifestEntry& entry, bool training, Rng& rng);
  Example example(const data::ManifestEntry& entry, const Vocabulary& vocab, bool training, Rng& rng);

 private:
  const audio::Waveform& waveform(const std::filesystem::path& path);

  audio::CmvnStats cmvn_;
  audio::AugmentPolicy augment_;
  std::map<std::filesystem::path, audio::Waveform> waves_;
  std::map<std::pair<std::filesystem::path, double>, audio::FeatureMatrix> clean_;
};

// Zero-padded [B, T, 80] batch and the frame counts.
std::pair<Tensor, std::vector<std::size_t>> collate(const std::vector<const audio::FeatureMatrix*>& features);

struct AccumulatedLoss {
  double mean_loss = 0.0;  // over the utterances that contributed
  std::size_t utterances = 0;
  std::vector<std::string> skipped;  // infeasible CTC targets
};

// Forward and backward over every micro-batch; leaf gradients end up equal to
// those of the mean loss over all feasible utterances of the step.
// Dropout draws come from `seed` and the micro-batch position.
AccumulatedLoss accumulate_gradients(const std::vector<std::vector<Example>>& micro_batches,
                                     model::ParameterSet& params, const model::ModelConfig& config,
                                     std::uint64_t seed);

struct TrainRunConfig {
  model::ModelConfig model = model::ModelConfig::tiny();
  ScheduleConfig schedule;
  AdamWConfig adam;
  audio::AugmentPolicy augment;
  std::size_t batch_size = 8;
  std::size_t accumulation = 1;
  std::size_t global_batch = 0;  // 0: batch_size * accumulation
  std::size_t max_steps = 1000;
  std::size_t eval_interval = 100;  // 0 disables periodic dev evaluation
  std::size_t checkpoint_interval = 0;
  std::size_t patience = 0;  // evaluations without improvement before stopping; 0 disables
  double target_dev_wer = -1.0;  // stop once dev WER <= target; negative disables
  double bucket_width_s = 2.0;
  std::uint64_t seed = 1;
  std::filesystem::path log_path;        // optional "step,loss,lr,wer" log
  std::filesystem::path checkpoint_dir;  // optional periodic checkpoints

  void validate() const;
};

struct LogRow {
  std::size_t step = 0;
  std::optional<double> loss;
  double lr = 0.0;
  std::optional<double> dev_wer;

  std::string format() const;
};

struct StageResult {
  Checkpoint checkpoint;
  std::vector<LogRow> log;
  std::vector<std::string> skipped_ids;
  bool stopped_early = false;
};

// Fresh pretraining state: Glorot-initialized parameters, zero moments.
Checkpoint fresh_checkpoint(const TrainRunConfig& run, const Vocabulary& vocab, const audio::CmvnStats& cmvn);

// Fine-tune starting point: parameters, CMVN and vocabulary carried over,
// optimizer moments reset, peak LR divided by ten, warmup restarted.
Checkpoint finetune_handoff(const Checkpoint& pretrained, const Vocabulary& vocab, std::size_t warmup_steps);

// Continues `start` until run.max_steps optimizer steps have been taken in its
// stage (a checkpoint saved mid-stage resumes exactly). The stage's schedule
// comes from the checkpoint.
StageResult run_stage(const TrainRunConfig& run, Checkpoint start, const Vocabulary& vocab,
                      const std::vector<data::ManifestEntry>& train,
                      const std::vector<data::ManifestEntry>& dev = {});

/// Greedy or beam transcription with a trained checkpoint.
class CheckpointRecognizer : public data::Recognizer {
 public:
  CheckpointRecognizer(const Checkpoint& ckpt, const Vocabulary& vocab, std::size_t beam_width = 0);

  std::string transcribe(const data::ManifestEntry& entry) override;
  // Batched; results in input order.
  std::vector<std::string> transcribe_all(const std::vector<data::ManifestEntry>& entries,
                                          std::size_t batch_size = 8);

 private:
  const Checkpoint& ckpt_;
  const Vocabulary& vocab_;
  std::size_t beam_width_;
  Featurizer featurizer_;
};

// Pooled greedy WER over the entries.
double dev_wer(const Checkpoint& ckpt, const Vocabulary& vocab, const std::vector<data::ManifestEntry>& dev);

}  // namespace asrlab::train
