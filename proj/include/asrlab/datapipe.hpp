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
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "asrlab/audio.hpp"

namespace asrlab::data {

enum class LabelKind { kVerified, kWeak };

std::string_view to_string(LabelKind kind);

struct ManifestEntry {
  std::string id;
  std::string audio;  // as written in the manifest
  std::string text;
  LabelKind label_kind = LabelKind::kVerified;
  double duration_s = 0.0;
  std::string dialect;
  std::string source;

  std::filesystem::path base_dir;  // directory of the manifest it came from
  std::size_t line = 0;

  std::filesystem::path audio_path() const;
  bool operator==(const ManifestEntry& o) const;
};

// JSON Lines with fields exactly {id, audio, text, label_kind, duration_s, dialect, source}.
// Errors name the line and the offending field, e.g. "line 7: duration_s".
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
// Relative audio paths are rewritten relative to the new manifest's directory.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::string to_json_line(const ManifestEntry& entry);

enum class RejectReason { kSource, kDuration, kCharset, kAudio, kAgreement };
inline constexpr RejectReason kRejectOrder[] = {RejectReason::kSource, RejectReason::kDuration,
                                                RejectReason::kCharset, RejectReason::kAudio,
                                                RejectReason::kAgreement};
std::string_view to_string(RejectReason reason);

struct FilterPolicy {
  std::set<std::string> excluded_sources{"news"};
  double min_duration_s = 1.0;
  double max_duration_s = 30.0;
  double max_hypothesis_wer = 0.25;
  bool require_agreement = false;

  void validate() const;  // throws ConfigError
  // "default" (agreement off unless a model is supplied) or "none" (keeps everything
  // with a positive duration and readable text).
  static FilterPolicy by_name(std::string_view name);
};

// Arabic block U+0600-U+06FF, ASCII digits and space.
bool allowed_charset(std::string_view text);

/// Transcribes a manifest entry; throws MissingInputError or FormatError when
/// the audio cannot be read.
class Recognizer {
 public:
  virtual ~Recognizer() = default;
  virtual std::string transcribe(const ManifestEntry& entry) = 0;
};

struct CorpusStats {
  std::size_t input = 0;
  std::size_t retained = 0;
  std::map<RejectReason, std::size_t> rejected;  // every reason present, possibly 0
  double input_hours = 0.0;
  double retained_hours = 0.0;
  std::map<std::string, double> retained_dialect_hours;

  std::size_t rejected_total() const;
  std::string render_text() const;
  std::string render_json() const;
};

CorpusStats corpus_stats(const std::vector<ManifestEntry>& entries);

struct FilterResult {
  std::vector<ManifestEntry> kept;
  CorpusStats stats;
  std::vector<std::pair<std::string, RejectReason>> rejections;  // (id, first failing check)
};

// Checks run source -> duration -> charset -> audio -> agreement; the first failure is
// the recorded reason. The audio and agreement checks run only when a model is given.
FilterResult filter_manifest(const std::vector<ManifestEntry>& entries, const FilterPolicy& policy,
                             Recognizer* model = nullptr);

// Original entries plus one derived entry per speed factor != 1.0, id suffixed
// "#sp<factor>" and duration divided by the factor. Identity when disabled.
std::vector<ManifestEntry> expand_augmented(const std::vector<ManifestEntry>& entries,
                                            const audio::AugmentPolicy& policy);
// 1.0 for ids without a speed suffix.
double speed_factor_of(std::string_view id);

// Duration buckets of `bucket_width_s`, shuffled within each bucket, cut into
// batches (each bucket keeps its partial tail batch); batch order is shuffled.
// Returns indices into `entries`.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<ManifestEntry>& entries,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   double bucket_width_s = 2.0);

// Every verified entry plus round(weak_ratio * |verified|) weak entries drawn
// without replacement (capped at the weak count).
std::vector<ManifestEntry> finetune_mixture(const std::vector<ManifestEntry>& verified,
                                            const std::vector<ManifestEntry>& weak, double weak_ratio,
                                            std::uint64_t seed);

}  // namespace asrlab::data
