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

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asrlab/datapipe.hpp"
#include "asrlab/text.hpp"

namespace asrlab::eval {

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;

  std::size_t total() const { return substitutions + deletions + insertions; }
  EditCounts& operator+=(const EditCounts& o);
  bool operator==(const EditCounts&) const = default;
};

// Unit-cost Levenshtein; on equal cost the backtrace prefers substitution
// (or match), then insertion, then deletion.
EditCounts edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp);
EditCounts edit_distance(std::u32string_view ref, std::u32string_view hyp);

// Both throw when the normalized reference is empty. CER counts code points, spaces included.
double wer(std::string_view ref, std::string_view hyp, const text::NormalizationProfile& profile = {});
double cer(std::string_view ref, std::string_view hyp, const text::NormalizationProfile& profile = {});

inline constexpr std::array<std::string_view, 8> kDialectOrder = {"JOR", "EGY", "MOR", "ALG",
                                                                  "YEM", "MAU", "UAE", "PAL"};

struct DialectScore {
  std::string dialect;
  std::size_t utterances = 0;
  EditCounts word_errors;
  EditCounts char_errors;
  std::size_t ref_words = 0;
  std::size_t ref_chars = 0;
  double wer = 0.0;  // fractions, not percentages
  double cer = 0.0;
};

struct ScoreReport {
  std::vector<DialectScore> dialects;  // kDialectOrder first, then others by name
  double macro_wer = 0.0;
  double macro_cer = 0.0;
  std::vector<std::string> warnings;
};

// Orders rows and fills the unweighted macro averages from the row rates.
ScoreReport make_report(std::vector<DialectScore> rows, std::vector<std::string> warnings = {});

// Errors are pooled per dialect before dividing. A missing hypothesis counts as
// empty and is listed in the warnings.
ScoreReport score_manifest(const std::vector<data::ManifestEntry>& refs,
                           const std::map<std::string, std::string>& hyps,
                           const text::NormalizationProfile& profile = {});

// Percentage with two decimals, half-up.
std::string format_percent(double fraction);

enum class Format { kText, kCsv };
// Columns: Avg, JOR, EGY, MOR, ALG, YEM, MAU, UAE, PAL, then any other dialects.
std::string render_report(const ScoreReport& report, Format format);

std::string render_report_json(const ScoreReport& report);
ScoreReport parse_report_json(std::string_view json);

// JSON Lines {id, text}.
std::map<std::string, std::string> read_hypotheses(const std::filesystem::path& path);
void write_hypotheses(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& hyps);

}  // namespace asrlab::eval
