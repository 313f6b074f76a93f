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


#include "asrlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

namespace asrlab::eval {

namespace {

using nlohmann::json;

template <typename T>
EditCounts levenshtein(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), at(i, j - 1) + 1, at(i - 1, j) + 1});

  EditCounts c;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      c.substitutions += ref[i - 1] != hyp[j - 1];
      --i;
      --j;
    } else if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++c.insertions;
      --j;
    } else {
      ++c.deletions;
      --i;
    }
  }
  return c;
}

std::vector<std::string> words_of(std::string_view s, const text::NormalizationProfile& profile) {
  return text::split_words(text::normalize_text(s, profile));
}

std::size_t dialect_rank(std::string_view d) {
  const auto it = std::find(kDialectOrder.begin(), kDialectOrder.end(), d);
  return static_cast<std::size_t>(it - kDialectOrder.begin());
}

json counts_json(const EditCounts& c) {
  return {{"substitutions", c.substitutions}, {"deletions", c.deletions}, {"insertions", c.insertions}};
}

EditCounts counts_from(const json& j) {
  return {j.at("substitutions").get<std::size_t>(), j.at("deletions").get<std::size_t>(),
          j.at("insertions").get<std::size_t>()};
}

}  // namespace

EditCounts& EditCounts::operator+=(const EditCounts& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  return *this;
}

EditCounts edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp) {
  return levenshtein<std::string>(ref, hyp);
}

EditCounts edit_distance(std::u32string_view ref, std::u32string_view hyp) {
  return levenshtein<char32_t>(std::span<const char32_t>(ref.data(), ref.size()),
                               std::span<const char32_t>(hyp.data(), hyp.size()));
}

double wer(std::string_view ref, std::string_view hyp, const text::NormalizationProfile& profile) {
  const auto r = words_of(ref, profile);
  if (r.empty()) throw Error("wer: reference is empty after normalization");
  return static_cast<double>(edit_distance(r, words_of(hyp, profile)).total()) / static_cast<double>(r.size());
}

double cer(std::string_view ref, std::string_view hyp, const text::NormalizationProfile& profile) {
  const auto r = text::utf8_decode(text::normalize_text(ref, profile));
  if (r.empty()) throw Error("cer: reference is empty after normalization");
  const auto h = text::utf8_decode(text::normalize_text(hyp, profile));
  return static_cast<double>(edit_distance(r, h).total()) / static_cast<double>(r.size());
}

ScoreReport make_report(std::vector<DialectScore> rows, std::vector<std::string> warnings) {
  std::stable_sort(rows.begin(), rows.end(), [](const DialectScore& a, const DialectScore& b) {
    const auto ra = dialect_rank(a.dialect), rb = dialect_rank(b.dialect);
    return ra != rb ? ra < rb : a.dialect < b.dialect;
  });
  ScoreReport r;
  r.dialects = std::move(rows);
  r.warnings = std::move(warnings);
  if (!r.dialects.empty()) {
    for (const auto& d : r.dialects) {
      r.macro_wer += d.wer;
      r.macro_cer += d.cer;
    }
    r.macro_wer /= static_cast<double>(r.dialects.size());
    r.macro_cer /= static_cast<double>(r.dialects.size());
  }
  return r;
}

ScoreReport score_manifest(const std::vector<data::ManifestEntry>& refs,
                           const std::map<std::string, std::string>& hyps,
                           const text::NormalizationProfile& profile) {
  std::map<std::string, DialectScore> by_dialect;
  std::vector<std::string> warnings;
  for (const auto& e : refs) {
    const auto it = hyps.find(e.id);
    std::string hyp;
    if (it == hyps.end()) warnings.push_back("missing hypothesis for " + e.id + ", scored as empty");
    else hyp = it->second;
    const auto rw = words_of(e.text, profile);
    if (rw.empty()) {
      warnings.push_back("empty reference for " + e.id + ", skipped");
      continue;
    }
    DialectScore& d = by_dialect[e.dialect];
    d.dialect = e.dialect;
    ++d.utterances;
    d.word_errors += edit_distance(rw, words_of(hyp, profile));
    d.ref_words += rw.size();
    const auto rc = text::utf8_decode(text::normalize_text(e.text, profile));
    d.char_errors += edit_distance(rc, text::utf8_decode(text::normalize_text(hyp, profile)));
    d.ref_chars += rc.size();
  }
  std::vector<DialectScore> rows;
  for (auto& [name, d] : by_dialect) {
    d.wer = static_cast<double>(d.word_errors.total()) / static_cast<double>(d.ref_words);
    d.cer = static_cast<double>(d.char_errors.total()) / static_cast<double>(d.ref_chars);
    rows.push_back(d);
  }
  return make_report(std::move(rows), std::move(warnings));
}

std::string format_percent(double fraction) {
  // The small guard keeps values like 12.205 from rounding down through
  // binary representation error.
  const auto cents = static_cast<long long>(std::floor(fraction * 10000.0 + 0.5 + 1e-9));
  std::ostringstream os;
  os << cents / 100 << '.' << std::setw(2) << std::setfill('0') << cents % 100;
  return os.str();
}

std::string render_report(const ScoreReport& report, Format format) {
  std::vector<std::string> columns{"Avg"};
  for (auto d : kDialectOrder) columns.emplace_back(d);
  for (const auto& d : report.dialects)
    if (dialect_rank(d.dialect) == kDialectOrder.size()) columns.push_back(d.dialect);

  auto row = [&](bool is_wer) {
    std::vector<std::string> cells{format_percent(is_wer ? report.macro_wer : report.macro_cer)};
    for (std::size_t c = 1; c < columns.size(); ++c) {
      const auto it = std::find_if(report.dialects.begin(), report.dialects.end(),
                                   [&](const DialectScore& d) { return d.dialect == columns[c]; });
      cells.push_back(it == report.dialects.end() ? "-" : format_percent(is_wer ? it->wer : it->cer));
    }
    return cells;
  };

  std::ostringstream os;
  if (format == Format::kCsv) {
    os << "metric";
    for (const auto& c : columns) os << ',' << c;
    os << '\n';
    if (!report.dialects.empty()) {
      for (bool w : {true, false}) {
        os << (w ? "WER" : "CER");
        for (const auto& cell : row(w)) os << ',' << cell;
        os << '\n';
      }
    }
    return os.str();
  }
  os << std::left << std::setw(8) << "Metric";
  for (const auto& c : columns) os << std::right << std::setw(8) << c;
  os << '\n';
  if (!report.dialects.empty()) {
    for (bool w : {true, false}) {
      os << std::left << std::setw(8) << (w ? "WER (%)" : "CER (%)");
      for (const auto& cell : row(w)) os << std::right << std::setw(8) << cell;
      os << '\n';
    }
  }
  for (const auto& w : report.warnings) os << "warning: " << w << '\n';
  return os.str();
}

std::string render_report_json(const ScoreReport& report) {
  json j;
  j["macro_wer"] = report.macro_wer;
  j["macro_cer"] = report.macro_cer;
  j["warnings"] = report.warnings;
  j["dialects"] = json::array();
  for (const auto& d : report.dialects) {
    j["dialects"].push_back({{"dialect", d.dialect},
                             {"utterances", d.utterances},
                             {"word_errors", counts_json(d.word_errors)},
                             {"char_errors", counts_json(d.char_errors)},
                             {"ref_words", d.ref_words},
                             {"ref_chars", d.ref_chars},
                             {"wer", d.wer},
                             {"cer", d.cer}});
  }
  return j.dump(2) + "\n";
}

ScoreReport parse_report_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    std::vector<DialectScore> rows;
    for (const auto& d : j.at("dialects")) {
      DialectScore s;
      s.dialect = d.at("dialect").get<std::string>();
      s.utterances = d.value("utterances", std::size_t{0});
      if (d.contains("word_errors")) s.word_errors = counts_from(d.at("word_errors"));
      if (d.contains("char_errors")) s.char_errors = counts_from(d.at("char_errors"));
      s.ref_words = d.value("ref_words", std::size_t{0});
      s.ref_chars = d.value("ref_chars", std::size_t{0});
      s.wer = d.at("wer").get<double>();
      s.cer = d.at("cer").get<double>();
      rows.push_back(std::move(s));
    }
    return make_report(std::move(rows), j.value("warnings", std::vector<std::string>{}));
  } catch (const json::exception& e) {
    throw FormatError(std::string("score report: ") + e.what());
  }
}

std::map<std::string, std::string> read_hypotheses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw FormatError(path.string() + ": line " + std::to_string(n) + ": not valid JSON");
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw FormatError(path.string() + ": line " + std::to_string(n) + ": id");
    }
    if (!j.contains("text") || !j["text"].is_string()) {
      throw FormatError(path.string() + ": line " + std::to_string(n) + ": text");
    }
    if (!out.emplace(j["id"].get<std::string>(), j["text"].get<std::string>()).second) {
      throw FormatError(path.string() + ": line " + std::to_string(n) + ": duplicate id");
    }
  }
  return out;
}

void write_hypotheses(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& hyps) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [id, text] : hyps) out << json{{"id", id}, {"text", text}}.dump() << '\n';
}

}  // namespace asrlab::eval
