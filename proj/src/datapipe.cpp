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


#include "asrlab/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <optional>
#include <unordered_set>

#include "asrlab/eval.hpp"
#include "asrlab/text.hpp"
#include "json.hpp"

namespace asrlab::data {

namespace {

using nlohmann::json;

constexpr const char* kFields[] = {"id", "audio", "text", "label_kind", "duration_s", "dialect", "source"};

std::string factor_tag(double f) {
  std::ostringstream os;
  os << f;
  return os.str();
}

}  // namespace

std::string_view to_string(LabelKind kind) { return kind == LabelKind::kVerified ? "verified" : "weak"; }

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kSource: return "source";
    case RejectReason::kDuration: return "duration";
    case RejectReason::kCharset: return "charset";
    case RejectReason::kAudio: return "audio";
    case RejectReason::kAgreement: return "agreement";
  }
  return "unknown";
}

std::filesystem::path ManifestEntry::audio_path() const {
  const std::filesystem::path p(audio);
  return (p.is_absolute() ? p : base_dir / p).lexically_normal();
}

bool ManifestEntry::operator==(const ManifestEntry& o) const {
  return id == o.id && audio_path() == o.audio_path() && text == o.text && label_kind == o.label_kind &&
         duration_s == o.duration_s && dialect == o.dialect && source == o.source;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::unordered_set<std::string> ids;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ": line " + std::to_string(n) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw FormatError(where + "not valid JSON");
    }
    if (!j.is_object()) throw FormatError(where + "expected an object");
    for (const auto& [key, value] : j.items()) {
      if (std::none_of(std::begin(kFields), std::end(kFields), [&](const char* f) { return key == f; })) {
        throw FormatError(where + "unexpected field " + key);
      }
    }
    auto str = [&](const char* field) {
      if (!j.contains(field) || !j[field].is_string()) throw FormatError(where + field);
      return j[field].get<std::string>();
    };
    ManifestEntry e;
    e.id = str("id");
    e.audio = str("audio");
    e.text = str("text");
    const std::string kind = str("label_kind");
    if (kind == "verified") e.label_kind = LabelKind::kVerified;
    else if (kind == "weak") e.label_kind = LabelKind::kWeak;
    else throw FormatError(where + "label_kind");
    if (!j.contains("duration_s") || !j["duration_s"].is_number()) throw FormatError(where + "duration_s");
    e.duration_s = j["duration_s"].get<double>();
    if (!(e.duration_s > 0.0) || !std::isfinite(e.duration_s)) throw FormatError(where + "duration_s");
    e.dialect = str("dialect");
    e.source = str("source");
    if (e.id.empty()) throw FormatError(where + "id");
    if (!ids.insert(e.id).second) throw FormatError(where + "duplicate id " + e.id);
    e.base_dir = path.parent_path();
    e.line = n;
    out.push_back(std::move(e));
  }
  return out;
}

std::string to_json_line(const ManifestEntry& e) {
  json j = {{"id", e.id},
            {"audio", e.audio},
            {"text", e.text},
            {"label_kind", std::string(to_string(e.label_kind))},
            {"duration_s", e.duration_s},
            {"dialect", e.dialect},
            {"source", e.source}};
  return j.dump();
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  const auto dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (ManifestEntry e : entries) {
    if (!std::filesystem::path(e.audio).is_absolute()) {
      e.audio = std::filesystem::path(e.audio_path()).lexically_relative(dir.empty() ? "." : dir).generic_string();
    }
    out << to_json_line(e) << '\n';
  }
}

void FilterPolicy::validate() const {
  if (!(min_duration_s >= 0.0 && min_duration_s < max_duration_s)) {
    throw ConfigError("filter: need 0 <= min_duration_s < max_duration_s");
  }
  if (!(max_hypothesis_wer >= 0.0 && max_hypothesis_wer <= 1.0)) {
    throw ConfigError("filter: max_hypothesis_wer must be in [0,1]");
  }
}

FilterPolicy FilterPolicy::by_name(std::string_view name) {
  if (name == "default") return FilterPolicy{};
  if (name == "none") {
    FilterPolicy p;
    p.excluded_sources.clear();
    p.min_duration_s = 0.0;
    p.max_duration_s = 1e9;
    p.max_hypothesis_wer = 1.0;
    return p;
  }
  throw ConfigError("unknown filter policy '" + std::string(name) + "'");
}

bool allowed_charset(std::string_view s) {
  std::u32string cps;
  try {
    cps = text::utf8_decode(s);
  } catch (const FormatError&) {
    return false;
  }
  return std::all_of(cps.begin(), cps.end(), [](char32_t c) {
    return (c >= 0x0600 && c <= 0x06FF) || (c >= U'0' && c <= U'9') || c == U' ';
  });
}

std::size_t CorpusStats::rejected_total() const {
  std::size_t n = 0;
  for (const auto& [r, c] : rejected) n += c;
  return n;
}

std::string CorpusStats::render_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "input      " << input << '\n';
  os << "retained   " << retained << '\n';
  os << "rejected   " << rejected_total() << '\n';
  for (RejectReason r : kRejectOrder) {
    const auto it = rejected.find(r);
    os << "  " << std::left << std::setw(10) << to_string(r) << std::right << (it == rejected.end() ? 0 : it->second)
       << '\n';
  }
  os << "input_hours     " << input_hours << '\n';
  os << "retained_hours  " << retained_hours << '\n';
  for (const auto& [d, h] : retained_dialect_hours) os << "hours[" << d << "]  " << h << '\n';
  return os.str();
}

std::string CorpusStats::render_json() const {
  json j;
  j["input"] = input;
  j["retained"] = retained;
  j["rejected"] = rejected_total();
  json reasons = json::object();
  for (RejectReason r : kRejectOrder) {
    const auto it = rejected.find(r);
    reasons[std::string(to_string(r))] = it == rejected.end() ? 0 : it->second;
  }
  j["reasons"] = reasons;
  j["input_hours"] = input_hours;
  j["retained_hours"] = retained_hours;
  j["retained_dialect_hours"] = retained_dialect_hours;
  return j.dump(2) + "\n";
}

CorpusStats corpus_stats(const std::vector<ManifestEntry>& entries) {
  CorpusStats s;
  for (RejectReason r : kRejectOrder) s.rejected[r] = 0;
  for (const auto& e : entries) {
    ++s.input;
    ++s.retained;
    s.input_hours += e.duration_s / 3600.0;
    s.retained_hours += e.duration_s / 3600.0;
    s.retained_dialect_hours[e.dialect] += e.duration_s / 3600.0;
  }
  return s;
}

FilterResult filter_manifest(const std::vector<ManifestEntry>& entries, const FilterPolicy& policy,
                             Recognizer* model) {
  policy.validate();
  if (policy.require_agreement && model == nullptr) {
    throw ConfigError("filter: agreement check requested but no model given");
  }
  FilterResult res;
  for (RejectReason r : kRejectOrder) res.stats.rejected[r] = 0;
  for (const auto& e : entries) {
    ++res.stats.input;
    res.stats.input_hours += e.duration_s / 3600.0;
    std::optional<RejectReason> reason;
    if (policy.excluded_sources.contains(e.source)) {
      reason = RejectReason::kSource;
    } else if (e.duration_s < policy.min_duration_s || e.duration_s > policy.max_duration_s) {
      reason = RejectReason::kDuration;
    } else if (!allowed_charset(e.text) || text::normalize_text(e.text).empty()) {
      reason = RejectReason::kCharset;
    } else if (model != nullptr) {
      std::string hyp;
      try {
        hyp = model->transcribe(e);
      } catch (const MissingInputError&) {
        reason = RejectReason::kAudio;
      } catch (const FormatError&) {
        reason = RejectReason::kAudio;
      }
      if (!reason && eval::wer(e.text, hyp) > policy.max_hypothesis_wer) reason = RejectReason::kAgreement;
    }
    if (reason) {
      ++res.stats.rejected[*reason];
      res.rejections.emplace_back(e.id, *reason);
      continue;
    }
    ++res.stats.retained;
    res.stats.retained_hours += e.duration_s / 3600.0;
    res.stats.retained_dialect_hours[e.dialect] += e.duration_s / 3600.0;
    res.kept.push_back(e);
  }
  return res;
}

std::vector<ManifestEntry> expand_augmented(const std::vector<ManifestEntry>& entries,
                                            const audio::AugmentPolicy& policy) {
  if (!policy.enabled) return entries;
  policy.validate();
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.label_kind != LabelKind::kVerified) {
      throw Error("expand_augmented: entry " + e.id + " is not a verified-label entry");
    }
    out.push_back(e);
    for (double f : policy.speed_factors) {
      if (f == 1.0) continue;
      ManifestEntry d = e;
      d.id = e.id + "#sp" + factor_tag(f);
      d.duration_s = e.duration_s / f;
      out.push_back(std::move(d));
    }
  }
  return out;
}

double speed_factor_of(std::string_view id) {
  const auto pos = id.rfind("#sp");
  if (pos == std::string_view::npos) return 1.0;
  try {
    return std::stod(std::string(id.substr(pos + 3)));
  } catch (const std::exception&) {
    throw FormatError("bad speed suffix in id " + std::string(id));
  }
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<ManifestEntry>& entries,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   double bucket_width_s) {
  if (batch_size == 0) throw ConfigError("make_batches: batch_size must be at least 1");
  if (!(bucket_width_s > 0.0)) throw ConfigError("make_batches: bucket width must be positive");
  std::map<long long, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    buckets[static_cast<long long>(std::floor(entries[i].duration_s / bucket_width_s))].push_back(i);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [key, members] : buckets) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(key) + 1));
    shuffle(members, rng);
    for (std::size_t i = 0; i < members.size(); i += batch_size) {
      batches.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(i),
                           members.begin() + static_cast<std::ptrdiff_t>(std::min(i + batch_size, members.size())));
    }
  }
  Rng order(derive_seed(seed, 0));
  shuffle(batches, order);
  return batches;
}

std::vector<ManifestEntry> finetune_mixture(const std::vector<ManifestEntry>& verified,
                                            const std::vector<ManifestEntry>& weak, double weak_ratio,
                                            std::uint64_t seed) {
  if (!(weak_ratio >= 0.0)) throw ConfigError("finetune mixture: weak ratio must be non-negative");
  std::vector<ManifestEntry> out = verified;
  std::vector<std::size_t> idx(weak.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 0x6d6978));
  shuffle(idx, rng);
  const auto want = static_cast<std::size_t>(std::llround(weak_ratio * static_cast<double>(verified.size())));
  idx.resize(std::min(want, idx.size()));
  std::sort(idx.begin(), idx.end());
  for (std::size_t i : idx) out.push_back(weak[i]);
  return out;
}

}  // namespace asrlab::data
