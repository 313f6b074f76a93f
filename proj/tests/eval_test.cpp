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


#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <iomanip>
#include <random>
#include <sstream>

#include "asrlab/common.hpp"
#include "asrlab/eval.hpp"

namespace asrlab::eval {
namespace {

using Words = std::vector<std::string>;

EditCounts counts(std::size_t s, std::size_t d, std::size_t i) { return {s, d, i}; }

TEST(EditDistance, Examples) {
  EXPECT_EQ(edit_distance(Words{"a", "b", "c"}, Words{"a", "x", "c"}), counts(1, 0, 0));
  EXPECT_EQ(edit_distance(Words{"a", "b"}, Words{"a", "b"}), counts(0, 0, 0));
  EXPECT_EQ(edit_distance(Words{}, Words{"a", "a"}), counts(0, 0, 2));
  EXPECT_EQ(edit_distance(Words{"a", "b"}, Words{}), counts(0, 2, 0));
  EXPECT_EQ(edit_distance(U"ab", U"ac"), counts(1, 0, 0));
}

TEST(EditDistance, TiePrefersSubstitutionOverInsertionAndDeletion) {
  // "ab" -> "ba": distance 2, reachable as 2 subs or 1 ins + 1 del.
  EXPECT_EQ(edit_distance(U"ab", U"ba"), counts(2, 0, 0));
}

std::size_t oracle_distance(const Words& a, const Words& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
  return d[a.size()][b.size()];
}

Words random_words(Rng& rng) {
  const auto n = static_cast<std::size_t>(uniform01(rng) * 7);
  Words w;
  for (std::size_t i = 0; i < n; ++i) w.push_back(std::string(1, static_cast<char>('a' + uniform01(rng) * 3)));
  return w;
}

TEST(EditDistance, MinimalAndTriangle) {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const Words a = random_words(rng), b = random_words(rng), c = random_words(rng);
    const auto ab = edit_distance(a, b), bc = edit_distance(b, c), ac = edit_distance(a, c);
    EXPECT_EQ(ab.total(), oracle_distance(a, b));
    EXPECT_LE(ac.total(), ab.total() + bc.total());
    // S + D = |ref|, S + I = |hyp| minus matches; both sides agree on the match count.
    EXPECT_EQ(a.size() - ab.substitutions - ab.deletions, b.size() - ab.substitutions - ab.insertions);
  }
}

TEST(Wer, Examples) {
  EXPECT_DOUBLE_EQ(wer("كتب الولد", "كتب الولد"), 0.0);
  EXPECT_DOUBLE_EQ(wer("كتب الولد", "كتب ولد"), 0.5);
  EXPECT_DOUBLE_EQ(wer("كتب", "باب دار قلم"), 3.0);
  EXPECT_THROW(wer("", "x"), Error);
  EXPECT_THROW(wer("   ", "x"), Error);
}

TEST(Cer, Examples) {
  EXPECT_DOUBLE_EQ(cer("ab", "ab"), 0.0);
  EXPECT_DOUBLE_EQ(cer("ab", "ac"), 0.5);
  EXPECT_DOUBLE_EQ(cer("a", ""), 1.0);
  EXPECT_DOUBLE_EQ(cer("a b", "ab"), 1.0 / 3.0);
  EXPECT_THROW(cer("", "a"), Error);
}

TEST(Wer, ZeroIffNormalizedIdentical) {
  EXPECT_DOUBLE_EQ(wer("أحمد  كتب", "احمد كتب"), 0.0);
  EXPECT_GT(wer("أحمد كتب", "احمد كتب", text::NormalizationProfile::raw()), 0.0);
  EXPECT_DOUBLE_EQ(cer("كَتَبَ", "كتب"), 0.0);
  EXPECT_GT(cer("كَتَبَ", "كتب", text::NormalizationProfile::raw()), 0.0);
}

TEST(Wer, RawProfileMatchesPreNormalizedInput) {
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"أَحمد كتب  الدرس", "احمد كتب درس"}, {"إلى البيت", "الى  بيت"}, {"ab  c", "a bc"}};
  for (const auto& [r, h] : pairs) {
    const auto nr = text::normalize_text(r), nh = text::normalize_text(h);
    EXPECT_DOUBLE_EQ(wer(nr, nh, text::NormalizationProfile::raw()), wer(r, h));
    EXPECT_DOUBLE_EQ(cer(nr, nh, text::NormalizationProfile::raw()), cer(r, h));
  }
}

TEST(FormatPercent, HalfUp) {
  EXPECT_EQ(format_percent(0.0), "0.00");
  EXPECT_EQ(format_percent(0.5), "50.00");
  EXPECT_EQ(format_percent(0.12345), "12.35");
  EXPECT_EQ(format_percent(0.12205), "12.21");
  EXPECT_EQ(format_percent(1.049), "104.90");
  EXPECT_EQ(format_percent(3.0), "300.00");
}

ScoreReport fixture(const std::vector<double>& percents) {
  std::vector<DialectScore> rows;
  for (std::size_t i = 0; i < percents.size(); ++i) {
    DialectScore d;
    d.dialect = std::string(kDialectOrder[i]);
    d.wer = percents[i] / 100.0;
    d.cer = percents[i] / 100.0;
    rows.push_back(d);
  }
  return make_report(std::move(rows));
}

struct TableCase {
  const char* name;
  std::vector<double> dialects;
  double avg;
};

class PublishedTable : public ::testing::TestWithParam<TableCase> {};

TEST_P(PublishedTable, MacroAverageMatchesAvgColumn) {
  const auto& c = GetParam();
  const auto report = fixture(c.dialects);
  const double mean = std::accumulate(c.dialects.begin(), c.dialects.end(), 0.0) / 8.0;
  EXPECT_NEAR(report.macro_wer * 100.0, mean, 1e-9);
  EXPECT_LE(std::abs(report.macro_wer * 100.0 - c.avg), 0.005 + 1e-9);
  std::ostringstream avg;
  avg << std::fixed << std::setprecision(2) << c.avg;
  EXPECT_EQ(format_percent(report.macro_wer), avg.str());
  const auto text = render_report(report, Format::kText);
  EXPECT_NE(text.find(avg.str()), std::string::npos) << text;
}

INSTANTIATE_TEST_SUITE_P(
    Tables, PublishedTable,
    ::testing::Values(
        TableCase{"wer", {20.68, 20.89, 41.72, 53.62, 44.62, 59.03, 22.67, 22.28}, 35.69},
        TableCase{"cer", {5.64, 7.33, 14.04, 18.44, 14.30, 23.28, 6.55, 8.06}, 12.21},
        TableCase{"eval_wer", {21.52, 22.89, 44.20, 54.78, 47.69, 57.62, 24.05, 21.91}, 36.83},
        TableCase{"eval_cer", {5.39, 7.50, 14.06, 17.71, 14.73, 21.73, 6.97, 7.40}, 11.94}),
    [](const auto& info) { return std::string(info.param.name); });

data::ManifestEntry ref(std::string id, std::string text, std::string dialect) {
  data::ManifestEntry e;
  e.id = std::move(id);
  e.text = std::move(text);
  e.dialect = std::move(dialect);
  e.duration_s = 2.0;
  return e;
}

TEST(ScoreManifest, PoolsErrorsPerDialect) {
  // Pooled: (1 + 0) / (1 + 3) = 0.25; per-utterance mean would be 0.5.
  const std::vector<data::ManifestEntry> refs = {ref("a", "كتب", "EGY"), ref("b", "كتب الولد الدرس", "EGY")};
  const auto report = score_manifest(refs, {{"a", "قرأ"}, {"b", "كتب الولد الدرس"}});
  ASSERT_EQ(report.dialects.size(), 1u);
  EXPECT_DOUBLE_EQ(report.dialects[0].wer, 0.25);
  EXPECT_EQ(report.dialects[0].ref_words, 4u);
  EXPECT_EQ(report.dialects[0].utterances, 2u);
  EXPECT_DOUBLE_EQ(report.macro_wer, 0.25);
  EXPECT_TRUE(report.warnings.empty());
}

TEST(ScoreManifest, MacroIsUnweightedAndMissingIsFlagged) {
  const std::vector<data::ManifestEntry> refs = {ref("a", "كتب", "JOR"), ref("b", "كتب الولد", "EGY"),
                                                 ref("c", "باب", "EGY")};
  const auto report = score_manifest(refs, {{"a", "كتب"}, {"b", "كتب الولد"}});
  ASSERT_EQ(report.dialects.size(), 2u);
  EXPECT_EQ(report.dialects[0].dialect, "JOR");
  EXPECT_EQ(report.dialects[1].dialect, "EGY");
  EXPECT_DOUBLE_EQ(report.dialects[1].wer, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(report.macro_wer, (0.0 + 1.0 / 3.0) / 2.0);
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_NE(report.warnings[0].find("c"), std::string::npos);
}

TEST(Render, ColumnOrderAndExtras) {
  std::vector<DialectScore> rows;
  for (std::string d : {"ZZZ", "PAL", "JOR", "MOR"}) {
    DialectScore s;
    s.dialect = d;
    s.wer = 0.1;
    rows.push_back(s);
  }
  const auto csv = render_report(make_report(rows), Format::kCsv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,Avg,JOR,EGY,MOR,ALG,YEM,MAU,UAE,PAL,ZZZ");
  EXPECT_NE(csv.find("WER,10.00,10.00,-,10.00,-,-,-,-,10.00,10.00"), std::string::npos) << csv;
}

TEST(Render, EmptyReportIsHeaderOnly) {
  const ScoreReport empty;
  const auto csv = render_report(empty, Format::kCsv);
  EXPECT_EQ(csv, "metric,Avg,JOR,EGY,MOR,ALG,YEM,MAU,UAE,PAL\n");
  const auto text = render_report(empty, Format::kText);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
}

std::vector<std::string> numbers_in(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      cur += c;
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  return out;
}

TEST(Render, CsvAndTextCarryIdenticalNumbers) {
  const auto report = fixture({20.68, 20.89, 41.72, 53.62, 44.62, 59.03, 22.67, 22.28});
  EXPECT_EQ(numbers_in(render_report(report, Format::kCsv)), numbers_in(render_report(report, Format::kText)));
}

TEST(ReportJson, RoundTrip) {
  const std::vector<data::ManifestEntry> refs = {ref("a", "كتب", "JOR"), ref("b", "كتب الولد", "XYZ")};
  const auto report = score_manifest(refs, {{"a", "كتب باب"}});
  const auto back = parse_report_json(render_report_json(report));
  EXPECT_EQ(render_report(back, Format::kCsv), render_report(report, Format::kCsv));
  EXPECT_EQ(back.warnings, report.warnings);
  ASSERT_EQ(back.dialects.size(), 2u);
  EXPECT_EQ(back.dialects[0].word_errors, report.dialects[0].word_errors);
  EXPECT_DOUBLE_EQ(back.macro_cer, report.macro_cer);
  EXPECT_THROW(parse_report_json("{"), FormatError);
}

TEST(Hypotheses, RoundTripAndDuplicates) {
  const auto dir = std::filesystem::temp_directory_path() / "asrlab_eval_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "hyps.jsonl";
  write_hypotheses(path, {{"u1", "كتب الولد"}, {"u2", ""}});
  const auto back = read_hypotheses(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at("u1"), "كتب الولد");
  EXPECT_EQ(back.at("u2"), "");
  write_hypotheses(path, {{"u1", "a"}, {"u1", "b"}});
  EXPECT_THROW(read_hypotheses(path), FormatError);
  EXPECT_THROW(read_hypotheses(dir / "missing.jsonl"), MissingInputError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace asrlab::eval
