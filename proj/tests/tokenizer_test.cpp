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
#include <set>
#include <string>
#include <vector>

#include "asrlab/common.hpp"
#include "asrlab/text.hpp"
#include "asrlab/tokenizer.hpp"

namespace asrlab {
namespace {

const std::vector<std::string> kLetters = {"ا", "ب", "ت", "ث", "ج", "ح", "خ", "د", "ر", "س", "ش", "ع", "ف", "ق", "ك", "ل", "م", "ن", "ه", "و", "ي"};

std::vector<std::string> arabic_corpus(std::size_t lines, std::uint64_t seed) {
  Rng rng(seed);
  // Zipf-ish word pool so there are frequent pairs to merge.
  std::vector<std::string> pool;
  for (std::size_t w = 0; w < 60; ++w) {
    std::string word;
    const std::size_t len = 2 + static_cast<std::size_t>(uniform01(rng) * 5);
    for (std::size_t i = 0; i < len; ++i) word += kLetters[static_cast<std::size_t>(uniform01(rng) * kLetters.size())];
    pool.push_back(word);
  }
  std::vector<std::string> corpus;
  for (std::size_t l = 0; l < lines; ++l) {
    std::string line;
    const std::size_t n = 1 + static_cast<std::size_t>(uniform01(rng) * 8);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = uniform01(rng);
      if (i) line += " ";
      line += pool[static_cast<std::size_t>(u * u * pool.size())];
    }
    corpus.push_back(line);
  }
  return corpus;
}

const Vocabulary& shared_vocab() {
  static const Vocabulary v = train_tokenizer(arabic_corpus(400, 11));
  return v;
}

TEST(Normalize, StripsDiacritics) { EXPECT_EQ(text::normalize_text("كَتَبَ"), "كتب"); }

TEST(Normalize, UnifiesAlef) { EXPECT_EQ(text::normalize_text("أإآا"), "اااا"); }

TEST(Normalize, CollapsesWhitespace) {
  EXPECT_EQ(text::normalize_text("a  b "), "a b");
  EXPECT_EQ(text::normalize_text("\t a \n b"), "a b");
}

TEST(Normalize, RawProfileIsIdentity) {
  for (const std::string s : {"كَتَبَ", "a  b ", " أ ", ""}) EXPECT_EQ(text::normalize_text(s, text::NormalizationProfile::raw()), s);
  EXPECT_THROW(text::NormalizationProfile::by_name("fancy"), ConfigError);
}

TEST(Utf8, RoundTripAndRejection) {
  const std::string s = "abc كتب ▁ Ω";
  EXPECT_EQ(text::utf8_encode(text::utf8_decode(s)), s);
  EXPECT_THROW(text::utf8_decode("\xC3"), FormatError);
  EXPECT_THROW(text::utf8_decode("\xFF"), FormatError);
}

TEST(Train, AlwaysExactly128Pieces) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Vocabulary v = train_tokenizer(arabic_corpus(300, seed));
    EXPECT_EQ(v.size(), 128u);
    const std::set<std::string> unique(v.pieces().begin(), v.pieces().end());
    EXPECT_EQ(unique.size(), 128u);
  }
}

TEST(Train, AlphabetIsFullyCovered) {
  const auto corpus = arabic_corpus(400, 11);
  const Vocabulary& v = shared_vocab();
  EXPECT_GT(v.find(std::string(kSpaceMarker)), 0);
  for (const auto& line : corpus)
    for (char32_t c : text::utf8_decode(text::normalize_text(line)))
      if (!text::is_space(c)) EXPECT_GT(v.find(text::utf8_encode(c)), 0);
}

TEST(Train, SingleLetterRunsPadWithRuns) {
  const Vocabulary v = train_tokenizer({std::string(300, 'a')});
  ASSERT_EQ(v.size(), 128u);
  EXPECT_GT(v.find("a"), 0);
  EXPECT_GT(v.find(std::string(kSpaceMarker)), 0);
  EXPECT_GT(v.find("aa"), 0);
  for (const auto& p : v.pieces()) {
    std::string rest = p;
    if (rest.rfind(kSpaceMarker, 0) == 0) rest = rest.substr(kSpaceMarker.size());
    EXPECT_EQ(rest.find_first_not_of('a'), std::string::npos) << p;
  }
}

TEST(Train, FirstMergeIsMostFrequentPairWithLexicographicTie) {
  // Pairs: (▁,x) x2, (x,y) x2, (▁,y) x1 -> tie between (x,y) and (▁,x);
  // "x" < "▁" bytewise so (x,y) wins.
  const std::vector<std::string> corpus = {"xy xy y"};
  const Vocabulary v = train_tokenizer(corpus, 4);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.pieces()[3], "xy");
}

TEST(Train, AlphabetOverflowReportsCount) {
  std::string cjk;
  for (char32_t c = 0x4E00; c < 0x4E00 + 200; ++c) cjk += text::utf8_encode(c);
  try {
    train_tokenizer({cjk});
    FAIL();
  } catch (const Error& e) {
    // 200 characters plus the marker: 73 over budget.
    EXPECT_NE(std::string(e.what()).find("73"), std::string::npos) << e.what();
  }
}

TEST(Train, DeterministicRetraining) {
  const auto corpus = arabic_corpus(300, 5);
  const Vocabulary a = train_tokenizer(corpus), b = train_tokenizer(corpus);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.hash(), b.hash());
}

TEST(Encode, EmptyAndUnknown) {
  EXPECT_TRUE(encode("", shared_vocab()).ids.empty());
  try {
    encode("ب Ω", shared_vocab());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("Ω"), std::string::npos);
  }
}

TEST(Encode, CorpusRoundTripNeverEmitsBlank) {
  const Vocabulary& v = shared_vocab();
  for (const auto& line : arabic_corpus(400, 11)) {
    const TokenSequence s = encode(line, v);
    for (int id : s.ids) {
      EXPECT_GE(id, 1);
      EXPECT_LE(id, 128);
    }
    EXPECT_EQ(decode(s.ids, v), text::normalize_text(line));
    EXPECT_EQ(s.source_text, text::normalize_text(line));
  }
}

TEST(Encode, RandomIdStringsReachACanonicalFixedPoint) {
  const Vocabulary& v = shared_vocab();
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> ids(1 + static_cast<std::size_t>(uniform01(rng) * 12));
    for (int& id : ids) id = 1 + static_cast<int>(uniform01(rng) * 128);
    const std::string text = decode(ids, v);
    const TokenSequence canon = encode(text, v);
    EXPECT_EQ(decode(canon.ids, v), text::normalize_text(text));
    EXPECT_EQ(encode(decode(canon.ids, v), v).ids, canon.ids);
  }
}

TEST(Decode, EdgeCases) {
  const Vocabulary& v = shared_vocab();
  EXPECT_EQ(decode(std::vector<int>{}, v), "");
  const std::vector<std::string> pieces = {"كتب"};
  const int id = v.find(v.pieces()[0]);
  EXPECT_EQ(decode(std::vector<int>{id}, v), v.pieces()[0] == std::string(kSpaceMarker) ? "" : v.pieces()[0]);
  EXPECT_THROW(decode(std::vector<int>{0}, v), Error);
  EXPECT_THROW(decode(std::vector<int>{129}, v), Error);
}

TEST(Decode, SingleWordPieceIsIdentity) {
  std::vector<std::string> pieces;
  pieces.push_back("▁كتب");
  for (std::size_t i = 1; i < 128; ++i) pieces.push_back("p" + std::to_string(i));
  const Vocabulary v(pieces);
  EXPECT_EQ(decode(std::vector<int>{1}, v), "كتب");
}

TEST(VocabularyFile, RoundTripAndValidation) {
  const auto dir = std::filesystem::temp_directory_path() / "asrlab_tok_test";
  const auto path = dir / "vocab.txt";
  save_vocabulary(path, shared_vocab());
  EXPECT_EQ(load_vocabulary(path), shared_vocab());
  EXPECT_THROW(load_vocabulary(dir / "missing.txt"), MissingInputError);
}

}  // namespace
}  // namespace asrlab
