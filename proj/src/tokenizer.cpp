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

#include "asrlab/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "asrlab/common.hpp"
#include "binary_io.hpp"

namespace asrlab {

namespace {

const std::u32string& marker32() {
  static const std::u32string m = text::utf8_decode(kSpaceMarker);
  return m;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].empty()) throw FormatError("vocabulary: empty piece at id " + std::to_string(i + 1));
    if (!ids_.emplace(pieces_[i], static_cast<int>(i + 1)).second) {
      throw FormatError("vocabulary: duplicate piece '" + pieces_[i] + "'");
    }
    max_len_ = std::max(max_len_, text::utf8_decode(pieces_[i]).size());
  }
}

const std::string& Vocabulary::piece(int id) const {
  if (id < 1 || static_cast<std::size_t>(id) > pieces_.size()) {
    throw Error("token id " + std::to_string(id) + " outside 1.." + std::to_string(pieces_.size()));
  }
  return pieces_[static_cast<std::size_t>(id - 1)];
}

int Vocabulary::find(std::string_view piece) const {
  const auto it = ids_.find(std::string(piece));
  return it == ids_.end() ? -1 : it->second;
}

std::string Vocabulary::serialize() const {
  std::string s = "#blank=0\n";
  for (const auto& p : pieces_) s += p + "\n";
  return s;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vocabulary train_tokenizer(const std::vector<std::string>& corpus, std::size_t target_size,
                           const text::NormalizationProfile& profile) {
  // Word -> frequency, words stored as marker-prefixed code point strings.
  std::map<std::u32string, std::size_t> word_freq;
  for (const auto& line : corpus) {
    for (const auto& w : text::split_words(text::normalize_text(line, profile))) {
      ++word_freq[marker32() + text::utf8_decode(w)];
    }
  }
  if (word_freq.empty()) throw Error("train_tokenizer: corpus is empty after normalization");

  std::set<std::u32string> alphabet;
  for (const auto& [w, f] : word_freq)
    for (char32_t c : w) alphabet.insert(std::u32string(1, c));
  if (alphabet.size() > target_size) {
    throw Error("train_tokenizer: alphabet has " + std::to_string(alphabet.size()) + " characters, " +
                std::to_string(alphabet.size() - target_size) + " more than the " +
                std::to_string(target_size) + "-piece budget");
  }

  std::vector<std::u32string> pieces(alphabet.begin(), alphabet.end());
  std::set<std::u32string> known(alphabet.begin(), alphabet.end());

  struct Word {
    std::vector<std::u32string> symbols;
    std::size_t freq;
  };
  std::vector<Word> words;
  for (const auto& [w, f] : word_freq) {
    Word word{{}, f};
    for (char32_t c : w) word.symbols.emplace_back(1, c);
    words.push_back(std::move(word));
  }

  while (pieces.size() < target_size) {
    std::map<std::pair<std::u32string, std::u32string>, std::size_t> pairs;
    for (const auto& w : words)
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) pairs[{w.symbols[i], w.symbols[i + 1]}] += w.freq;
    if (pairs.empty()) break;
    // std::map iterates in lexicographic order, so the first maximum wins ties.
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it)
      if (it->second > best->second) best = it;
    const auto [left, right] = best->first;
    const std::u32string merged = left + right;
    for (auto& w : words) {
      std::vector<std::u32string> next;
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left && w.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.symbols[i]);
        }
      }
      w.symbols = std::move(next);
    }
    if (known.insert(merged).second) pieces.push_back(merged);
  }

  if (pieces.size() < target_size) {
    std::map<std::u32string, std::size_t> counts;
    for (const auto& [w, f] : word_freq)
      for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t len = 2; i + len <= w.size(); ++len) {
          std::u32string sub = w.substr(i, len);
          if (!known.contains(sub)) counts[std::move(sub)] += f;
        }
    std::vector<std::pair<std::u32string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [sub, c] : ranked) {
      if (pieces.size() >= target_size) break;
      pieces.push_back(sub);
    }
  }
  if (pieces.size() < target_size) {
    throw Error("train_tokenizer: corpus too small, only " + std::to_string(pieces.size()) +
                " distinct pieces obtainable for a target of " + std::to_string(target_size));
  }

  std::vector<std::string> out;
  out.reserve(pieces.size());
  for (const auto& p : pieces) out.push_back(text::utf8_encode(p));
  return Vocabulary(std::move(out));
}

TokenSequence encode(std::string_view raw, const Vocabulary& vocab, const text::NormalizationProfile& profile) {
  TokenSequence seq;
  seq.source_text = text::normalize_text(raw, profile);
  for (const auto& word : text::split_words(seq.source_text)) {
    const std::u32string w = marker32() + text::utf8_decode(word);
    std::size_t i = 0;
    while (i < w.size()) {
      std::size_t len = std::min(vocab.max_piece_length(), w.size() - i);
      int id = -1;
      for (; len > 0; --len) {
        id = vocab.find(text::utf8_encode(std::u32string_view(w).substr(i, len)));
        if (id > 0) break;
      }
      if (id <= 0) throw Error("encode: character '" + text::utf8_encode(w[i]) + "' is not in the vocabulary");
      seq.ids.push_back(id);
      i += len;
    }
  }
  return seq;
}

std::string decode(std::span<const int> ids, const Vocabulary& vocab) {
  std::string joined;
  for (int id : ids) joined += vocab.piece(id);
  std::string out;
  for (std::size_t pos = 0; pos < joined.size();) {
    if (joined.compare(pos, kSpaceMarker.size(), kSpaceMarker) == 0) {
      out += ' ';
      pos += kSpaceMarker.size();
    } else {
      out += joined[pos++];
    }
  }
  const auto first = out.find_first_not_of(' ');
  if (first == std::string::npos) return "";
  return out.substr(first, out.find_last_not_of(' ') - first + 1);
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  const std::string s = vocab.serialize();
  io::write_file(path, std::vector<char>(s.begin(), s.end()));
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "#blank=0") {
    throw FormatError(path.string() + ": missing '#blank=0' header");
  }
  std::vector<std::string> pieces;
  while (std::getline(in, line)) pieces.push_back(line);
  if (pieces.size() != kNumPieces) {
    throw FormatError(path.string() + ": expected " + std::to_string(kNumPieces) + " pieces, found " +
                      std::to_string(pieces.size()));
  }
  return Vocabulary(std::move(pieces));
}

}  // namespace asrlab
