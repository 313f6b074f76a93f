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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asrlab/text.hpp"

namespace asrlab {

// Word-boundary marker (U+2581) prefixed to every word before segmentation.
inline constexpr std::string_view kSpaceMarker = "▁";

inline constexpr int kBlankId = 0;
inline constexpr std::size_t kNumPieces = 128;
// CTC output dimension: the text pieces plus blank.
inline constexpr std::size_t kNumOutputs = kNumPieces + 1;

/// Subword inventory. Piece ids are 1..size(); id 0 is the CTC blank and is
/// not a piece.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> pieces);

  std::size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  const std::string& piece(int id) const;
  // -1 when absent.
  int find(std::string_view piece) const;
  std::size_t max_piece_length() const { return max_len_; }  // in code points

  // FNV-1a over the serialized vocabulary file.
  std::uint64_t hash() const;
  std::string serialize() const;

  bool operator==(const Vocabulary& other) const { return pieces_ == other.pieces_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> ids_;
  std::size_t max_len_ = 0;
};

struct TokenSequence {
  std::vector<int> ids;
  std::string source_text;  // normalized
};

/// Greedy pair merges over marker-prefixed words, starting from the character
/// alphabet. Merge ties break toward the lexicographically smallest
/// (left, right) pair. When no pair is left to merge before the target size is
/// reached, the remaining slots are filled with the most frequent unseen
/// in-word substrings (count desc, then lexicographic).
Vocabulary train_tokenizer(const std::vector<std::string>& corpus, std::size_t target_size = kNumPieces,
                           const text::NormalizationProfile& profile = {});

// Normalizes, then segments each word by greedy longest match.
TokenSequence encode(std::string_view text, const Vocabulary& vocab,
                     const text::NormalizationProfile& profile = {});

std::string decode(std::span<const int> ids, const Vocabulary& vocab);

// "#blank=0" header, then one piece per line; line n (1-based, after the
// header) holds id n.
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::filesystem::path& path);

}  // namespace asrlab
