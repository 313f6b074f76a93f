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

#include <string>
#include <string_view>
#include <vector>

namespace asrlab::text {

std::u32string utf8_decode(std::string_view s);  // throws FormatError on malformed input
std::string utf8_encode(std::u32string_view s);
std::string utf8_encode(char32_t c);

struct NormalizationProfile {
  std::string name = "default";
  bool strip_diacritics = true;  // U+064B..U+0652
  bool unify_alef = true;        // U+0622/U+0623/U+0625 -> U+0627
  bool collapse_space = true;    // whitespace runs -> one space, trimmed

  static NormalizationProfile default_profile();
  static NormalizationProfile raw();
  // "default" or "raw"; throws ConfigError otherwise.
  static NormalizationProfile by_name(std::string_view name);
};

std::string normalize_text(std::string_view raw, const NormalizationProfile& profile = {});

bool is_space(char32_t c);
std::vector<std::string> split_words(std::string_view s);

}  // namespace asrlab::text
