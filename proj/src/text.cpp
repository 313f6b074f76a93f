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

#include "asrlab/text.hpp"

#include "asrlab/common.hpp"

namespace asrlab::text {

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    char32_t cp;
    if (c < 0x80) { len = 1; cp = c; }
    else if ((c >> 5) == 0x6) { len = 2; cp = c & 0x1f; }
    else if ((c >> 4) == 0xe) { len = 3; cp = c & 0x0f; }
    else if ((c >> 3) == 0x1e) { len = 4; cp = c & 0x07; }
    else throw FormatError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    if (i + len > s.size()) throw FormatError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) throw FormatError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (cc & 0x3f);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) {
      throw FormatError("invalid UTF-8 code point at offset " + std::to_string(i));
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(char32_t c) {
  std::string out;
  if (c < 0x80) {
    out += static_cast<char>(c);
  } else if (c < 0x800) {
    out += static_cast<char>(0xc0 | (c >> 6));
    out += static_cast<char>(0x80 | (c & 0x3f));
  } else if (c < 0x10000) {
    out += static_cast<char>(0xe0 | (c >> 12));
    out += static_cast<char>(0x80 | ((c >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (c & 0x3f));
  } else {
    out += static_cast<char>(0xf0 | (c >> 18));
    out += static_cast<char>(0x80 | ((c >> 12) & 0x3f));
    out += static_cast<char>(0x80 | ((c >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (c & 0x3f));
  }
  return out;
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  for (char32_t c : s) out += utf8_encode(c);
  return out;
}

NormalizationProfile NormalizationProfile::default_profile() { return {}; }

NormalizationProfile NormalizationProfile::raw() { return {"raw", false, false, false}; }

NormalizationProfile NormalizationProfile::by_name(std::string_view name) {
  if (name == "default") return default_profile();
  if (name == "raw") return raw();
  throw ConfigError("unknown normalization profile '" + std::string(name) + "'");
}

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f' || c == 0xa0;
}

std::string normalize_text(std::string_view raw, const NormalizationProfile& profile) {
  if (!profile.strip_diacritics && !profile.unify_alef && !profile.collapse_space) {
    utf8_decode(raw);  // validates
    return std::string(raw);
  }
  const std::u32string in = utf8_decode(raw);
  std::u32string out;
  out.reserve(in.size());
  bool pending_space = false;
  for (char32_t c : in) {
    if (profile.strip_diacritics && c >= 0x064b && c <= 0x0652) continue;
    if (profile.unify_alef && (c == 0x0622 || c == 0x0623 || c == 0x0625)) c = 0x0627;
    if (profile.collapse_space && is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return utf8_encode(out);
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::u32string cur;
  for (char32_t c : utf8_decode(s)) {
    if (is_space(c)) {
      if (!cur.empty()) words.push_back(utf8_encode(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(utf8_encode(cur));
  return words;
}

}  // namespace asrlab::text
