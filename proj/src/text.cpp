// Copyright 2026 The isotrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "isotrace/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <stdexcept>

namespace isotrace {
namespace {

icu::UnicodeString to_unicode(std::string_view s) {
  return icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
}

std::string to_utf8(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

std::string nfc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString out = normalizer->normalize(to_unicode(s), status);
  if (U_FAILURE(status)) throw std::runtime_error("NFC normalization failed");
  return to_utf8(out);
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  int32_t i = 0;
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const auto length = static_cast<int32_t>(s.size());
  while (i < length) {
    const int32_t start = i;
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c >= 0 && u_isUWhiteSpace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.append(s.substr(start, i - start));
  }
  return out;
}

bool is_word_char(UChar32 c) {
  if (c < 0) return false;
  if (u_isalnum(c)) return true;
  const int8_t type = u_charType(c);
  return type == U_NON_SPACING_MARK || type == U_COMBINING_SPACING_MARK ||
         type == U_ENCLOSING_MARK;
}

bool is_word_joiner(UChar32 c) { return c == '-' || c == '\'' || c == 0x2019; }

bool is_digit_joiner(UChar32 c) { return c == '.' || c == ','; }

struct CodePoint {
  UChar32 value;
  int32_t begin;
  int32_t end;
};

std::vector<CodePoint> decode(std::string_view s) {
  std::vector<CodePoint> out;
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const auto length = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t begin = i;
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    out.push_back({c, begin, i});
  }
  return out;
}

bool is_closing(std::string_view t) {
  return t == "." || t == "," || t == ";" || t == ":" || t == "!" || t == "?" || t == ")" ||
         t == "]" || t == "}";
}

bool is_opening(std::string_view t) { return t == "(" || t == "[" || t == "{"; }

}  // namespace

std::string normalize_text(std::string_view text) { return collapse_whitespace(nfc(text)); }

std::string casefold(std::string_view text) {
  icu::UnicodeString u = to_unicode(text);
  u.foldCase(U_FOLD_CASE_DEFAULT);
  return to_utf8(u);
}

std::string normalize_member(std::string_view s) {
  // Folding can produce decomposed sequences, so compose afterwards.
  return collapse_whitespace(nfc(casefold(nfc(s))));
}

std::vector<std::string> tokenize(std::string_view text) {
  const std::vector<CodePoint> cps = decode(text);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    const UChar32 c = cps[i].value;
    if (c >= 0 && u_isUWhiteSpace(c)) {
      ++i;
      continue;
    }
    if (!is_word_char(c)) {
      tokens.emplace_back(text.substr(cps[i].begin, cps[i].end - cps[i].begin));
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < cps.size()) {
      if (is_word_char(cps[j].value)) {
        ++j;
        continue;
      }
      const bool has_next = j + 1 < cps.size() && is_word_char(cps[j + 1].value);
      if (has_next && is_word_joiner(cps[j].value)) {
        j += 2;
        continue;
      }
      if (has_next && is_digit_joiner(cps[j].value) && u_isdigit(cps[j - 1].value) &&
          u_isdigit(cps[j + 1].value)) {
        j += 2;
        continue;
      }
      break;
    }
    tokens.emplace_back(text.substr(cps[i].begin, cps[j - 1].end - cps[i].begin));
    i = j;
  }
  return tokens;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool suppress_space = true;
  for (const std::string& token : tokens) {
    if (!suppress_space && !is_closing(token)) out.push_back(' ');
    out += token;
    suppress_space = is_opening(token);
  }
  return out;
}

std::string punctuation_to_spaces(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const CodePoint& cp : decode(text)) {
    if (is_word_char(cp.value)) {
      out.append(text.substr(cp.begin, cp.end - cp.begin));
    } else {
      out.push_back(' ');
    }
  }
  return collapse_whitespace(out);
}

bool is_punctuation(std::string_view token) {
  for (const CodePoint& cp : decode(token)) {
    if (cp.value >= 0 && u_isalnum(cp.value)) return false;
  }
  return true;
}

}  // namespace isotrace
