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

#ifndef ISOTRACE_TEXT_HPP_
#define ISOTRACE_TEXT_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace isotrace {

// NFC-normalizes `text`, collapses every whitespace run to a single ASCII
// space and trims both ends. Invalid UTF-8 sequences are replaced by U+FFFD.
std::string normalize_text(std::string_view text);

// Unicode default case folding. Does not normalize.
std::string casefold(std::string_view text);

// Canonical form used to compare isotope group members and probe answers:
// case-folded, NFC, trimmed, internal whitespace collapsed. Idempotent.
std::string normalize_member(std::string_view s);

// Whitespace-and-punctuation segmentation of (already normalized) text.
//
// Word tokens are maximal runs of letters, digits and combining marks.
// A hyphen or apostrophe between two word characters joins them
// ("state-of-the-art", "don't"); so does '.' or ',' between two digits
// ("3.14", "1,000"). Every other non-space code point is a token by itself.
std::vector<std::string> tokenize(std::string_view text);

// Joins tokens with single spaces, omitting the space before closing
// punctuation and after opening brackets. tokenize(detokenize(t)) == t for
// any tokenization t, and detokenize(tokenize(s)) equals s up to whitespace.
std::string detokenize(std::span<const std::string> tokens);

// Replaces every code point that is not a letter, digit or combining mark
// with a space, then collapses and trims whitespace.
std::string punctuation_to_spaces(std::string_view text);

// True when the token contains no letter or digit.
bool is_punctuation(std::string_view token);

}  // namespace isotrace

#endif  // ISOTRACE_TEXT_HPP_
