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

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "isotrace/text.hpp"
#include "property.hpp"

namespace isotrace {
namespace {

using Tokens = std::vector<std::string>;

TEST(Tokenize, SplitsWordsAndPunctuation) {
  EXPECT_EQ(tokenize("The cat sat."), (Tokens{"The", "cat", "sat", "."}));
  EXPECT_EQ(tokenize(""), Tokens{});
  EXPECT_EQ(tokenize("   \t\n "), Tokens{});
}

TEST(Tokenize, KeepsHyphenatedCompoundsWhole) {
  EXPECT_EQ(tokenize("state-of-the-art AI"), (Tokens{"state-of-the-art", "AI"}));
  EXPECT_EQ(tokenize("well - known"), (Tokens{"well", "-", "known"}));
  EXPECT_EQ(tokenize("end-"), (Tokens{"end", "-"}));
}

TEST(Tokenize, ApostrophesAndNumbers) {
  EXPECT_EQ(tokenize("don't stop"), (Tokens{"don't", "stop"}));
  EXPECT_EQ(tokenize("it\xE2\x80\x99s"), (Tokens{"it\xE2\x80\x99s"}));
  EXPECT_EQ(tokenize("pi is 3.14, not 1,000."),
            (Tokens{"pi", "is", "3.14", ",", "not", "1,000", "."}));
  EXPECT_EQ(tokenize("v2.x"), (Tokens{"v2", ".", "x"}));
}

TEST(Tokenize, QuotesAndBrackets) {
  EXPECT_EQ(tokenize("\"Hi\" (there)!"), (Tokens{"\"", "Hi", "\"", "(", "there", ")", "!"}));
}

TEST(Tokenize, NonAsciiLetters) {
  EXPECT_EQ(tokenize("café über naïve"), (Tokens{"café", "über", "naïve"}));
  // Decomposed e + combining acute stays one token.
  EXPECT_EQ(tokenize("cafe\xCC\x81 ok"), (Tokens{"cafe\xCC\x81", "ok"}));
}

TEST(NormalizeText, ComposesAndCollapsesWhitespace) {
  EXPECT_EQ(normalize_text("  a\t\tb \n c  "), "a b c");
  EXPECT_EQ(normalize_text("cafe\xCC\x81"), "caf\xC3\xA9");
  EXPECT_EQ(normalize_text(""), "");
}

TEST(NormalizeMember, Examples) {
  EXPECT_EQ(normalize_member("Vessel "), "vessel");
  EXPECT_EQ(normalize_member("nai\xCC\x88ve"), "na\xC3\xAFve");
  EXPECT_EQ(normalize_member("  Big   SHIP "), "big ship");
  EXPECT_EQ(normalize_member("STRASSE"), "strasse");
  EXPECT_EQ(normalize_member("Stra\xC3\x9F" "e"), "strasse");
}

TEST(NormalizeMember, Idempotent) {
  Rng rng(11);
  for (std::size_t i = 0; i < testing::kPropertyCases; ++i) {
    const std::string s = testing::messy_text(rng);
    const std::string once = normalize_member(s);
    EXPECT_EQ(normalize_member(once), once) << "input: " << s;
  }
}

TEST(Detokenize, AttachesClosingPunctuation) {
  EXPECT_EQ(detokenize(Tokens{"The", "cat", "sat", "."}), "The cat sat.");
  EXPECT_EQ(detokenize(Tokens{"(", "a", ")", ",", "b"}), "(a), b");
  EXPECT_EQ(detokenize(Tokens{}), "");
}

// Removes every space so the comparison is "up to whitespace".
std::string squeeze(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c != ' ') out.push_back(c);
  }
  return out;
}

TEST(Detokenize, RoundTripsThroughTokenize) {
  Rng rng(12);
  for (std::size_t i = 0; i < testing::kPropertyCases; ++i) {
    const std::string text = normalize_text(testing::messy_text(rng));
    const Tokens tokens = tokenize(text);
    const std::string joined = detokenize(tokens);
    EXPECT_EQ(squeeze(joined), squeeze(text)) << "input: " << text;
    EXPECT_EQ(tokenize(joined), tokens) << "input: " << text;
  }
}

TEST(Tokenize, Deterministic) {
  Rng rng(13);
  for (std::size_t i = 0; i < 50; ++i) {
    const std::string text = testing::messy_text(rng);
    EXPECT_EQ(tokenize(text), tokenize(text));
  }
}

TEST(Punctuation, Classification) {
  EXPECT_TRUE(is_punctuation("."));
  EXPECT_TRUE(is_punctuation("\xE2\x80\x94"));
  EXPECT_FALSE(is_punctuation("a"));
  EXPECT_FALSE(is_punctuation("3.14"));
  EXPECT_EQ(punctuation_to_spaces("**Vessel**, maybe."), "Vessel maybe");
}

}  // namespace
}  // namespace isotrace
