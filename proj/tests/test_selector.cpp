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

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "isotrace/error.hpp"
#include "isotrace/ngram.hpp"
#include "isotrace/selector.hpp"
#include "property.hpp"

namespace isotrace {
namespace {

using Strings = std::vector<std::string>;

TEST(NGram, HandCountedBigram) {
  const std::vector<TokenSequence> corpus = {{"a", "b", "a", "b"}};
  const NGramModel m = NGramModel::fit(corpus, 2, 1.0);
  ASSERT_EQ(m.vocabulary_size(), 2u);
  // "a" is followed by "b" twice and by nothing else: (2 + 1) / (2 + 1 * 2).
  EXPECT_DOUBLE_EQ(m.probability(Strings{"a"}, "b"), 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(m.probability(Strings{"a"}, "a"), 1.0 / 4.0);
  // "b" is followed by "a" once.
  EXPECT_DOUBLE_EQ(m.probability(Strings{"b"}, "a"), 2.0 / 3.0);
  // Unigram: 2 of each in 4 tokens.
  EXPECT_DOUBLE_EQ(m.probability(Strings{}, "a"), 3.0 / 6.0);
}

TEST(NGram, UnseenContextIsUniform) {
  const std::vector<TokenSequence> corpus = {{"a", "b", "c"}};
  const NGramModel m = NGramModel::fit(corpus, 3, 0.5, Strings{"d", "e"});
  EXPECT_EQ(m.vocabulary_size(), 5u);
  EXPECT_DOUBLE_EQ(m.probability(Strings{"c", "a"}, "b"), 1.0 / 5.0);
  EXPECT_DOUBLE_EQ(m.probability(Strings{"zz"}, "e"), 1.0 / 5.0);
}

TEST(NGram, RejectsBadArguments) {
  const std::vector<TokenSequence> corpus = {{"a"}};
  const std::vector<TokenSequence> empty = {{}};
  EXPECT_THROW(NGramModel::fit(corpus, 0, 1.0), ModelError);
  EXPECT_THROW(NGramModel::fit(corpus, 2, 0.0), ModelError);
  EXPECT_THROW(NGramModel::fit(empty, 2, 1.0), ModelError);
}

TEST(NGramProperty, DistributionsSumToOne) {
  Rng rng(41);
  const Strings words = {"a", "b", "c", "d", "e", "f"};
  for (std::size_t i = 0; i < 100; ++i) {
    std::vector<TokenSequence> corpus(testing::between(rng, 1, 4));
    for (auto& s : corpus) {
      const std::size_t n = testing::between(rng, 1, 12);
      for (std::size_t k = 0; k < n; ++k) s.push_back(testing::pick(rng, words));
    }
    const NGramModel m = NGramModel::fit(corpus, static_cast<int>(testing::between(rng, 1, 4)),
                                         testing::uniform(rng, 0.01, 2.0));
    Strings context;
    const std::size_t c = testing::between(rng, 0, 3);
    for (std::size_t k = 0; k < c; ++k) context.push_back(testing::pick(rng, words));
    double total = 0.0;
    for (const std::string& w : m.vocabulary()) total += m.probability(context, w);
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

Fragment fragment_at(const std::string& entry_id, std::size_t start, const std::string& surface,
                     const std::string& left, const std::string& right) {
  Fragment f;
  f.entry_id = entry_id;
  f.span = {start, start + 1};
  f.surface = surface;
  f.pos = PosCategory::kNoun;
  f.left_context = left;
  f.right_context = right;
  return f;
}

IsotopeGroup group_of(Fragment f, Strings alternates) {
  IsotopeGroup g;
  g.fragment = std::move(f);
  g.alternates = std::move(alternates);
  return g;
}

std::vector<TokenSequence> tokens_of(const Strings& texts) {
  std::vector<TokenSequence> out;
  for (const auto& t : texts) out.push_back(proxy_tokens(t));
  return out;
}

TEST(ScoreFragment, ExposureRaisesTargetProbability) {
  const Strings background = {
      "the crew loaded the boat at dawn .",   "a vessel left the harbor .",
      "the boat drifted near the rocks .",    "they painted the craft blue .",
      "the harbor was quiet that night .",    "a storm hit the coast .",
      "the crew rested after the storm .",    "fishermen mended their nets .",
      "the tide rose over the pier .",        "gulls circled above the harbor ."};
  const Strings suspected = {"the old ship sailed at dawn ."};
  const ProxyPair pair = ProxyPair::fit(tokens_of(background), tokens_of(suspected), 3, 0.1,
                                        Strings{"ship", "boat", "vessel", "craft"});
  const IsotopeGroup g =
      group_of(fragment_at("s", 2, "ship", "the old", "sailed at dawn ."), {"boat", "vessel", "craft"});
  const SensitivityScore s = score_fragment(pair, g);
  EXPECT_GT(s.delta, 0.0);
  EXPECT_EQ(s.fragment.entry_id, "s");
  EXPECT_EQ(s.fragment.span, (TokenSpan{2, 3}));

  const auto q = group_recovery_probabilities(pair.exposed(), g);
  ASSERT_EQ(q.size(), 4u);
  double total = 0.0;
  for (double x : q) {
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
    total += x;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ScoreFragment, IdenticalModelsGiveZero) {
  const Strings text = {"the ship sailed .", "the boat sank ."};
  const ProxyPair pair = ProxyPair::fit(tokens_of(text), {}, 3, 0.1);
  const IsotopeGroup g = group_of(fragment_at("s", 1, "ship", "the", "sailed ."), {"boat"});
  EXPECT_DOUBLE_EQ(score_fragment(pair, g).delta, 0.0);
}

TEST(ScoreFragment, UniformProxiesSplitEvenly) {
  // Neither word was ever seen after "zz", so both models are uniform there.
  const Strings text = {"a b c"};
  const ProxyPair pair = ProxyPair::fit(tokens_of(text), tokens_of({"c b a"}), 2, 1.0,
                                        Strings{"ship", "boat"});
  const IsotopeGroup g = group_of(fragment_at("s", 1, "ship", "zz", ""), {"boat"});
  const auto q = group_recovery_probabilities(pair.exposed(), g);
  EXPECT_DOUBLE_EQ(q[0], 0.5);
  EXPECT_DOUBLE_EQ(q[1], 0.5);
  EXPECT_DOUBLE_EQ(score_fragment(pair, g).delta, 0.0);
}

// Brute force over small random corpora: adding the suspected text to the
// exposed proxy never lowers delta for fragments that occur in that text.
// Alternates come from a disjoint alphabet so they never occur in it.
TEST(ScoreFragmentProperty, MonotoneExposure) {
  Rng rng(42);
  const Strings text_words = {"a", "b", "c", "d", "e"};
  const Strings alt_words = {"x", "y", "z"};
  for (std::size_t i = 0; i < testing::kPropertyCases; ++i) {
    std::vector<TokenSequence> background(testing::between(rng, 1, 4));
    for (auto& s : background) {
      const std::size_t n = testing::between(rng, 1, 10);
      for (std::size_t k = 0; k < n; ++k) {
        s.push_back(bernoulli(rng, 0.8) ? testing::pick(rng, text_words)
                                        : testing::pick(rng, alt_words));
      }
    }
    TokenSequence suspected;
    const std::size_t n = testing::between(rng, 2, 12);
    for (std::size_t k = 0; k < n; ++k) suspected.push_back(testing::pick(rng, text_words));
    const int order = static_cast<int>(testing::between(rng, 1, 3));
    const std::vector<TokenSequence> exposed_part = {suspected};
    const ProxyPair pair = ProxyPair::fit(background, exposed_part, order, 0.1, alt_words);

    const std::size_t pos = testing::between(rng, 0, n - 1);
    std::string left;
    for (std::size_t k = 0; k < pos; ++k) left += (k ? " " : "") + suspected[k];
    Strings alternates = alt_words;
    shuffle(alternates, rng);
    alternates.resize(testing::between(rng, 1, alt_words.size()));
    const IsotopeGroup g = group_of(fragment_at("p", pos, suspected[pos], left, ""), alternates);
    EXPECT_GE(score_fragment(pair, g).delta, -1e-12) << "case " << i;
  }
}

SensitivityScore score(const std::string& entry, std::size_t start, double delta) {
  return {{entry, {start, start + 1}}, delta};
}

TEST(SelectTop, KeepsLargestDeltas) {
  std::vector<SensitivityScore> scores;
  for (std::size_t i = 0; i < 10; ++i) scores.push_back(score("e", i, static_cast<double>((i * 7) % 10)));
  const auto sel = select_top(scores, 3);
  const auto& frags = sel.at("e").fragments;
  ASSERT_EQ(frags.size(), 3u);
  // delta 9 at i = 7, 8 at i = 4, 7 at i = 1.
  EXPECT_EQ(frags[0].span.start, 7u);
  EXPECT_EQ(frags[1].span.start, 4u);
  EXPECT_EQ(frags[2].span.start, 1u);
  EXPECT_FALSE(sel.at("e").shortfall);
}

TEST(SelectTop, ShortfallAndTies) {
  const std::vector<SensitivityScore> two = {score("e", 1, 0.2), score("e", 3, 0.1)};
  const auto sel = select_top(two, 5);
  EXPECT_EQ(sel.at("e").fragments.size(), 2u);
  EXPECT_TRUE(sel.at("e").shortfall);

  const std::vector<SensitivityScore> tie = {score("e", 9, 0.3), score("e", 4, 0.3)};
  EXPECT_EQ(select_top(tie, 1).at("e").fragments.front().span.start, 4u);
  EXPECT_THROW(select_top(tie, 0), std::invalid_argument);
}

TEST(SelectTopProperty, PermutationInvariant) {
  Rng rng(43);
  for (std::size_t i = 0; i < testing::kPropertyCases; ++i) {
    std::vector<SensitivityScore> scores;
    const std::size_t n = testing::between(rng, 0, 30);
    for (std::size_t k = 0; k < n; ++k) {
      // Coarse deltas so ties are common.
      scores.push_back(score(testing::pick(rng, Strings{"a", "b", "c"}), k,
                             static_cast<double>(testing::between(rng, 0, 4)) / 4.0));
    }
    const std::size_t m = testing::between(rng, 1, 6);
    const auto expected = select_top(scores, m);
    shuffle(scores, rng);
    const auto actual = select_top(scores, m);
    ASSERT_EQ(expected.size(), actual.size());
    for (const auto& [id, sel] : expected) {
      EXPECT_EQ(actual.at(id).fragments, sel.fragments);
      EXPECT_EQ(actual.at(id).shortfall, sel.shortfall);
    }
  }
}

TEST(ContextScorer, PrefersCandidateSeenInContext) {
  const Strings text = {"the ship sailed home .", "the ship sailed out ."};
  const NGramModel m = NGramModel::fit(tokens_of(text), 3, 0.1, Strings{"boat"});
  const NGramContextScorer scorer(m);
  const Fragment f = fragment_at("s", 1, "ship", "the", "sailed home .");
  EXPECT_GT(scorer.fit(f, "ship"), scorer.fit(f, "boat"));
}

}  // namespace
}  // namespace isotrace
