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

#ifndef ISOTRACE_SELECTOR_HPP_
#define ISOTRACE_SELECTOR_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isotrace/corpus.hpp"
#include "isotrace/isotope.hpp"
#include "isotrace/ngram.hpp"

namespace isotrace {

inline constexpr int kDefaultProxyOrder = 3;
inline constexpr double kDefaultProxyDelta = 0.1;
inline constexpr std::size_t kDefaultFragmentsPerEntry = 8;

// Token stream a proxy sees: tokenize + normalize_member, punctuation kept.
TokenSequence proxy_tokens(std::string_view text);

// Two n-gram proxies that differ only in whether the suspected data was part
// of their training text. Both share one vocabulary, order and delta.
class ProxyPair {
 public:
  // unexposed <- background; exposed <- background + suspected. The shared
  // vocabulary also includes `extra_vocabulary` (normalized).
  static ProxyPair fit(std::span<const TokenSequence> background,
                       std::span<const TokenSequence> suspected, int order = kDefaultProxyOrder,
                       double delta = kDefaultProxyDelta,
                       std::span<const std::string> extra_vocabulary = {});

  const NGramModel& exposed() const { return exposed_; }
  const NGramModel& unexposed() const { return unexposed_; }

 private:
  ProxyPair(NGramModel exposed, NGramModel unexposed)
      : exposed_(std::move(exposed)), unexposed_(std::move(unexposed)) {}

  NGramModel exposed_;
  NGramModel unexposed_;
};

// Group-normalized recovery probability of every member under `model`:
// q(x) = P(x | left context) / sum over members y of P(y | left context).
// Multi-token members use the chain-rule probability. Order follows
// group.members() (target first).
std::vector<double> group_recovery_probabilities(const NGramModel& model,
                                                 const IsotopeGroup& group);

struct FragmentRef {
  std::string entry_id;
  TokenSpan span;

  friend bool operator==(const FragmentRef&, const FragmentRef&) = default;
  friend auto operator<=>(const FragmentRef&, const FragmentRef&) = default;
};

struct SensitivityScore {
  FragmentRef fragment;
  // q_exposed(target) - q_unexposed(target).
  double delta = 0.0;
};

SensitivityScore score_fragment(const ProxyPair& pair, const IsotopeGroup& group);

struct EntrySelection {
  std::vector<FragmentRef> fragments;  // best first
  bool shortfall = false;              // fewer than M scored fragments
};

// Top-M fragments by delta per entry; ties go to the earlier span start.
// Keyed by entry id; independent of the order of `scores`. Throws
// std::invalid_argument when per_entry is 0.
std::map<std::string, EntrySelection> select_top(std::span<const SensitivityScore> scores,
                                                 std::size_t per_entry);

// Ranks isotope candidates by their fit in the masked slot: log P(candidate |
// left context) plus the log probability of the next order-1 right-context
// tokens following it.
class NGramContextScorer final : public ContextScorer {
 public:
  explicit NGramContextScorer(const NGramModel& model) : model_(model) {}
  double fit(const Fragment& fragment, std::string_view candidate) const override;

 private:
  const NGramModel& model_;
};

}  // namespace isotrace

#endif  // ISOTRACE_SELECTOR_HPP_
