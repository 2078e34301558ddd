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

#include "isotrace/selector.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "isotrace/text.hpp"

namespace isotrace {

TokenSequence proxy_tokens(std::string_view text) {
  TokenSequence out = tokenize(normalize_text(text));
  for (std::string& t : out) t = normalize_member(t);
  return out;
}

ProxyPair ProxyPair::fit(std::span<const TokenSequence> background,
                         std::span<const TokenSequence> suspected, int order, double delta,
                         std::span<const std::string> extra_vocabulary) {
  std::set<std::string> vocabulary;
  for (const std::string& w : extra_vocabulary) {
    for (std::string& t : proxy_tokens(w)) vocabulary.insert(std::move(t));
  }
  for (const auto* part : {&background, &suspected}) {
    for (const TokenSequence& s : *part) vocabulary.insert(s.begin(), s.end());
  }
  const std::vector<std::string> shared(vocabulary.begin(), vocabulary.end());

  std::vector<TokenSequence> combined(background.begin(), background.end());
  combined.insert(combined.end(), suspected.begin(), suspected.end());
  NGramModel unexposed = NGramModel::fit(background, order, delta, shared);
  NGramModel exposed = NGramModel::fit(combined, order, delta, shared);
  return ProxyPair(std::move(exposed), std::move(unexposed));
}

std::vector<double> group_recovery_probabilities(const NGramModel& model,
                                                 const IsotopeGroup& group) {
  const TokenSequence left = proxy_tokens(group.fragment.left_context);
  std::vector<double> logs;
  for (const std::string& member : group.members()) {
    logs.push_back(model.sequence_log_probability(left, proxy_tokens(member)));
  }
  const double peak = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (double& l : logs) {
    l = std::exp(l - peak);
    total += l;
  }
  for (double& l : logs) l /= total;
  return logs;
}

SensitivityScore score_fragment(const ProxyPair& pair, const IsotopeGroup& group) {
  const double exposed = group_recovery_probabilities(pair.exposed(), group).front();
  const double unexposed = group_recovery_probabilities(pair.unexposed(), group).front();
  return {{group.fragment.entry_id, group.fragment.span}, exposed - unexposed};
}

std::map<std::string, EntrySelection> select_top(std::span<const SensitivityScore> scores,
                                                 std::size_t per_entry) {
  if (per_entry == 0) throw std::invalid_argument("select_top: per_entry must be at least 1");
  std::map<std::string, std::vector<const SensitivityScore*>> by_entry;
  for (const SensitivityScore& s : scores) by_entry[s.fragment.entry_id].push_back(&s);

  std::map<std::string, EntrySelection> out;
  for (auto& [entry_id, list] : by_entry) {
    std::sort(list.begin(), list.end(), [](const SensitivityScore* a, const SensitivityScore* b) {
      if (a->delta != b->delta) return a->delta > b->delta;
      return a->fragment.span < b->fragment.span;
    });
    EntrySelection selection;
    selection.shortfall = list.size() < per_entry;
    for (std::size_t i = 0; i < list.size() && i < per_entry; ++i) {
      selection.fragments.push_back(list[i]->fragment);
    }
    out.emplace(entry_id, std::move(selection));
  }
  return out;
}

double NGramContextScorer::fit(const Fragment& fragment, std::string_view candidate) const {
  TokenSequence history = proxy_tokens(fragment.left_context);
  const TokenSequence words = proxy_tokens(candidate);
  double score = model_.sequence_log_probability(history, words);
  history.insert(history.end(), words.begin(), words.end());
  TokenSequence right = proxy_tokens(fragment.right_context);
  const auto lookahead = static_cast<std::size_t>(std::max(0, model_.order() - 1));
  if (right.size() > lookahead) right.resize(lookahead);
  return score + model_.sequence_log_probability(history, right);
}

}  // namespace isotrace
