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

#include "isotrace/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "isotrace/error.hpp"

namespace isotrace {
namespace {

constexpr char kSeparator = '\x1f';

std::string join_context(std::span<const std::string> context) {
  std::string key;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i > 0) key.push_back(kSeparator);
    key += context[i];
  }
  return key;
}

}  // namespace

NGramModel NGramModel::fit(std::span<const TokenSequence> corpus, int order, double delta,
                           std::span<const std::string> extra_vocabulary) {
  if (order < 1) throw ModelError("n-gram order must be at least 1");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ModelError("smoothing delta must be positive");
  NGramModel model(order, delta);
  std::set<std::string> vocabulary(extra_vocabulary.begin(), extra_vocabulary.end());
  std::size_t token_total = 0;
  for (const TokenSequence& sequence : corpus) {
    token_total += sequence.size();
    const std::span<const std::string> tokens(sequence);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      vocabulary.insert(tokens[i]);
      const std::size_t max_history = std::min<std::size_t>(order - 1, i);
      for (std::size_t k = 0; k <= max_history; ++k) {
        ContextCounts& counts = model.counts_[join_context(tokens.subspan(i - k, k))];
        ++counts.total;
        ++counts.next[tokens[i]];
      }
    }
  }
  if (token_total == 0) throw ModelError("cannot fit an n-gram model on an empty corpus");
  model.vocabulary_.assign(vocabulary.begin(), vocabulary.end());
  return model;
}

const NGramModel::ContextCounts* NGramModel::lookup(std::span<const std::string> context) const {
  const std::size_t k = std::min<std::size_t>(order_ - 1, context.size());
  auto it = counts_.find(join_context(context.last(k)));
  return it == counts_.end() ? nullptr : &it->second;
}

double NGramModel::probability(std::span<const std::string> context, std::string_view word) const {
  const double v = static_cast<double>(vocabulary_.size());
  const ContextCounts* counts = lookup(context);
  if (counts == nullptr) return 1.0 / v;
  double hits = 0.0;
  if (auto it = counts->next.find(std::string(word)); it != counts->next.end()) {
    hits = static_cast<double>(it->second);
  }
  return (hits + delta_) / (static_cast<double>(counts->total) + delta_ * v);
}

double NGramModel::log_probability(std::span<const std::string> context,
                                   std::string_view word) const {
  return std::log(probability(context, word));
}

double NGramModel::sequence_log_probability(std::span<const std::string> context,
                                            std::span<const std::string> words) const {
  std::vector<std::string> history(context.begin(), context.end());
  double total = 0.0;
  for (const std::string& w : words) {
    total += log_probability(history, w);
    history.push_back(w);
  }
  return total;
}

}  // namespace isotrace
