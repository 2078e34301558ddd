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

#ifndef ISOTRACE_NGRAM_HPP_
#define ISOTRACE_NGRAM_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace isotrace {

using TokenSequence = std::vector<std::string>;

// Count-based n-gram model with additive smoothing:
//
//   P(w | h) = (c(h, w) + delta) / (c(h) + delta * V)
//
// where c(h) counts occurrences of h followed by any token and V is the
// vocabulary size. Counts are kept for every context length 0..order-1, and a
// query uses the last min(order-1, |context|) context tokens. A context that
// never occurred yields the uniform 1/V distribution. Sequences are not
// padded; tokens are matched verbatim.
class NGramModel {
 public:
  // Throws ModelError on an empty corpus (no tokens at all), order < 1 or
  // delta <= 0. The vocabulary is every corpus token plus `extra_vocabulary`.
  static NGramModel fit(std::span<const TokenSequence> corpus, int order, double delta,
                        std::span<const std::string> extra_vocabulary = {});

  int order() const { return order_; }
  double delta() const { return delta_; }
  std::size_t vocabulary_size() const { return vocabulary_.size(); }
  // Sorted.
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }

  double probability(std::span<const std::string> context, std::string_view word) const;
  double log_probability(std::span<const std::string> context, std::string_view word) const;

  // Chain-rule log probability of `words` following `context`.
  double sequence_log_probability(std::span<const std::string> context,
                                  std::span<const std::string> words) const;

 private:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::unordered_map<std::string, std::uint64_t> next;
  };

  NGramModel(int order, double delta) : order_(order), delta_(delta) {}
  const ContextCounts* lookup(std::span<const std::string> context) const;

  int order_;
  double delta_;
  std::vector<std::string> vocabulary_;
  // Keyed by the context tokens joined with '\x1f'.
  std::unordered_map<std::string, ContextCounts> counts_;
};

}  // namespace isotrace

#endif  // ISOTRACE_NGRAM_HPP_
