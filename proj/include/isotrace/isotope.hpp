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

#ifndef ISOTRACE_ISOTOPE_HPP_
#define ISOTRACE_ISOTOPE_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "isotrace/corpus.hpp"
#include "isotrace/lexicon.hpp"

namespace isotrace {

inline constexpr std::size_t kDefaultMaxGroupSize = 6;

// A target fragment and the interchangeable expressions it is hidden among.
// Members are pairwise distinct under normalize_member.
struct IsotopeGroup {
  Fragment fragment;
  std::vector<std::string> alternates;

  std::size_t group_size() const { return 1 + alternates.size(); }
  // Target first, then alternates in rank order.
  std::vector<std::string> members() const;
};

// How well `candidate` fills the fragment's slot given its surrounding
// context. Larger is better; only the ordering matters.
class ContextScorer {
 public:
  virtual ~ContextScorer() = default;
  virtual double fit(const Fragment& fragment, std::string_view candidate) const = 0;
};

// Scores every candidate equally, leaving the lexicographic tie-break.
class FlatScorer final : public ContextScorer {
 public:
  double fit(const Fragment&, std::string_view) const override { return 0.0; }
};

// Keeps the top (max_group_size - 1) same-POS synonyms of the fragment,
// ranked by `scorer` (descending) and then by normalized form. Throws
// NoIsotopesError when no synonym survives the distinctness filter, and
// std::invalid_argument when max_group_size < 2.
IsotopeGroup generate_group(const Fragment& fragment, const Lexicon& lexicon,
                            const ContextScorer& scorer,
                            std::size_t max_group_size = kDefaultMaxGroupSize);

}  // namespace isotrace

#endif  // ISOTRACE_ISOTOPE_HPP_
