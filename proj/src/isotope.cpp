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

#include "isotrace/isotope.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <tuple>

#include "isotrace/error.hpp"
#include "isotrace/text.hpp"

namespace isotrace {

std::vector<std::string> IsotopeGroup::members() const {
  std::vector<std::string> out;
  out.reserve(group_size());
  out.push_back(fragment.surface);
  out.insert(out.end(), alternates.begin(), alternates.end());
  return out;
}

IsotopeGroup generate_group(const Fragment& fragment, const Lexicon& lexicon,
                            const ContextScorer& scorer, std::size_t max_group_size) {
  if (max_group_size < 2) throw std::invalid_argument("max_group_size must be at least 2");

  struct Candidate {
    double score;
    std::string key;
    std::string surface;
  };
  std::set<std::string> taken = {normalize_member(fragment.surface)};
  std::vector<Candidate> candidates;
  for (const std::string& synonym : lexicon.synonyms(fragment.surface, fragment.pos)) {
    std::string key = normalize_member(synonym);
    if (key.empty() || !lexicon.has_pos(synonym, fragment.pos)) continue;
    if (!taken.insert(key).second) continue;
    candidates.push_back({scorer.fit(fragment, synonym), std::move(key), synonym});
  }
  if (candidates.empty()) {
    throw NoIsotopesError("no viable " + std::string(to_string(fragment.pos)) +
                          " alternate for '" + fragment.surface + "' in entry '" +
                          fragment.entry_id + "'");
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.score, a.key, a.surface) < std::tie(a.score, b.key, b.surface);
  });
  if (candidates.size() > max_group_size - 1) candidates.resize(max_group_size - 1);

  IsotopeGroup group;
  group.fragment = fragment;
  for (Candidate& c : candidates) group.alternates.push_back(std::move(c.surface));
  return group;
}

}  // namespace isotrace
