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


#ifndef ISOTRACE_SYNTHETIC_HPP_
#define ISOTRACE_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isotrace/corpus.hpp"
#include "isotrace/lexicon.hpp"

namespace isotrace {

// Template sentences whose content-word slots are filled with lexicon head
// words, for demos and end-to-end tests.
struct SyntheticCorpusOptions {
  std::size_t entries = 100;
  std::size_t sentences_per_entry = 4;
  std::uint64_t seed = 0;
  std::string id_prefix = "doc";
};

// Throws LexiconError when a category has no head words.
std::vector<std::string> synthetic_texts(const Lexicon& lexicon,
                                         const SyntheticCorpusOptions& options);

// Entries "<prefix>-0000", "<prefix>-0001", ... carrying `label`.
std::vector<DataEntry> synthetic_entries(const Lexicon& lexicon,
                                         const SyntheticCorpusOptions& options,
                                         std::optional<Membership> label = std::nullopt);

}  // namespace isotrace

#endif  // ISOTRACE_SYNTHETIC_HPP_
