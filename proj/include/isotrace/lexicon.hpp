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

#ifndef ISOTRACE_LEXICON_HPP_
#define ISOTRACE_LEXICON_HPP_

#include <array>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace isotrace {

// Content-word classes that fragments are drawn from.
enum class PosCategory { kNoun, kVerb, kAdjective, kAdverb };

inline constexpr std::array<PosCategory, 4> kAllPosCategories = {
    PosCategory::kNoun, PosCategory::kVerb, PosCategory::kAdjective, PosCategory::kAdverb};

// "NN", "VB", "JJ", "RB".
std::string_view to_string(PosCategory pos);
std::optional<PosCategory> parse_pos(std::string_view tag);

// Word -> POS table plus POS-filtered synonym sets.
//
// Backed by the JSONL lexicon file, one object per line:
//   {"word": "ship", "pos": "NN", "synonyms": ["vessel", "boat"]}
// A synonym inherits the POS of its head word. Keys are compared after
// normalize_member; synonym surfaces are kept verbatim. Repeated
// (word, pos) lines merge their synonym lists.
class Lexicon {
 public:
  static Lexicon load(const std::filesystem::path& path);
  static Lexicon parse(std::istream& in, std::string_view source_name = "<stream>");

  void add(std::string_view word, PosCategory pos, const std::vector<std::string>& synonyms);

  // The single category `word` is known under; nullopt when the word is
  // unknown or ambiguous (listed under two or more categories).
  std::optional<PosCategory> unambiguous_pos(std::string_view word) const;

  bool has_pos(std::string_view word, PosCategory pos) const;

  // Synonyms of `word` under `pos`, in first-seen order, deduplicated by
  // normalized form. Empty when the word has no entry for that category.
  std::vector<std::string> synonyms(std::string_view word, PosCategory pos) const;

  // Every surface form known to the lexicon (head words and synonyms).
  std::vector<std::string> surfaces() const;

  // Normalized head words that have a synonym list under `pos`, sorted.
  std::vector<std::string> head_words(PosCategory pos) const;

  std::size_t entry_count() const { return synonyms_.size(); }

 private:
  std::map<std::string, std::set<PosCategory>> categories_;
  std::map<std::pair<std::string, PosCategory>, std::vector<std::string>> synonyms_;
  std::set<std::string> surfaces_;
};

}  // namespace isotrace

#endif  // ISOTRACE_LEXICON_HPP_
