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

#ifndef ISOTRACE_CORPUS_HPP_
#define ISOTRACE_CORPUS_HPP_

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isotrace/lexicon.hpp"

namespace isotrace {

enum class Membership { kMember, kNonMember };

std::string_view to_string(Membership m);

// One suspected text. `text` is normalized; `tokens` is its tokenization and
// token_count() is the entry length.
struct DataEntry {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  // Evaluation-only ground truth.
  std::optional<Membership> label;

  std::size_t token_count() const { return tokens.size(); }

  // Normalizes and tokenizes `text`. Throws DatasetError if nothing is left.
  static DataEntry make(std::string id, std::string_view text,
                        std::optional<Membership> label = std::nullopt);
};

// Ordered, id-unique collection of entries (K = size()).
class SuspectedDataset {
 public:
  SuspectedDataset() = default;
  // Throws DatasetError on an empty list or duplicate ids.
  SuspectedDataset(std::vector<DataEntry> entries, std::string source_tag);

  const std::vector<DataEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const std::string& source_tag() const { return source_tag_; }
  const DataEntry* find(std::string_view id) const;

 private:
  std::vector<DataEntry> entries_;
  std::string source_tag_;
};

enum class DatasetFormat { kJsonl, kPlainDir };

std::optional<DatasetFormat> parse_dataset_format(std::string_view name);

// Loads a dataset in file order (JSONL) or lexicographic filename order
// (plain-dir, one *.txt per entry, id = filename stem).
SuspectedDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
SuspectedDataset parse_jsonl_dataset(std::istream& in, std::string source_tag);

// Half-open token interval [start, end).
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
  friend auto operator<=>(const TokenSpan&, const TokenSpan&) = default;
};

// A candidate target inside an entry, with up to `window` tokens of context
// on each side (clipped at the entry boundaries).
struct Fragment {
  std::string entry_id;
  TokenSpan span;
  std::string surface;
  PosCategory pos;
  std::string left_context;
  std::string right_context;

  friend bool operator==(const Fragment&, const Fragment&) = default;
};

inline constexpr std::size_t kDefaultContextWindow = 24;

// Every single-token content word whose lexicon category is unambiguous.
// Throws DatasetError when window == 0.
std::vector<Fragment> extract_fragments(const DataEntry& entry, const Lexicon& lexicon,
                                        std::size_t window = kDefaultContextWindow);

}  // namespace isotrace

#endif  // ISOTRACE_CORPUS_HPP_
