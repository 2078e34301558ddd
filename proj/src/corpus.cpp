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

#include "isotrace/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "isotrace/error.hpp"
#include "isotrace/text.hpp"
#include "json.hpp"

namespace isotrace {

namespace fs = std::filesystem;

std::string_view to_string(Membership m) {
  return m == Membership::kMember ? "member" : "nonmember";
}

DataEntry DataEntry::make(std::string id, std::string_view text, std::optional<Membership> label) {
  DataEntry entry;
  entry.id = std::move(id);
  entry.text = normalize_text(text);
  if (entry.text.empty()) throw DatasetError("entry '" + entry.id + "' has empty text");
  entry.tokens = tokenize(entry.text);
  entry.label = label;
  return entry;
}

SuspectedDataset::SuspectedDataset(std::vector<DataEntry> entries, std::string source_tag)
    : entries_(std::move(entries)), source_tag_(std::move(source_tag)) {
  if (entries_.empty()) {
    throw DatasetError("dataset '" + source_tag_ + "' is empty", "a dataset needs at least one entry");
  }
  std::set<std::string_view> seen;
  for (const DataEntry& e : entries_) {
    if (!seen.insert(e.id).second) {
      throw DatasetError("duplicate entry id '" + e.id + "' in '" + source_tag_ + "'");
    }
  }
}

const DataEntry* SuspectedDataset::find(std::string_view id) const {
  for (const DataEntry& e : entries_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::optional<DatasetFormat> parse_dataset_format(std::string_view name) {
  if (name == "jsonl") return DatasetFormat::kJsonl;
  if (name == "plain-dir") return DatasetFormat::kPlainDir;
  return std::nullopt;
}

SuspectedDataset parse_jsonl_dataset(std::istream& in, std::string source_tag) {
  std::vector<DataEntry> entries;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (normalize_text(line).empty()) continue;
    const std::string where = source_tag + ":" + std::to_string(line_number);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw DatasetError("malformed record at line " + std::to_string(line_number) + " (" + where +
                         "): not valid JSON");
    }
    if (!record.is_object() || !record.contains("id") || !record["id"].is_string() ||
        !record.contains("text") || !record["text"].is_string()) {
      throw DatasetError("malformed record at line " + std::to_string(line_number) + " (" + where +
                         "): fields id and text must be strings");
    }
    std::optional<Membership> label;
    if (record.contains("label") && !record["label"].is_null()) {
      const auto& l = record["label"];
      if (l == "member") {
        label = Membership::kMember;
      } else if (l == "nonmember") {
        label = Membership::kNonMember;
      } else {
        throw DatasetError("malformed record at line " + std::to_string(line_number) + " (" +
                           where + "): label must be \"member\" or \"nonmember\"");
      }
    }
    try {
      entries.push_back(DataEntry::make(record["id"].get<std::string>(),
                                        record["text"].get<std::string>(), label));
    } catch (const DatasetError& e) {
      throw DatasetError(std::string(e.what()) + " at line " + std::to_string(line_number));
    }
  }
  return SuspectedDataset(std::move(entries), std::move(source_tag));
}

SuspectedDataset load_dataset(const fs::path& path, DatasetFormat format) {
  if (!fs::exists(path)) {
    throw DatasetError("dataset path " + path.string() + " does not exist");
  }
  if (format == DatasetFormat::kJsonl) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open " + path.string());
    return parse_jsonl_dataset(in, path.string());
  }
  if (!fs::is_directory(path)) {
    throw DatasetError(path.string() + " is not a directory", "plain-dir expects a directory of *.txt");
  }
  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(path)) {
    if (item.is_regular_file() && item.path().extension() == ".txt") files.push_back(item.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<DataEntry> entries;
  for (const fs::path& file : files) {
    std::ifstream in(file);
    std::stringstream buffer;
    buffer << in.rdbuf();
    entries.push_back(DataEntry::make(file.stem().string(), buffer.str()));
  }
  return SuspectedDataset(std::move(entries), path.string());
}

std::vector<Fragment> extract_fragments(const DataEntry& entry, const Lexicon& lexicon,
                                        std::size_t window) {
  if (window == 0) throw DatasetError("context window must be at least 1");
  const std::vector<std::string>& tokens = entry.tokens;
  const std::span<const std::string> all(tokens);
  std::vector<Fragment> fragments;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_punctuation(tokens[i])) continue;
    const auto pos = lexicon.unambiguous_pos(tokens[i]);
    if (!pos) continue;
    const std::size_t left_begin = i > window ? i - window : 0;
    const std::size_t right_end = std::min(tokens.size(), i + 1 + window);
    Fragment f;
    f.entry_id = entry.id;
    f.span = {i, i + 1};
    f.surface = tokens[i];
    f.pos = *pos;
    f.left_context = detokenize(all.subspan(left_begin, i - left_begin));
    f.right_context = detokenize(all.subspan(i + 1, right_end - i - 1));
    fragments.push_back(std::move(f));
  }
  return fragments;
}

}  // namespace isotrace
