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

#include "isotrace/lexicon.hpp"

#include <algorithm>
#include <fstream>

#include "isotrace/error.hpp"
#include "isotrace/text.hpp"
#include "json.hpp"

namespace isotrace {

std::string_view to_string(PosCategory pos) {
  switch (pos) {
    case PosCategory::kNoun:
      return "NN";
    case PosCategory::kVerb:
      return "VB";
    case PosCategory::kAdjective:
      return "JJ";
    case PosCategory::kAdverb:
      return "RB";
  }
  return "??";
}

std::optional<PosCategory> parse_pos(std::string_view tag) {
  for (PosCategory pos : kAllPosCategories) {
    if (to_string(pos) == tag) return pos;
  }
  return std::nullopt;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw LexiconError("cannot open lexicon file " + path.string(),
                       "check the lexicon path in the config");
  }
  return parse(in, path.string());
}

Lexicon Lexicon::parse(std::istream& in, std::string_view source_name) {
  Lexicon lexicon;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (normalize_text(line).empty()) continue;
    const std::string where = std::string(source_name) + ":" + std::to_string(line_number);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw LexiconError("malformed lexicon record at " + where + ": " + e.what());
    }
    if (!record.is_object() || !record.contains("word") || !record["word"].is_string() ||
        !record.contains("pos") || !record["pos"].is_string()) {
      throw LexiconError("lexicon record at " + where + " needs string fields word and pos");
    }
    const auto pos = parse_pos(record["pos"].get<std::string>());
    if (!pos) {
      throw LexiconError("unknown pos '" + record["pos"].get<std::string>() + "' at " + where);
    }
    std::vector<std::string> synonyms;
    if (record.contains("synonyms")) {
      if (!record["synonyms"].is_array()) {
        throw LexiconError("synonyms must be an array at " + where);
      }
      for (const auto& s : record["synonyms"]) {
        if (!s.is_string()) throw LexiconError("non-string synonym at " + where);
        synonyms.push_back(s.get<std::string>());
      }
    }
    lexicon.add(record["word"].get<std::string>(), *pos, synonyms);
  }
  return lexicon;
}

void Lexicon::add(std::string_view word, PosCategory pos, const std::vector<std::string>& synonyms) {
  const std::string key = normalize_member(word);
  if (key.empty()) return;
  categories_[key].insert(pos);
  surfaces_.insert(normalize_text(word));
  auto& list = synonyms_[{key, pos}];
  for (const std::string& raw : synonyms) {
    const std::string surface = normalize_text(raw);
    const std::string norm = normalize_member(surface);
    if (norm.empty()) continue;
    categories_[norm].insert(pos);
    surfaces_.insert(surface);
    const bool seen = std::any_of(list.begin(), list.end(), [&](const std::string& s) {
      return normalize_member(s) == norm;
    });
    if (!seen) list.push_back(surface);
  }
}

std::optional<PosCategory> Lexicon::unambiguous_pos(std::string_view word) const {
  auto it = categories_.find(normalize_member(word));
  if (it == categories_.end() || it->second.size() != 1) return std::nullopt;
  return *it->second.begin();
}

bool Lexicon::has_pos(std::string_view word, PosCategory pos) const {
  auto it = categories_.find(normalize_member(word));
  return it != categories_.end() && it->second.contains(pos);
}

std::vector<std::string> Lexicon::synonyms(std::string_view word, PosCategory pos) const {
  auto it = synonyms_.find({normalize_member(word), pos});
  if (it == synonyms_.end()) return {};
  return it->second;
}

std::vector<std::string> Lexicon::surfaces() const {
  return {surfaces_.begin(), surfaces_.end()};
}

std::vector<std::string> Lexicon::head_words(PosCategory pos) const {
  std::vector<std::string> out;
  for (const auto& [key, list] : synonyms_) {
    if (key.second == pos && !list.empty()) out.push_back(key.first);
  }
  return out;
}

}  // namespace isotrace
