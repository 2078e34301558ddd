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


#include "isotrace/synthetic.hpp"

#include <array>
#include <cstdio>
#include <map>
#include <string_view>

#include "isotrace/error.hpp"
#include "isotrace/random.hpp"

namespace isotrace {
namespace {

// Slots: {NN} noun, {VB} past-tense verb, {JJ} adjective, {RB} adverb.
constexpr std::array<std::string_view, 8> kTemplates = {
    "The {JJ} {NN} {VB} the {NN} {RB}.",
    "A {NN} {VB} near the {JJ} {NN}.",
    "{RB}, the {NN} {VB} a {JJ} {NN}.",
    "Every {NN} in the {NN} {VB} {RB}.",
    "The {NN} seemed {JJ} after the {NN} {VB}.",
    "Nobody {VB} the {JJ} {NN} until the {NN} {VB} {RB}.",
    "Her {NN} {RB} {VB} our {JJ} {NN}.",
    "Two {JJ} strangers {VB} beside the {NN}.",
};

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

std::vector<std::string> synthetic_texts(const Lexicon& lexicon,
                                         const SyntheticCorpusOptions& options) {
  std::map<std::string_view, std::vector<std::string>> words;
  for (PosCategory pos : kAllPosCategories) {
    std::vector<std::string> heads;
    for (std::string& w : lexicon.head_words(pos)) {
      if (lexicon.unambiguous_pos(w)) heads.push_back(std::move(w));
    }
    if (heads.empty()) {
      throw LexiconError("lexicon has no unambiguous " + std::string(to_string(pos)) + " head words",
                         "add entries for every category");
    }
    words[to_string(pos)] = std::move(heads);
  }

  std::vector<std::string> texts;
  texts.reserve(options.entries);
  for (std::size_t e = 0; e < options.entries; ++e) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(e)));
    std::string text;
    for (std::size_t s = 0; s < options.sentences_per_entry; ++s) {
      const std::string_view tmpl = kTemplates[uniform_index(rng, kTemplates.size())];
      std::string sentence;
      for (std::size_t i = 0; i < tmpl.size();) {
        if (tmpl[i] == '{') {
          const std::size_t close = tmpl.find('}', i);
          const std::vector<std::string>& pool = words.at(tmpl.substr(i + 1, close - i - 1));
          sentence += pool[uniform_index(rng, pool.size())];
          i = close + 1;
        } else {
          sentence.push_back(tmpl[i++]);
        }
      }
      if (!text.empty()) text.push_back(' ');
      text += capitalize(std::move(sentence));
    }
    texts.push_back(std::move(text));
  }
  return texts;
}

std::vector<DataEntry> synthetic_entries(const Lexicon& lexicon,
                                         const SyntheticCorpusOptions& options,
                                         std::optional<Membership> label) {
  std::vector<DataEntry> out;
  std::size_t index = 0;
  for (const std::string& text : synthetic_texts(lexicon, options)) {
    char suffix[24];
    std::snprintf(suffix, sizeof suffix, "-%04zu", index++);
    out.push_back(DataEntry::make(options.id_prefix + suffix, text, label));
  }
  return out;
}

}  // namespace isotrace
