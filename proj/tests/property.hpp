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


// Hand-rolled generators for property tests. Every generator draws from a
// seeded Rng so a failing case can be replayed from the printed seed.

#ifndef ISOTRACE_TESTS_PROPERTY_HPP_
#define ISOTRACE_TESTS_PROPERTY_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "isotrace/random.hpp"

namespace isotrace::testing {

inline constexpr std::size_t kPropertyCases = 300;

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + uniform_index(rng, hi - lo + 1);
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[uniform_index(rng, items.size())];
}

// Lowercase ASCII word.
inline std::string word(Rng& rng, std::size_t min_len = 1, std::size_t max_len = 8) {
  std::string w;
  const std::size_t n = between(rng, min_len, max_len);
  for (std::size_t i = 0; i < n; ++i) w.push_back(static_cast<char>('a' + uniform_index(rng, 26)));
  return w;
}

// Text mixing words, numbers, punctuation, hyphenated and accented words
// and irregular whitespace.
inline std::string messy_text(Rng& rng, std::size_t max_pieces = 20) {
  static const std::vector<std::string> extras = {
      ",",     ".",     "!",      "?",      ";",     ":",      "(",     ")",     "\"",
      "-",     "3.14",  "1,000",  "don't",  "state-of-the-art", "café", "naïve", "Zoë",
      "über",  "’",     "rock'n'roll", "42",  "—",     "[",      "]",     "x-ray"};
  static const std::vector<std::string> spaces = {" ", "  ", "\t", "\n", " \n "};
  std::string out;
  const std::size_t n = between(rng, 0, max_pieces);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 || bernoulli(rng, 0.3)) out += pick(rng, spaces);
    if (bernoulli(rng, 0.6)) {
      std::string w = word(rng);
      if (bernoulli(rng, 0.2)) w[0] = static_cast<char>(w[0] - 'a' + 'A');
      out += w;
    } else {
      out += pick(rng, extras);
    }
  }
  return out;
}

}  // namespace isotrace::testing

#endif  // ISOTRACE_TESTS_PROPERTY_HPP_
