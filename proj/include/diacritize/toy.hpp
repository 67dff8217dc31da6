#pragma once

// Synthetic diacritized corpora with a fully deterministic marking rule:
// every consonant is followed by one fixed mark chosen by the consonant.

#include <array>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "diacritize/random.hpp"
#include "diacritize/unicode.hpp"

namespace diacritize::toy {

struct ToyRule {
  char32_t consonant;
  char32_t mark;
};

inline constexpr std::array<ToyRule, 12> kRules = {{
    {U'ب', U'َ'},  // ba + fatha
    {U'ت', U'ِ'},  // ta + kasra
    {U'ج', U'ُ'},  // jim + damma
    {U'د', U'ْ'},  // dal + sukun
    {U'ر', U'َ'},
    {U'س', U'ِ'},
    {U'ك', U'ُ'},
    {U'ل', U'َ'},
    {U'م', U'ِ'},
    {U'ن', U'ُ'},
    {U'ه', U'ْ'},
    {U'و', U'َ'},
}};

struct ToyShape {
  std::size_t min_words = 1;
  std::size_t max_words = 3;
  std::size_t min_letters = 2;
  std::size_t max_letters = 4;
};

/// Applies the rule to bare text: a mark after each known consonant.
inline std::string diacritize(const std::string& bare) {
  std::vector<unicode::Codepoint> out;
  for (char32_t cp : unicode::decode(bare)) {
    out.push_back(cp);
    for (const auto& r : kRules) {
      if (r.consonant == cp) {
        out.push_back(r.mark);
        break;
      }
    }
  }
  return unicode::encode(out);
}

/// One diacritized sentence.
inline std::string sentence(Rng& rng, const ToyShape& shape = {}) {
  const auto span = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform_index(hi - lo + 1));
  };
  std::string bare;
  const std::size_t words = span(shape.min_words, shape.max_words);
  for (std::size_t w = 0; w < words; ++w) {
    if (w) bare += ' ';
    const std::size_t letters = span(shape.min_letters, shape.max_letters);
    for (std::size_t i = 0; i < letters; ++i) {
      unicode::append(bare, kRules[rng.uniform_index(kRules.size())].consonant);
    }
  }
  return diacritize(bare);
}

/// `count` distinct diacritized sentences.
inline std::vector<std::string> corpus(std::size_t count, uint64_t seed, const ToyShape& shape = {},
                                       const std::vector<std::string>& exclude = {}) {
  Rng rng(seed);
  std::vector<std::string> out;
  std::set<std::string> seen(exclude.begin(), exclude.end());
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 1000 * (count + 1)) throw std::runtime_error("toy corpus: shape too small");
    std::string s = sentence(rng, shape);
    if (!seen.insert(s).second) continue;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace diacritize::toy
