#pragma once

// Type- and token-level counts of how many diacritized variants each bare
// word form has.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "diacritize/corpus.hpp"
#include "diacritize/error.hpp"

namespace diacritize {

class AmbiguityLexicon {
public:
  using Forms = std::map<std::string, std::size_t>;  // diacritized form -> count

  void add(const std::string& bare, const std::string& form, std::size_t count = 1) {
    entries_[bare][form] += count;
    tokens_ += count;
  }

  const std::map<std::string, Forms>& entries() const { return entries_; }
  std::size_t type_count() const { return entries_.size(); }
  std::size_t token_count() const { return tokens_; }
  bool empty() const { return entries_.empty(); }

  const Forms* find(const std::string& bare) const {
    const auto it = entries_.find(bare);
    return it == entries_.end() ? nullptr : &it->second;
  }

private:
  std::map<std::string, Forms> entries_;
  std::size_t tokens_ = 0;
};

/// Word-aligned lexicon over all pairs. Pairs whose two sides disagree on
/// word count are skipped.
inline AmbiguityLexicon build_lexicon(const std::vector<SentencePair>& pairs) {
  AmbiguityLexicon lex;
  for (const auto& p : pairs) {
    const auto src = split_words(p.src);
    const auto tgt = split_words(p.tgt);
    if (src.size() != tgt.size()) continue;
    for (std::size_t i = 0; i < src.size(); ++i) lex.add(src[i], tgt[i]);
  }
  return lex;
}

enum class HistogramMode { kType, kToken };

struct AmbiguityBucket {
  std::size_t type_count = 0;
  double type_pct = 0.0;
  std::size_t token_count = 0;
  double token_pct = 0.0;
};

struct AmbiguityHistogram {
  HistogramMode mode = HistogramMode::kType;
  std::map<std::size_t, AmbiguityBucket> buckets;  // k distinct forms -> counts
  std::size_t max_k = 0;
  std::size_t total_types = 0;
  std::size_t total_tokens = 0;

  /// Share (percent) of bucket k under the histogram's mode.
  double share(std::size_t k) const {
    const auto it = buckets.find(k);
    if (it == buckets.end()) return 0.0;
    return mode == HistogramMode::kType ? it->second.type_pct : it->second.token_pct;
  }

  /// `k,type_count,type_pct,token_count,token_pct` rows sorted by k.
  std::string to_csv() const {
    std::string out = "k,type_count,type_pct,token_count,token_pct\n";
    char buf[160];
    for (const auto& [k, b] : buckets) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.2f,%zu,%.2f\n", k, b.type_count, b.type_pct,
                    b.token_count, b.token_pct);
      out += buf;
    }
    return out;
  }
};

/// Buckets keys by their number of distinct diacritized forms. Both type and
/// token columns are always filled; `mode` selects which one share() reports.
inline AmbiguityHistogram histogram(const AmbiguityLexicon& lex, HistogramMode mode) {
  if (lex.empty()) throw InputError("ambiguity histogram of an empty lexicon");
  AmbiguityHistogram h;
  h.mode = mode;
  for (const auto& [bare, forms] : lex.entries()) {
    std::size_t tokens = 0;
    for (const auto& [form, count] : forms) tokens += count;
    auto& b = h.buckets[forms.size()];
    b.type_count += 1;
    b.token_count += tokens;
    h.total_types += 1;
    h.total_tokens += tokens;
  }
  for (auto& [k, b] : h.buckets) {
    b.type_pct = 100.0 * static_cast<double>(b.type_count) / static_cast<double>(h.total_types);
    b.token_pct =
        100.0 * static_cast<double>(b.token_count) / static_cast<double>(h.total_tokens);
  }
  h.max_k = h.buckets.rbegin()->first;
  return h;
}

}  // namespace diacritize
