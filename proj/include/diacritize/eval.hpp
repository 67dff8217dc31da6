#pragma once

// Word error rate: Levenshtein word alignment, corpus aggregation and the
// two reference points (no prediction, lexicon baseline).

#include <cstdio>
#include <string>
#include <vector>

#include "diacritize/ambiguity.hpp"
#include "diacritize/corpus.hpp"
#include "diacritize/error.hpp"

namespace diacritize {

struct WerCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t correct = 0;

  std::size_t reference_length() const { return substitutions + deletions + correct; }
  std::size_t hypothesis_length() const { return substitutions + insertions + correct; }
  std::size_t errors() const { return substitutions + deletions + insertions; }

  WerCounts& operator+=(const WerCounts& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    correct += o.correct;
    return *this;
  }

  friend bool operator==(const WerCounts&, const WerCounts&) = default;
};

/// Minimal unit-cost alignment of hypothesis against reference. Among
/// alignments of equal cost the one with the most matches wins.
inline WerCounts align_words(const std::vector<std::string>& ref,
                             const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  struct Cell {
    std::size_t cost = 0;
    std::size_t matches = 0;
    // 0 = match/substitution, 1 = deletion (consume ref), 2 = insertion (consume hyp)
    unsigned char move = 0;
  };
  std::vector<Cell> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> Cell& { return dp[i * (m + 1) + j]; };

  for (std::size_t i = 1; i <= n; ++i) at(i, 0) = {i, 0, 1};
  for (std::size_t j = 1; j <= m; ++j) at(0, j) = {j, 0, 2};
  auto better = [](std::size_t cost, std::size_t matches, const Cell& best) {
    return cost < best.cost || (cost == best.cost && matches > best.matches);
  };
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const bool same = ref[i - 1] == hyp[j - 1];
      const Cell& diag = at(i - 1, j - 1);
      Cell best{diag.cost + (same ? 0 : 1), diag.matches + (same ? 1 : 0), 0};
      const Cell& up = at(i - 1, j);
      if (better(up.cost + 1, up.matches, best)) best = {up.cost + 1, up.matches, 1};
      const Cell& left = at(i, j - 1);
      if (better(left.cost + 1, left.matches, best)) best = {left.cost + 1, left.matches, 2};
      at(i, j) = best;
    }
  }

  WerCounts counts;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const Cell& c = at(i, j);
    if (i > 0 && j > 0 && c.move == 0) {
      if (ref[i - 1] == hyp[j - 1]) {
        ++counts.correct;
      } else {
        ++counts.substitutions;
      }
      --i;
      --j;
    } else if (i > 0 && (j == 0 || c.move == 1)) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

inline WerCounts align_sentences(const std::string& ref, const std::string& hyp) {
  return align_words(split_words(ref), split_words(hyp));
}

/// (S + D + I) / (S + D + C). Throws InputError on an empty reference.
inline double wer(const WerCounts& c) {
  const std::size_t denom = c.reference_length();
  if (denom == 0) throw InputError("WER undefined for an empty reference");
  return static_cast<double>(c.errors()) / static_cast<double>(denom);
}

struct WerReport {
  std::vector<WerCounts> sentences;
  WerCounts totals;
  double micro = 0.0;  // wer(totals); the headline number
  double macro = 0.0;  // mean of per-sentence WER over non-empty references

  std::size_t sentence_count() const { return sentences.size(); }
};

/// Per-sentence alignment with micro and macro aggregates.
inline WerReport corpus_wer(const std::vector<std::string>& refs,
                            const std::vector<std::string>& hyps) {
  if (refs.size() != hyps.size()) {
    throw InputError("reference and hypothesis sentence counts differ (" +
                     std::to_string(refs.size()) + " vs " + std::to_string(hyps.size()) + ")");
  }
  WerReport report;
  report.sentences.reserve(refs.size());
  double macro_sum = 0.0;
  std::size_t macro_n = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const WerCounts c = align_sentences(unicode::nfc(refs[i]), unicode::nfc(hyps[i]));
    report.sentences.push_back(c);
    report.totals += c;
    if (c.reference_length() > 0) {
      macro_sum += wer(c);
      ++macro_n;
    }
  }
  report.micro = wer(report.totals);
  report.macro = macro_n ? macro_sum / static_cast<double>(macro_n) : 0.0;
  return report;
}

/// Scores the undiacritized sources verbatim against the references.
inline WerReport no_prediction(const std::vector<SentencePair>& pairs) {
  std::vector<std::string> refs, hyps;
  refs.reserve(pairs.size());
  hyps.reserve(pairs.size());
  for (const auto& p : pairs) {
    refs.push_back(p.tgt);
    hyps.push_back(p.src);
  }
  return corpus_wer(refs, hyps);
}

/// Replaces each word by its most frequent diacritized form (ties go to the
/// lexicographically smallest); unseen words are copied.
inline std::string lexicon_baseline(const AmbiguityLexicon& lex, const std::string& src) {
  std::vector<std::string> out;
  for (const auto& word : split_words(src)) {
    const auto* forms = lex.find(word);
    if (forms == nullptr) {
      out.push_back(word);
      continue;
    }
    // std::map iterates forms in ascending order, so strict > keeps the smallest on ties
    const std::string* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [form, count] : *forms) {
      if (count > best_count) {
        best = &form;
        best_count = count;
      }
    }
    out.push_back(*best);
  }
  return join_words(out);
}

/// "12.34"-style percentage used in every report.
inline std::string format_percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * ratio);
  return buf;
}

}  // namespace diacritize
