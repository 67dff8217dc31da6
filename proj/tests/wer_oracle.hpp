#pragma once

// Reference word alignments, written independently of the library DP.

#include <climits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "diacritize/eval.hpp"

namespace test {

/// Best (cost, matches) for a suffix pair, cost minimal then matches maximal.
/// Top-down recursion with memoization.
class WerOracle {
public:
  WerOracle(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) : ref_(ref), hyp_(hyp) {}

  diacritize::WerCounts counts() {
    const auto [cost, matches] = best(0, 0);
    // (cost, C) fixes the rest: S+D = n-C, I = cost-(n-C).
    const long n = static_cast<long>(ref_.size());
    const long m = static_cast<long>(hyp_.size());
    const long ins = cost - (n - matches);
    const long sub = m - matches - ins;
    const long del = n - matches - sub;
    diacritize::WerCounts c;
    c.correct = static_cast<std::size_t>(matches);
    c.insertions = static_cast<std::size_t>(ins);
    c.substitutions = static_cast<std::size_t>(sub);
    c.deletions = static_cast<std::size_t>(del);
    return c;
  }

private:
  using Score = std::pair<long, long>;  // cost, matches

  static bool better(const Score& a, const Score& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  }

  Score best(std::size_t i, std::size_t j) {
    if (i == ref_.size()) return {static_cast<long>(hyp_.size() - j), 0};
    if (j == hyp_.size()) return {static_cast<long>(ref_.size() - i), 0};
    const auto key = std::make_pair(i, j);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    Score out{LONG_MAX, 0};
    auto diag = best(i + 1, j + 1);
    if (ref_[i] == hyp_[j]) {
      diag.second += 1;
    } else {
      diag.first += 1;
    }
    auto del = best(i + 1, j);
    del.first += 1;
    auto ins = best(i, j + 1);
    ins.first += 1;
    for (const auto& s : {diag, del, ins}) {
      if (better(s, out)) out = s;
    }
    memo_[key] = out;
    return out;
  }

  const std::vector<std::string>& ref_;
  const std::vector<std::string>& hyp_;
  std::map<std::pair<std::size_t, std::size_t>, Score> memo_;
};

/// Exhaustive enumeration of every alignment path (tiny inputs only).
inline diacritize::WerCounts brute_force_counts(const std::vector<std::string>& ref,
                                                const std::vector<std::string>& hyp) {
  diacritize::WerCounts best;
  long best_cost = LONG_MAX;
  diacritize::WerCounts cur;
  auto rec = [&](auto&& self, std::size_t i, std::size_t j) -> void {
    if (i == ref.size() && j == hyp.size()) {
      const long cost = static_cast<long>(cur.substitutions + cur.deletions + cur.insertions);
      if (cost < best_cost || (cost == best_cost && cur.correct > best.correct)) {
        best_cost = cost;
        best = cur;
      }
      return;
    }
    if (i < ref.size() && j < hyp.size()) {
      auto& slot = ref[i] == hyp[j] ? cur.correct : cur.substitutions;
      ++slot;
      self(self, i + 1, j + 1);
      --slot;
    }
    if (i < ref.size()) {
      ++cur.deletions;
      self(self, i + 1, j);
      --cur.deletions;
    }
    if (j < hyp.size()) {
      ++cur.insertions;
      self(self, i, j + 1);
      --cur.insertions;
    }
  };
  rec(rec, 0, 0);
  return best;
}

inline bool same_counts(const diacritize::WerCounts& a, const diacritize::WerCounts& b) {
  return a.substitutions == b.substitutions && a.deletions == b.deletions && a.insertions == b.insertions &&
         a.correct == b.correct;
}

}  // namespace test
