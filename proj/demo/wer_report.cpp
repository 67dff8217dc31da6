// Word error rate on hand-written reference/hypothesis pairs, plus the two trivial baselines.
#include <iostream>

#include "diacritize/diacritize.hpp"

using namespace diacritize;

int main() {
  const std::vector<std::string> refs = {"كَتَبَ الوَلَدُ", "ذَهَبَ إِلَى البَيْتِ"};
  const std::vector<std::string> hyps = {"كَتَبَ الوَلَدَ", "ذَهَبَ إِلَى البَيْتِ"};

  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto c = align_sentences(refs[i], hyps[i]);
    std::cout << "pair " << i << ": S=" << c.substitutions << " D=" << c.deletions << " I=" << c.insertions
              << " WER=" << format_percent(wer(c)) << "%\n";
  }
  const auto report = corpus_wer(refs, hyps);
  std::cout << "micro " << format_percent(report.micro) << "%  macro " << format_percent(report.macro) << "%\n";

  const auto pairs = build_pairs(refs).pairs;
  std::cout << "no-prediction " << format_percent(no_prediction(pairs).micro) << "%\n";
  const auto lex = build_lexicon(pairs);
  std::vector<std::string> lex_hyps;
  for (const auto& p : pairs) lex_hyps.push_back(lexicon_baseline(lex, p.src));
  std::cout << "lexicon on its own training data " << format_percent(corpus_wer(refs, lex_hyps).micro) << "%\n";
}
