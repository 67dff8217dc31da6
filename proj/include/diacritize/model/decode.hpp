#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "diacritize/corpus.hpp"
#include "diacritize/model/seq2seq.hpp"

namespace diacritize::model {

struct Hypothesis {
  std::vector<std::size_t> ids;  // emitted tokens, EOS excluded
  double log_prob = 0.0;         // includes EOS when finished
  std::size_t length = 0;        // scored tokens (ids plus EOS if finished)
  bool finished = false;         // ended with EOS rather than the length cap

  /// Length-normalized score used to rank finished hypotheses.
  double score() const { return length ? log_prob / static_cast<double>(length) : 0.0; }
};

/// Attention weights seen by a decode, one row per decoder step.
struct AttentionTrace {
  std::vector<std::vector<double>> steps;
};

/// Output length cap: ceil(max_decode_factor * source length).
inline std::size_t decode_cap(const ModelConfig& cfg, std::size_t src_len) {
  return static_cast<std::size_t>(std::ceil(cfg.max_decode_factor * static_cast<double>(src_len)));
}

namespace detail {

inline bool generatable(std::size_t id) { return id != CharVocab::kPad && id != CharVocab::kBos; }

template <typename T>
std::vector<double> log_probs_row(const Matrix<T>& logits, std::size_t r) {
  std::vector<T> lp(logits.cols());
  neural::log_softmax_row<T>(logits.row(r), lp);
  return {lp.begin(), lp.end()};
}

template <typename T>
void record_attention(const Matrix<T>& alpha, std::size_t row, std::size_t len, AttentionTrace* trace) {
  if (!trace) return;
  std::vector<double> w(len);
  for (std::size_t s = 0; s < len; ++s) w[s] = static_cast<double>(alpha(row, s));
  trace->steps.push_back(std::move(w));
}

}  // namespace detail

/// Argmax decoding fed with its own predictions. Stops at EOS or at the
/// length cap; ties go to the lowest id.
template <typename T>
Hypothesis greedy_decode(Model<T>& m, const std::vector<std::size_t>& src,
                         AttentionTrace* trace = nullptr) {
  if (src.empty()) throw InputError("greedy_decode: empty source");
  Tape<T> tape(false);
  const BoundParams<T> bp(tape, m.params, m.config);
  const EncoderStates enc = encode(tape, bp, {src}, RunMode{});
  DecoderState state = init_decoder(tape, bp, enc);
  const std::size_t cap = decode_cap(m.config, src.size());
  Hypothesis hyp;
  std::size_t prev = CharVocab::kBos;
  for (std::size_t t = 0; t < cap; ++t) {
    const std::size_t prev_ids[1] = {prev};
    StepOutput step = decoder_step(tape, bp, state, prev_ids, enc, RunMode{});
    detail::record_attention(tape.value(step.alpha), 0, src.size(), trace);
    const auto lp = detail::log_probs_row(tape.value(step.logits), 0);
    std::size_t best = lp.size();
    for (std::size_t v = 0; v < lp.size(); ++v) {
      if (detail::generatable(v) && (best == lp.size() || lp[v] > lp[best])) best = v;
    }
    hyp.log_prob += lp[best];
    ++hyp.length;
    if (best == CharVocab::kEos) {
      hyp.finished = true;
      break;
    }
    hyp.ids.push_back(best);
    prev = best;
    state = std::move(step.state);
  }
  return hyp;
}

/// Beam search ranked by length-normalized log-probability.
///
/// Partial hypotheses are pruned on raw log-probability; candidates ending in
/// EOS leave the beam as finished hypotheses, and hypotheses reaching the
/// length cap are kept as unfinished. For width > 1 the greedy hypothesis is
/// also scored so the result never ranks below it; width 1 follows exactly
/// the greedy path.
template <typename T>
Hypothesis beam_decode(Model<T>& m, const std::vector<std::size_t>& src, std::size_t width = 5,
                       AttentionTrace* trace = nullptr) {
  if (width == 0) throw InputError("beam_decode: width must be at least 1");
  if (src.empty()) throw InputError("beam_decode: empty source");

  Tape<T> tape(false);
  const BoundParams<T> bp(tape, m.params, m.config);
  const EncoderStates enc1 = encode(tape, bp, {src}, RunMode{});
  const std::size_t cap = decode_cap(m.config, src.size());

  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> finished;
  EncoderStates enc = enc1;
  DecoderState state = init_decoder(tape, bp, enc1);

  for (std::size_t t = 0; t < cap && !live.empty(); ++t) {
    std::vector<std::size_t> prev(live.size());
    for (std::size_t i = 0; i < live.size(); ++i) {
      prev[i] = live[i].ids.empty() ? CharVocab::kBos : live[i].ids.back();
    }
    StepOutput step = decoder_step(tape, bp, state, prev, enc, RunMode{});
    const Matrix<T>& logits = tape.value(step.logits);
    if (trace) {
      for (std::size_t i = 0; i < live.size(); ++i) {
        detail::record_attention(tape.value(step.alpha), i, src.size(), trace);
      }
    }

    struct Candidate {
      double log_prob;
      std::size_t beam;
      std::size_t token;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto lp = detail::log_probs_row(logits, i);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (detail::generatable(v)) cands.push_back({live[i].log_prob + lp[v], i, v});
      }
    }
    const std::size_t keep = std::min(width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.beam != b.beam) return a.beam < b.beam;
                        return a.token < b.token;
                      });

    std::vector<Hypothesis> next;
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = cands[k];
      Hypothesis h = live[c.beam];
      h.log_prob = c.log_prob;
      ++h.length;
      if (c.token == CharVocab::kEos) {
        h.finished = true;
        finished.push_back(std::move(h));
        continue;
      }
      h.ids.push_back(c.token);
      if (t + 1 == cap) {
        finished.push_back(std::move(h));  // capped
        continue;
      }
      next.push_back(std::move(h));
      rows.push_back(c.beam);
    }
    live = std::move(next);
    if (live.empty()) break;

    DecoderState gathered;
    for (std::size_t l = 0; l < step.state.h.size(); ++l) {
      gathered.h.push_back(tape.gather_rows(step.state.h[l], rows));
      gathered.c.push_back(tape.gather_rows(step.state.c[l], rows));
    }
    gathered.feed = tape.gather_rows(step.state.feed, rows);
    state = std::move(gathered);
    const std::vector<std::size_t> zeros(rows.size(), 0);
    enc.memory.clear();
    for (Var v : enc1.memory) enc.memory.push_back(tape.gather_rows(v, zeros));
    enc.lengths.assign(rows.size(), src.size());
  }

  Hypothesis best = finished.front();
  for (const auto& h : finished) {
    if (h.score() > best.score()) best = h;
  }
  if (width > 1) {
    Hypothesis greedy = greedy_decode(m, src);
    if (greedy.score() > best.score()) best = std::move(greedy);
  }
  return best;
}

template <typename T>
Hypothesis decode(Model<T>& m, const std::vector<std::size_t>& src, AttentionTrace* trace = nullptr) {
  return beam_decode(m, src, m.config.beam_width, trace);
}

/// Log-probability of emitting `out` (then EOS when `with_eos`) under teacher forcing.
template <typename T>
double sequence_log_prob(Model<T>& m, const std::vector<std::size_t>& src,
                         const std::vector<std::size_t>& out, bool with_eos) {
  Tape<T> tape(false);
  const BoundParams<T> bp(tape, m.params, m.config);
  const EncoderStates enc = encode(tape, bp, {src}, RunMode{});
  DecoderState state = init_decoder(tape, bp, enc);
  double total = 0.0;
  const std::size_t n = out.size() + (with_eos ? 1 : 0);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t prev[1] = {t == 0 ? CharVocab::kBos : out[t - 1]};
    StepOutput step = decoder_step(tape, bp, state, prev, enc, RunMode{});
    const auto lp = detail::log_probs_row(tape.value(step.logits), 0);
    total += lp[t < out.size() ? out[t] : CharVocab::kEos];
    state = std::move(step.state);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Sentence prediction

struct ChunkDiagnostic {
  std::string input;
  std::string output;
  bool word_count_mismatch = false;
  bool capped = false;  // decoding hit the length cap before EOS
};

struct Prediction {
  std::string text;
  std::vector<ChunkDiagnostic> chunks;
};

/// Strips any diacritics from `sentence`, chunks it with the model's chunk
/// size, decodes each chunk and rejoins the outputs with spaces. Outputs are
/// kept verbatim even when their word count differs from the input chunk.
template <typename T>
Prediction predict_sentence(Model<T>& m, const std::string& sentence,
                            const DiacriticSet& set = DiacriticSet()) {
  Prediction pred;
  const std::string bare = make_source(normalize_sentence(sentence), set);
  if (bare.empty()) return pred;
  const auto words = split_words(bare);
  std::vector<std::string> outputs;
  for (const auto& chunk : chunk_words(words, m.config.chunk_size)) {
    ChunkDiagnostic diag;
    diag.input = chunk;
    const Hypothesis h = decode(m, m.vocab.encode(tokenize_chars(chunk)));
    diag.output = detokenize(m.vocab.decode(h.ids));
    diag.capped = !h.finished;
    diag.word_count_mismatch = split_words(diag.output).size() != split_words(chunk).size();
    outputs.push_back(diag.output);
    pred.chunks.push_back(std::move(diag));
  }
  pred.text = join_words(outputs);
  return pred;
}

}  // namespace diacritize::model
