#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "diacritize/ambiguity.hpp"
#include "diacritize/corpus.hpp"
#include "diacritize/error.hpp"
#include "diacritize/eval.hpp"
#include "diacritize/model/decode.hpp"
#include "diacritize/model/seq2seq.hpp"
#include "diacritize/neural/optim.hpp"
#include "diacritize/random.hpp"

namespace diacritize::trainer {

using model::CharVocab;
using model::Model;
using model::ModelConfig;
using neural::OptimizerKind;

enum class Profile { kPaper, kDesk };

inline std::string to_string(Profile p) { return p == Profile::kPaper ? "paper" : "desk"; }

inline Profile parse_profile(const std::string& s) {
  if (s == "paper") return Profile::kPaper;
  if (s == "desk") return Profile::kDesk;
  throw InputError("unknown profile '" + s + "' (expected paper or desk)");
}

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 1e-3;
  double decay = 1.0;           // multiplicative lr factor
  std::size_t decay_start = 0;  // first step (1-based) at which decay applies; 0 = never
  std::size_t decay_every = 0;
  uint64_t seed = 1;
  std::size_t validate_every = 0;    // 0 = validate once, after the last step
  std::size_t checkpoint_every = 0;  // 0 = only the final checkpoint
  int precision = 64;
  Profile profile = Profile::kDesk;
  double clip = 5.0;

  /// Adam at 1e-3, no decay.
  static TrainConfig desk(std::size_t steps = 2000) {
    TrainConfig c;
    c.steps = steps;
    return c;
  }

  /// SGD at 1.0, halved from half the budget on, every tenth of the budget.
  static TrainConfig paper(std::size_t steps = 100000) {
    TrainConfig c;
    c.profile = Profile::kPaper;
    c.steps = steps;
    c.optimizer = OptimizerKind::kSgd;
    c.lr = 1.0;
    c.decay = 0.5;
    c.decay_start = std::max<std::size_t>(1, steps / 2);
    c.decay_every = std::max<std::size_t>(1, steps / 10);
    return c;
  }

  static TrainConfig for_profile(Profile p, std::size_t steps) {
    return p == Profile::kPaper ? paper(steps) : desk(steps);
  }

  void validate() const {
    if (steps == 0) throw InputError("steps must be positive");
    if (batch_size == 0) throw InputError("batch_size must be at least 1");
    if (!(lr > 0.0)) throw InputError("lr must be positive");
    if (!(decay > 0.0 && decay <= 1.0)) throw InputError("decay must be in (0, 1]");
    if (decay_start > 0 && decay_every == 0) throw InputError("decay_every must be positive");
    if (precision != 32 && precision != 64) throw InputError("precision must be 32 or 64");
    if (!(clip > 0.0)) throw InputError("clip must be positive");
  }

  /// Learning rate used for update number `step` (1-based).
  double lr_at(std::size_t step) const {
    if (decay_start == 0 || step < decay_start) return lr;
    const auto k = 1 + (step - decay_start) / decay_every;
    return lr * std::pow(decay, static_cast<double>(k));
  }
};

// ---------------------------------------------------------------------------
// Batching

/// Endless stream of index batches. Each epoch shuffles the items, sorts
/// windows of `window` batches by source length and cuts them in order, so
/// only the last batch of an epoch can be short.
class BatchStream {
public:
  BatchStream(std::vector<std::size_t> src_lengths, std::size_t batch_size, uint64_t seed,
              std::size_t window = 16)
      : lengths_(std::move(src_lengths)), batch_(batch_size), window_(window), rng_(seed) {
    if (lengths_.empty()) throw InputError("cannot batch an empty dataset");
    if (batch_ == 0) throw InputError("batch_size must be at least 1");
    if (window_ == 0) window_ = 1;
  }

  const std::vector<std::size_t>& next() {
    if (cursor_ == epoch_.size()) refill();
    return epoch_[cursor_++];
  }

  std::size_t epochs_started() const { return epochs_; }

  /// Batches of one epoch, consuming the stream's shuffle state.
  std::vector<std::vector<std::size_t>> epoch() {
    std::vector<std::size_t> order(lengths_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng_.shuffle(std::span<std::size_t>(order));
    const std::size_t span = batch_ * window_;
    for (std::size_t lo = 0; lo < order.size(); lo += span) {
      const auto first = order.begin() + static_cast<std::ptrdiff_t>(lo);
      const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), lo + span));
      std::stable_sort(first, last, [&](std::size_t a, std::size_t b) { return lengths_[a] < lengths_[b]; });
    }
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t lo = 0; lo < order.size(); lo += batch_) {
      out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                       order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), lo + batch_)));
    }
    return out;
  }

private:
  void refill() {
    epoch_ = epoch();
    cursor_ = 0;
    ++epochs_;
  }

  std::vector<std::size_t> lengths_;
  std::size_t batch_;
  std::size_t window_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> epoch_;
  std::size_t cursor_ = 0;
  std::size_t epochs_ = 0;
};

/// The first `count` batches of the stream for `chunks`.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<ChunkPair>& chunks,
                                                          std::size_t batch_size, uint64_t seed,
                                                          std::size_t count) {
  std::vector<std::size_t> lengths;
  for (const auto& c : chunks) lengths.push_back(c.src_tokens.size());
  BatchStream stream(std::move(lengths), batch_size, seed);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(stream.next());
  return out;
}

// ---------------------------------------------------------------------------
// Encoded data

struct EncodedChunks {
  std::vector<std::vector<std::size_t>> src;
  std::vector<std::vector<std::size_t>> tgt;
};

inline EncodedChunks encode_chunks(const CharVocab& vocab, const std::vector<ChunkPair>& chunks) {
  EncodedChunks out;
  for (const auto& c : chunks) {
    out.src.push_back(vocab.encode(c.src_tokens));
    out.tgt.push_back(vocab.encode(c.tgt_tokens));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

struct Validation {
  double loss = 0.0;  // mean teacher-forced loss per chunk
  double wer = 0.0;   // micro WER of greedy chunk outputs
};

template <typename T>
Validation validate(Model<T>& m, const std::vector<ChunkPair>& valid) {
  if (valid.empty()) throw InputError("validation set is empty");
  Validation v;
  std::vector<std::string> refs, hyps;
  for (const auto& c : valid) {
    const auto src = m.vocab.encode(c.src_tokens);
    v.loss += model::forward_loss(m, src, m.vocab.encode(c.tgt_tokens));
    refs.push_back(detokenize(c.tgt_tokens));
    hyps.push_back(detokenize(m.vocab.decode(model::greedy_decode(m, src).ids)));
  }
  v.loss /= static_cast<double>(valid.size());
  v.wer = corpus_wer(refs, hyps).micro;
  return v;
}

// ---------------------------------------------------------------------------
// Training

struct ValidationRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double wer = 0.0;
};

struct TrainLog {
  std::vector<double> losses;  // losses[i] = batch loss before update i + 1
  std::vector<ValidationRecord> validations;
  double wall_seconds = 0.0;

  /// `step<TAB>loss` per update, steps counted from 1.
  std::string loss_tsv() const {
    std::ostringstream out;
    out << std::setprecision(17);
    for (std::size_t i = 0; i < losses.size(); ++i) out << i + 1 << '\t' << losses[i] << '\n';
    return out.str();
  }

  /// `step<TAB>valid_loss<TAB>valid_wer` per validation.
  std::string validation_tsv() const {
    std::ostringstream out;
    out << std::setprecision(17);
    for (const auto& v : validations) out << v.step << '\t' << v.loss << '\t' << v.wer << '\n';
    return out.str();
  }
};

template <typename T>
struct TrainHooks {
  /// Called with the current model every checkpoint_every steps and after the last step.
  std::function<void(const Model<T>&, std::size_t step)> checkpoint;
  /// Called when a validation improves on the best loss so far.
  std::function<void(const Model<T>&, std::size_t step)> best;
  std::ostream* progress = nullptr;
};

template <typename T>
struct TrainResult {
  Model<T> last;
  Model<T> best;  // lowest validation loss; equals `last` without validation data
  std::size_t best_step = 0;
  TrainLog log;
};

/// Runs exactly cfg.steps updates on `train_chunks`. Dropout and batching
/// draw from generators seeded by cfg.seed, so the run is reproducible.
/// A non-finite loss or gradient aborts with NumericError before the
/// parameters are touched.
template <typename T>
TrainResult<T> train(Model<T> model, const std::vector<ChunkPair>& train_chunks,
                     const std::vector<ChunkPair>& valid_chunks, const TrainConfig& cfg,
                     const TrainHooks<T>& hooks = {}) {
  cfg.validate();
  model.config.validate();
  const auto start = std::chrono::steady_clock::now();
  const EncodedChunks data = encode_chunks(model.vocab, train_chunks);
  std::vector<std::size_t> lengths;
  for (const auto& s : data.src) lengths.push_back(s.size());
  BatchStream stream(std::move(lengths), cfg.batch_size, cfg.seed);
  Rng dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  neural::Optimizer<T> opt(cfg.optimizer);
  auto params = model.params.list();

  TrainResult<T> result;
  std::optional<double> best_loss;
  auto run_validation = [&](std::size_t step) {
    if (valid_chunks.empty()) return;
    const Validation v = validate(model, valid_chunks);
    result.log.validations.push_back({step, v.loss, v.wer});
    if (hooks.progress) {
      *hooks.progress << "step " << step << " valid loss " << v.loss << " wer "
                      << format_percent(v.wer) << "\n";
    }
    if (!best_loss || v.loss < *best_loss) {
      best_loss = v.loss;
      result.best = model;
      result.best_step = step;
      if (hooks.best) hooks.best(model, step);
    }
  };

  const model::RunMode mode{true, &dropout_rng, model.config.dropout};
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const auto& batch = stream.next();
    std::vector<std::vector<std::size_t>> src, tgt;
    for (std::size_t i : batch) {
      src.push_back(data.src[i]);
      tgt.push_back(data.tgt[i]);
    }
    model.params.zero_grad();
    double loss = 0.0;
    {
      neural::Tape<T> tape;
      const model::BoundParams<T> bp(tape, model.params, model.config);
      const neural::Var l = model::batch_loss(tape, bp, src, tgt, mode);
      loss = static_cast<double>(tape.scalar(l));
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at step " + std::to_string(step));
      }
      tape.backward(l);
    }
    neural::clip_grad_norm(std::span<neural::Parameter<T>* const>(params), cfg.clip);
    opt.step(std::span<neural::Parameter<T>* const>(params), cfg.lr_at(step));
    if (!model.params.all_finite()) {
      throw NumericError("non-finite parameters after step " + std::to_string(step));
    }
    result.log.losses.push_back(loss);
    if (hooks.progress && (step % 100 == 0 || step == cfg.steps)) {
      *hooks.progress << "step " << step << " loss " << loss << "\n";
    }
    if (cfg.validate_every > 0 && step % cfg.validate_every == 0 && step != cfg.steps) {
      run_validation(step);
    }
    if (hooks.checkpoint && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 &&
        step != cfg.steps) {
      hooks.checkpoint(model, step);
    }
  }
  run_validation(cfg.steps);
  if (hooks.checkpoint) hooks.checkpoint(model, cfg.steps);
  if (!best_loss) {
    result.best = model;
    result.best_step = cfg.steps;
  }
  result.last = std::move(model);
  result.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

/// Fresh model for `train_chunks`: vocabulary from the chunks, uniform init from `seed`.
template <typename T>
Model<T> init_model(const ModelConfig& cfg, const std::vector<ChunkPair>& train_chunks, uint64_t seed) {
  Model<T> m(cfg, CharVocab::from_chunks(train_chunks));
  Rng rng(seed);
  m.params.init_uniform(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Sentence-level evaluation

/// Predicts every sentence of `pairs` and scores it against the targets.
template <typename T>
WerReport evaluate_sentences(Model<T>& m, const std::vector<SentencePair>& pairs,
                                   const DiacriticSet& set = DiacriticSet(),
                                   std::vector<std::string>* hyps_out = nullptr) {
  std::vector<std::string> refs, hyps;
  for (const auto& p : pairs) {
    refs.push_back(p.tgt);
    hyps.push_back(model::predict_sentence(m, p.src, set).text);
  }
  WerReport report = corpus_wer(refs, hyps);
  if (hyps_out) *hyps_out = std::move(hyps);
  return report;
}

// ---------------------------------------------------------------------------
// Chunk-size sweep

struct SweepCell {
  std::string column;  // "no-prediction", "baseline", "1".."10", "sentence"
  bool ok = false;
  double micro = 0.0;
  double macro = 0.0;
  std::string error;
};

struct SweepReport {
  std::vector<SweepCell> cells;

  const SweepCell* find(const std::string& column) const {
    for (const auto& c : cells) {
      if (c.column == column) return &c;
    }
    return nullptr;
  }

  /// Header of column names, then one row per aggregate (WER in percent).
  std::string to_csv() const {
    std::string out = "metric";
    for (const auto& c : cells) out += "," + c.column;
    out += '\n';
    for (int row = 0; row < 2; ++row) {
      out += row == 0 ? "wer_micro" : "wer_macro";
      for (const auto& c : cells) {
        out += ',';
        if (c.ok) out += format_percent(row == 0 ? c.micro : c.macro);
      }
      out += '\n';
    }
    return out;
  }

  std::string to_text() const {
    std::vector<std::vector<std::string>> rows = {{"metric"}, {"WER (micro)"}, {"WER (macro)"}};
    for (const auto& c : cells) {
      rows[0].push_back(c.column);
      rows[1].push_back(c.ok ? format_percent(c.micro) : "failed");
      rows[2].push_back(c.ok ? format_percent(c.macro) : "failed");
    }
    std::vector<std::size_t> width(rows[0].size(), 0);
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], unicode::length(r[i]));
    }
    std::string out;
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += "  ";
        const std::size_t pad = width[i] - unicode::length(r[i]);
        if (i == 0) {
          out += r[i] + std::string(pad, ' ');
        } else {
          out += std::string(pad, ' ') + r[i];
        }
      }
      out += '\n';
    }
    return out;
  }
};

struct SweepOptions {
  std::vector<ChunkSize> sizes;
  bool baseline = true;
  DiacriticSet diacritics;
  std::ostream* progress = nullptr;
};

/// Trains one model per chunk size on the same split and seed and scores
/// each on the test sentences, next to the no-prediction and lexicon
/// baseline columns. A failing cell is recorded and the sweep continues.
template <typename T>
SweepReport sweep(const CorpusSplit& split, const ModelConfig& base, const TrainConfig& tc,
                  const SweepOptions& opts) {
  if (split.test.empty()) throw InputError("sweep: empty test split");
  SweepReport report;
  const WerReport none = no_prediction(split.test);
  report.cells.push_back({"no-prediction", true, none.micro, none.macro, {}});
  if (opts.baseline) {
    const auto lex = build_lexicon(split.train);
    std::vector<std::string> refs, hyps;
    for (const auto& p : split.test) {
      refs.push_back(p.tgt);
      hyps.push_back(lexicon_baseline(lex, p.src));
    }
    const auto r = corpus_wer(refs, hyps);
    report.cells.push_back({"baseline", true, r.micro, r.macro, {}});
  }
  for (const ChunkSize& n : opts.sizes) {
    SweepCell cell;
    cell.column = n.is_sentence() ? "sentence" : n.str();
    try {
      ModelConfig cfg = base;
      cfg.chunk_size = n;
      const auto train_chunks = chunk_pairs(split.train, n).chunks;
      const auto valid_chunks = chunk_pairs(split.valid, n).chunks;
      if (train_chunks.empty()) throw InputError("no training chunks");
      if (opts.progress) *opts.progress << "sweep: training chunk size " << cell.column << "\n";
      auto result = train<T>(init_model<T>(cfg, train_chunks, tc.seed), train_chunks, valid_chunks, tc,
                             TrainHooks<T>{});
      const auto r = evaluate_sentences(result.best, split.test, opts.diacritics);
      cell.ok = true;
      cell.micro = r.micro;
      cell.macro = r.macro;
    } catch (const std::exception& e) {
      cell.error = e.what();
      if (opts.progress) *opts.progress << "sweep: chunk size " << cell.column << " failed: " << e.what() << "\n";
    }
    report.cells.push_back(std::move(cell));
  }
  return report;
}

}  // namespace diacritize::trainer
