#pragma once

// Character-level encoder-decoder: stacked bidirectional LSTM encoder,
// stacked LSTM decoder with input feeding and bilinear global attention.

#include <cmath>
#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "diacritize/error.hpp"
#include "diacritize/model/config.hpp"
#include "diacritize/model/vocab.hpp"
#include "diacritize/neural/tape.hpp"
#include "diacritize/random.hpp"

namespace diacritize::model {

using neural::Matrix;
using neural::Parameter;
using neural::Tape;
using neural::Var;

/// Gate weights of one LSTM layer; gate blocks are ordered [i | f | g | o].
template <typename T>
struct LstmWeights {
  Parameter<T> wx;  // in x 4H
  Parameter<T> wh;  // H x 4H
  Parameter<T> b;   // 1 x 4H

  LstmWeights() = default;
  LstmWeights(const std::string& prefix, std::size_t in, std::size_t hidden)
      : wx(prefix + ".wx", Matrix<T>(in, 4 * hidden)),
        wh(prefix + ".wh", Matrix<T>(hidden, 4 * hidden)),
        b(prefix + ".b", Matrix<T>(1, 4 * hidden)) {}
};

/// Linear map from a concatenated bidirectional final state to a decoder
/// layer's initial state.
template <typename T>
struct Bridge {
  Parameter<T> w_h, b_h, w_c, b_c;

  Bridge() = default;
  Bridge(const std::string& prefix, std::size_t hidden)
      : w_h(prefix + ".w_h", Matrix<T>(2 * hidden, hidden)),
        b_h(prefix + ".b_h", Matrix<T>(1, hidden)),
        w_c(prefix + ".w_c", Matrix<T>(2 * hidden, hidden)),
        b_c(prefix + ".b_c", Matrix<T>(1, hidden)) {}
};

template <typename T>
class ModelParams {
public:
  ModelParams() = default;

  ModelParams(const ModelConfig& cfg, std::size_t vocab_size) {
    cfg.validate();
    const std::size_t e = cfg.embed_dim, h = cfg.hidden_dim;
    src_embed = Parameter<T>("src_embed", Matrix<T>(vocab_size, e));
    tgt_embed = Parameter<T>("tgt_embed", Matrix<T>(vocab_size, e));
    for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
      const std::size_t in = l == 0 ? e : 2 * h;
      enc_fwd.emplace_back("enc" + std::to_string(l) + ".fwd", in, h);
      enc_bwd.emplace_back("enc" + std::to_string(l) + ".bwd", in, h);
    }
    for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
      bridge.emplace_back("bridge" + std::to_string(l), h);
      const std::size_t in = l == 0 ? e + (cfg.input_feed ? h : 0) : h;
      dec.emplace_back("dec" + std::to_string(l), in, h);
    }
    attn_score = Parameter<T>("attn.W_a", Matrix<T>(h, 2 * h));
    attn_out = Parameter<T>("attn.W_c", Matrix<T>(3 * h, h));
    out_w = Parameter<T>("out.w", Matrix<T>(h, vocab_size));
    out_b = Parameter<T>("out.b", Matrix<T>(1, vocab_size));
  }

  /// Every parameter, in a fixed order (also the checkpoint order).
  std::vector<Parameter<T>*> list() {
    std::vector<Parameter<T>*> out{&src_embed, &tgt_embed};
    for (std::size_t l = 0; l < enc_fwd.size(); ++l) {
      for (auto* w : {&enc_fwd[l], &enc_bwd[l]}) {
        out.insert(out.end(), {&w->wx, &w->wh, &w->b});
      }
    }
    for (std::size_t l = 0; l < dec.size(); ++l) {
      out.insert(out.end(), {&bridge[l].w_h, &bridge[l].b_h, &bridge[l].w_c, &bridge[l].b_c});
      out.insert(out.end(), {&dec[l].wx, &dec[l].wh, &dec[l].b});
    }
    out.insert(out.end(), {&attn_score, &attn_out, &out_w, &out_b});
    return out;
  }

  std::vector<const Parameter<T>*> list() const {
    auto all = const_cast<ModelParams*>(this)->list();
    return {all.begin(), all.end()};
  }

  /// Uniform(-range, range) for every entry, drawn in list() order.
  void init_uniform(Rng& rng, double range = 0.1) {
    for (auto* p : list()) {
      for (auto& v : p->value.values()) v = static_cast<T>(rng.uniform(-range, range));
      p->zero_grad();
    }
  }

  void zero_grad() {
    for (auto* p : list()) p->zero_grad();
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto* p : list()) n += p->value.size();
    return n;
  }

  bool all_finite() const {
    for (const auto* p : list()) {
      if (!p->value.all_finite()) return false;
    }
    return true;
  }

  Parameter<T> src_embed, tgt_embed;
  std::vector<LstmWeights<T>> enc_fwd, enc_bwd, dec;
  std::vector<Bridge<T>> bridge;
  Parameter<T> attn_score;  // W_a: score(h_t, h_s) = h_t^T W_a h_s
  Parameter<T> attn_out;    // W_c: h~ = tanh([c_t; h_t]^T W_c)
  Parameter<T> out_w, out_b;
};

/// A trained or trainable network with its vocabulary.
template <typename T>
struct Model {
  ModelConfig config;
  CharVocab vocab;
  ModelParams<T> params;

  Model() = default;
  Model(ModelConfig cfg, CharVocab v) : config(cfg), vocab(std::move(v)), params(config, vocab.size()) {}

  /// Same network with values converted to another scalar type.
  template <typename U>
  Model<U> cast() const {
    Model<U> out(config, vocab);
    auto dst = out.params.list();
    auto src = params.list();
    for (std::size_t i = 0; i < src.size(); ++i) {
      for (std::size_t k = 0; k < src[i]->value.size(); ++k) {
        dst[i]->value[k] = static_cast<U>(src[i]->value[k]);
      }
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Graph construction

/// Training-mode switches for one forward pass.
struct RunMode {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
  double dropout = 0.0;
};

/// Observes every encoder LSTM step: (layer, is_backward_direction, position).
using EncodeProbe = std::function<void(std::size_t, bool, std::size_t)>;

template <typename T>
struct BoundLstm {
  Var wx, wh, b;
};

/// Parameters bound to one tape.
template <typename T>
struct BoundParams {
  Var src_embed, tgt_embed, attn_score, attn_out, out_w, out_b;
  std::vector<BoundLstm<T>> enc_fwd, enc_bwd, dec;
  std::vector<std::array<Var, 4>> bridge;  // w_h, b_h, w_c, b_c
  std::size_t hidden = 0;
  bool input_feed = true;

  BoundParams(Tape<T>& tape, ModelParams<T>& p, const ModelConfig& cfg)
      : hidden(cfg.hidden_dim), input_feed(cfg.input_feed) {
    src_embed = tape.param(p.src_embed);
    tgt_embed = tape.param(p.tgt_embed);
    auto bind = [&](LstmWeights<T>& w) {
      return BoundLstm<T>{tape.param(w.wx), tape.param(w.wh), tape.param(w.b)};
    };
    for (auto& w : p.enc_fwd) enc_fwd.push_back(bind(w));
    for (auto& w : p.enc_bwd) enc_bwd.push_back(bind(w));
    for (auto& w : p.dec) dec.push_back(bind(w));
    for (auto& br : p.bridge) {
      bridge.push_back({tape.param(br.w_h), tape.param(br.b_h), tape.param(br.w_c), tape.param(br.b_c)});
    }
    attn_score = tape.param(p.attn_score);
    attn_out = tape.param(p.attn_out);
    out_w = tape.param(p.out_w);
    out_b = tape.param(p.out_b);
  }
};

/// One LSTM step; returns (h, c).
template <typename T>
std::pair<Var, Var> lstm_step(Tape<T>& tape, const BoundLstm<T>& w, Var x, Var h, Var c) {
  const Var gates =
      tape.add_bias(tape.add(tape.matmul(x, w.wx), tape.matmul(h, w.wh)), w.b);
  const Var c_next = tape.lstm_cell_state(gates, c);
  const Var h_next = tape.lstm_hidden(gates, c_next);
  return {h_next, c_next};
}

template <typename T>
Var apply_dropout(Tape<T>& tape, Var x, const RunMode& mode) {
  if (!mode.training || mode.dropout <= 0.0) return x;
  if (mode.rng == nullptr) throw std::logic_error("dropout requires an Rng");
  return tape.dropout(x, mode.dropout, *mode.rng);
}

/// Per-position annotations (top layer, [forward; backward], B x 2H each)
/// plus every layer's final states for decoder initialization.
struct EncoderStates {
  std::vector<Var> memory;
  std::vector<std::size_t> lengths;
  std::vector<Var> final_h;  // per encoder layer, B x 2H
  std::vector<Var> final_c;
};

template <typename T>
EncoderStates encode(Tape<T>& tape, const BoundParams<T>& bp,
                     const std::vector<std::vector<std::size_t>>& src, const RunMode& mode,
                     const EncodeProbe& probe = {}) {
  const std::size_t batch = src.size();
  if (batch == 0) throw InputError("encode: empty batch");
  EncoderStates enc;
  std::size_t steps = 0;
  for (const auto& s : src) {
    if (s.empty()) throw InputError("encode: empty source sequence");
    enc.lengths.push_back(s.size());
    steps = std::max(steps, s.size());
  }

  std::vector<std::vector<unsigned char>> masks(steps, std::vector<unsigned char>(batch));
  std::vector<bool> full(steps, true);
  std::vector<Var> xs;
  xs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<std::size_t> ids(batch, CharVocab::kPad);
    for (std::size_t b = 0; b < batch; ++b) {
      masks[t][b] = t < src[b].size();
      if (masks[t][b]) ids[b] = src[b][t];
      full[t] = full[t] && masks[t][b];
    }
    xs.push_back(tape.embedding(bp.src_embed, ids));
  }

  const std::size_t h = bp.hidden;
  const std::size_t layers = bp.enc_fwd.size();
  for (std::size_t l = 0; l < layers; ++l) {
    if (l > 0) {
      for (auto& x : xs) x = apply_dropout(tape, x, mode);
    }
    std::vector<Var> fwd(steps), bwd(steps);
    auto run = [&](const BoundLstm<T>& w, bool backward, std::vector<Var>& out) {
      Var hs = tape.constant(Matrix<T>(batch, h));
      Var cs = tape.constant(Matrix<T>(batch, h));
      for (std::size_t k = 0; k < steps; ++k) {
        const std::size_t t = backward ? steps - 1 - k : k;
        if (probe) probe(l, backward, t);
        auto [hn, cn] = lstm_step(tape, w, xs[t], hs, cs);
        if (full[t]) {
          hs = hn;
          cs = cn;
        } else {
          // padded rows keep their state so each row sees only its own tokens
          hs = tape.select_rows(hn, hs, masks[t]);
          cs = tape.select_rows(cn, cs, masks[t]);
        }
        out[t] = hs;
      }
      return std::pair<Var, Var>{hs, cs};
    };
    const auto [hf, cf] = run(bp.enc_fwd[l], false, fwd);
    const auto [hb, cb] = run(bp.enc_bwd[l], true, bwd);
    enc.final_h.push_back(tape.concat_cols(hf, hb));
    enc.final_c.push_back(tape.concat_cols(cf, cb));
    for (std::size_t t = 0; t < steps; ++t) xs[t] = tape.concat_cols(fwd[t], bwd[t]);
  }
  enc.memory = std::move(xs);
  return enc;
}

struct DecoderState {
  std::vector<Var> h, c;  // per decoder layer
  Var feed;               // previous attentional state h~ (input feeding)
};

template <typename T>
DecoderState init_decoder(Tape<T>& tape, const BoundParams<T>& bp, const EncoderStates& enc) {
  DecoderState st;
  const std::size_t batch = enc.lengths.size();
  for (std::size_t l = 0; l < bp.dec.size(); ++l) {
    const std::size_t el = std::min(l, enc.final_h.size() - 1);
    const auto& br = bp.bridge[l];
    st.h.push_back(tape.add_bias(tape.matmul(enc.final_h[el], br[0]), br[1]));
    st.c.push_back(tape.add_bias(tape.matmul(enc.final_c[el], br[2]), br[3]));
  }
  st.feed = tape.constant(Matrix<T>(batch, bp.hidden));
  return st;
}

/// h~ = tanh(W_c [c_t; h_t]) with c_t = sum_s alpha_s h_s and
/// alpha = softmax_s(h_t^T W_a h_s).
struct Attended {
  Var state;  // h~
  Var alpha;
};

template <typename T>
Attended attend(Tape<T>& tape, Var h_top, const EncoderStates& enc, Var w_a, Var w_c) {
  const Var query = tape.matmul(h_top, w_a);
  const Var alpha = tape.attention_weights(query, enc.memory, enc.lengths);
  const Var context = tape.attention_context(alpha, enc.memory);
  const Var state = tape.tanh(tape.matmul(tape.concat_cols(context, h_top), w_c));
  return {state, alpha};
}

struct StepOutput {
  DecoderState state;
  Var logits;
  Var alpha;
};

template <typename T>
StepOutput decoder_step(Tape<T>& tape, const BoundParams<T>& bp, const DecoderState& prev,
                        std::span<const std::size_t> prev_ids, const EncoderStates& enc,
                        const RunMode& mode) {
  StepOutput out;
  Var x = tape.embedding(bp.tgt_embed, prev_ids);
  if (bp.input_feed) x = tape.concat_cols(x, prev.feed);
  for (std::size_t l = 0; l < bp.dec.size(); ++l) {
    if (l > 0) x = apply_dropout(tape, x, mode);
    auto [h, c] = lstm_step(tape, bp.dec[l], x, prev.h[l], prev.c[l]);
    out.state.h.push_back(h);
    out.state.c.push_back(c);
    x = h;
  }
  const Attended att = attend(tape, x, enc, bp.attn_score, bp.attn_out);
  out.state.feed = att.state;
  out.alpha = att.alpha;
  out.logits = tape.add_bias(tape.matmul(apply_dropout(tape, att.state, mode), bp.out_w), bp.out_b);
  return out;
}

/// Teacher-forced loss of a batch: each example's mean token NLL over
/// target + EOS, averaged over examples. Padding contributes nothing, so
/// the result equals the mean of the single-example losses.
template <typename T>
Var batch_loss(Tape<T>& tape, const BoundParams<T>& bp,
               const std::vector<std::vector<std::size_t>>& src,
               const std::vector<std::vector<std::size_t>>& tgt, const RunMode& mode) {
  if (src.size() != tgt.size()) throw InputError("batch_loss: source/target batch size differ");
  const std::size_t batch = src.size();
  std::size_t steps = 0;
  std::vector<T> weights(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    if (tgt[b].empty()) throw InputError("batch_loss: empty target sequence");
    steps = std::max(steps, tgt[b].size() + 1);
    weights[b] = T(1) / static_cast<T>((tgt[b].size() + 1) * batch);
  }
  const EncoderStates enc = encode(tape, bp, src, mode);
  DecoderState state = init_decoder(tape, bp, enc);
  std::vector<Var> terms;
  std::vector<std::size_t> prev(batch), target(batch);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t len = tgt[b].size();
      prev[b] = t == 0 ? CharVocab::kBos : (t - 1 < len ? tgt[b][t - 1] : CharVocab::kPad);
      target[b] = t < len ? tgt[b][t] : (t == len ? CharVocab::kEos : neural::kIgnoreIndex);
    }
    StepOutput step = decoder_step(tape, bp, state, prev, enc, mode);
    terms.push_back(tape.weighted_nll(step.logits, target, weights));
    state = std::move(step.state);
  }
  return tape.sum_scalars(terms);
}

/// Loss of one (source, target) id pair, evaluated without gradients.
template <typename T>
double forward_loss(Model<T>& m, const std::vector<std::size_t>& src,
                    const std::vector<std::size_t>& tgt) {
  Tape<T> tape(false);
  const BoundParams<T> bp(tape, m.params, m.config);
  return static_cast<double>(tape.scalar(batch_loss(tape, bp, {src}, {tgt}, RunMode{})));
}

template <typename T>
double forward_loss(Model<T>& m, const ChunkPair& chunk) {
  return forward_loss(m, m.vocab.encode(chunk.src_tokens), m.vocab.encode(chunk.tgt_tokens));
}

}  // namespace diacritize::model
