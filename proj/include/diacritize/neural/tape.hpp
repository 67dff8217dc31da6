#pragma once

// Reverse-mode differentiation over matrix-valued nodes.
//
// A Tape records each operation's output together with a closure that
// pushes the output gradient back to its inputs. Nodes are appended in
// evaluation order, so a reverse sweep is a valid topological order.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diacritize/error.hpp"
#include "diacritize/neural/matrix.hpp"
#include "diacritize/random.hpp"

namespace diacritize::neural {

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(T(0)); }
};

/// Handle to a tape node.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

template <typename T>
class Tape {
public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  /// With track_grads == false parameters are bound read-only and no
  /// backward closures are kept (inference).
  explicit Tape(bool track_grads = true) : track_grads_(track_grads) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // -- leaves ---------------------------------------------------------------

  Var constant(Matrix<T> value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
  }

  /// Leaf bound to a parameter. Its gradient accumulates straight into p.grad.
  Var param(Parameter<T>& p) {
    Node n;
    n.value_ref = &p.value;
    if (track_grads_) {
      n.grad_ref = &p.grad;
      n.needs_grad = true;
    }
    return push(std::move(n));
  }

  bool tracks_grads() const { return track_grads_; }

  /// Records an arbitrary node. `backward` reads grad(self) and adds into the
  /// gradients of its inputs; it only runs when some input needs a gradient.
  Var record(Matrix<T> value, std::initializer_list<Var> inputs, Backward backward) {
    Node n;
    n.value = std::move(value);
    for (Var v : inputs) n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
    if (n.needs_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  Var record(Matrix<T> value, std::span<const Var> inputs, Backward backward) {
    Node n;
    n.value = std::move(value);
    for (Var v : inputs) n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
    if (n.needs_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  const Matrix<T>& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.value_ref ? *n.value_ref : n.value;
  }

  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  /// Gradient buffer of a node, allocated (zeroed) on first use.
  Matrix<T>& grad(Var v) { return grad(v.id); }

  Matrix<T>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad_ref) return *n.grad_ref;
    if (n.grad.empty()) {
      const Matrix<T>& val = n.value_ref ? *n.value_ref : n.value;
      n.grad = Matrix<T>(val.rows(), val.cols());
    }
    return n.grad;
  }

  /// Seeds d(loss)/d(loss) = 1 and sweeps backwards. `loss` must be 1x1.
  void backward(Var loss) {
    const Matrix<T>& l = value(loss);
    if (l.rows() != 1 || l.cols() != 1) {
      throw ShapeError("backward: loss must be 1x1, got " + l.shape_string());
    }
    grad(loss)[0] += T(1);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.backward) continue;
      if (n.grad.empty()) continue;  // nothing flowed into this node
      n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  T scalar(Var v) const { return value(v)[0]; }

  // -- operations -----------------------------------------------------------

  Var matmul(Var a, Var b) {
    Matrix<T> out = neural::matmul(value(a), value(b));
    return record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      if (t.needs_grad(a)) gemm_nt(g, t.value(b), t.grad(a));
      if (t.needs_grad(b)) gemm_tn(t.value(a), g, t.grad(b));
    });
  }

  Var add(Var a, Var b) {
    Matrix<T> out = value(a);
    out += value(b);
    return record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      if (t.needs_grad(a)) t.grad(a) += g;
      if (t.needs_grad(b)) t.grad(b) += g;
    });
  }

  /// a + broadcast(bias), bias is 1 x cols.
  Var add_bias(Var a, Var bias) {
    Matrix<T> out = neural::add_rowwise(value(a), value(bias));
    return record(std::move(out), {a, bias}, [a, bias](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      if (t.needs_grad(a)) t.grad(a) += g;
      if (t.needs_grad(bias)) {
        Matrix<T>& gb = t.grad(bias);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          const T* gr = g.row_ptr(r);
          for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += gr[c];
        }
      }
    });
  }

  /// Elementwise product.
  Var mul(Var a, Var b) {
    const Matrix<T>& va = value(a);
    const Matrix<T>& vb = value(b);
    va.check_same(vb, "mul");
    Matrix<T> out(va.rows(), va.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
    return record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      if (t.needs_grad(a)) {
        Matrix<T>& ga = t.grad(a);
        const Matrix<T>& vb = t.value(b);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
      }
      if (t.needs_grad(b)) {
        Matrix<T>& gb = t.grad(b);
        const Matrix<T>& va = t.value(a);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
      }
    });
  }

  Var scale(Var a, T s) {
    Matrix<T> out = value(a);
    for (auto& v : out.values()) v *= s;
    return record(std::move(out), {a}, [a, s](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      Matrix<T>& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    });
  }

  Var sigmoid(Var a) {
    Matrix<T> out = neural::sigmoid(value(a));
    return record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      const Matrix<T>& y = t.nodes_[self].value;
      Matrix<T>& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
    });
  }

  Var tanh(Var a) {
    Matrix<T> out = neural::tanh(value(a));
    return record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      const Matrix<T>& y = t.nodes_[self].value;
      Matrix<T>& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
    });
  }

  Var softmax_rows(Var a) {
    Matrix<T> out = neural::softmax_rows(value(a));
    return record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      const Matrix<T>& y = t.nodes_[self].value;
      Matrix<T>& ga = t.grad(a);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        T dot = T(0);
        for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
      }
    });
  }

  Var concat_cols(Var a, Var b) {
    Matrix<T> out = neural::concat_cols(value(a), value(b));
    return record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      const std::size_t ca = t.value(a).cols();
      const std::size_t cb = t.value(b).cols();
      if (t.needs_grad(a)) {
        Matrix<T>& ga = t.grad(a);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < ca; ++c) ga(r, c) += g(r, c);
      }
      if (t.needs_grad(b)) {
        Matrix<T>& gb = t.grad(b);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < cb; ++c) gb(r, c) += g(r, ca + c);
      }
    });
  }

  /// Rows of `table` selected by `ids`.
  Var embedding(Var table, std::span<const std::size_t> ids) {
    const Matrix<T>& tab = value(table);
    Matrix<T> out(ids.size(), tab.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] >= tab.rows()) {
        throw InputError("embedding id " + std::to_string(ids[r]) + " out of range");
      }
      std::copy_n(tab.row_ptr(ids[r]), tab.cols(), out.row_ptr(r));
    }
    std::vector<std::size_t> rows(ids.begin(), ids.end());
    return record(std::move(out), {table}, [table, rows = std::move(rows)](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      Matrix<T>& gt = t.grad(table);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        T* dst = gt.row_ptr(rows[r]);
        const T* src = g.row_ptr(r);
        for (std::size_t c = 0; c < g.cols(); ++c) dst[c] += src[c];
      }
    });
  }

  /// Rows of `a` in the order given by `rows` (repeats allowed).
  Var gather_rows(Var a, std::span<const std::size_t> rows) {
    const Matrix<T>& va = value(a);
    Matrix<T> out(rows.size(), va.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy_n(va.row_ptr(rows[r]), va.cols(), out.row_ptr(r));
    }
    return record(std::move(out), {a},
                  [a, idx = std::vector<std::size_t>(rows.begin(), rows.end())](Tape& t, std::size_t self) {
                    const Matrix<T>& g = t.grad(self);
                    Matrix<T>& ga = t.grad(a);
                    for (std::size_t r = 0; r < idx.size(); ++r) {
                      T* dst = ga.row_ptr(idx[r]);
                      const T* src = g.row_ptr(r);
                      for (std::size_t c = 0; c < g.cols(); ++c) dst[c] += src[c];
                    }
                  });
  }

  /// Per-row blend: mask[r] ? fresh[r] : kept[r]. `mask` holds 0/1 per row.
  Var select_rows(Var fresh, Var kept, std::span<const unsigned char> mask) {
    const Matrix<T>& f = value(fresh);
    const Matrix<T>& k = value(kept);
    f.check_same(k, "select_rows");
    Matrix<T> out = k;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      if (mask[r]) std::copy_n(f.row_ptr(r), f.cols(), out.row_ptr(r));
    }
    std::vector<unsigned char> m(mask.begin(), mask.end());
    return record(std::move(out), {fresh, kept},
                  [fresh, kept, m = std::move(m)](Tape& t, std::size_t self) {
                    const Matrix<T>& g = t.grad(self);
                    const bool gf = t.needs_grad(fresh), gk = t.needs_grad(kept);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      if (m[r] ? !gf : !gk) continue;
                      Matrix<T>& dst = m[r] ? t.grad(fresh) : t.grad(kept);
                      for (std::size_t c = 0; c < g.cols(); ++c) dst(r, c) += g(r, c);
                    }
                  });
  }

  /// Inverted dropout: zeroes each entry with probability p, scales the rest
  /// by 1/(1-p). Identity when p == 0.
  Var dropout(Var a, double p, Rng& rng) {
    if (p <= 0.0) return a;
    const Matrix<T>& va = value(a);
    Matrix<T> mask(va.rows(), va.cols());
    const T keep_scale = T(1) / static_cast<T>(1.0 - p);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform01() < p ? T(0) : keep_scale;
    Matrix<T> out(va.rows(), va.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * mask[i];
    return record(std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      Matrix<T>& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
    });
  }

  /// LSTM memory update from pre-activation gates [i | f | g | o] (B x 4H):
  /// c = sigmoid(f) * c_prev + sigmoid(i) * tanh(g).
  Var lstm_cell_state(Var gates, Var c_prev) {
    const Matrix<T>& z = value(gates);
    const Matrix<T>& cp = value(c_prev);
    const std::size_t h = cp.cols();
    if (z.rows() != cp.rows() || z.cols() != 4 * h) shape_mismatch("lstm_cell_state", z, cp);
    Matrix<T> c(cp.rows(), h);
    for (std::size_t r = 0; r < c.rows(); ++r) {
      const T* zr = z.row_ptr(r);
      for (std::size_t j = 0; j < h; ++j) {
        const T ig = neural::sigmoid(zr[j]);
        const T fg = neural::sigmoid(zr[h + j]);
        const T gg = std::tanh(zr[2 * h + j]);
        c(r, j) = fg * cp(r, j) + ig * gg;
      }
    }
    return record(std::move(c), {gates, c_prev}, [gates, c_prev, h](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      const Matrix<T>& z = t.value(gates);
      const Matrix<T>& cp = t.value(c_prev);
      const bool need_z = t.needs_grad(gates), need_c = t.needs_grad(c_prev);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const T* zr = z.row_ptr(r);
        for (std::size_t j = 0; j < h; ++j) {
          const T ig = neural::sigmoid(zr[j]);
          const T fg = neural::sigmoid(zr[h + j]);
          const T gg = std::tanh(zr[2 * h + j]);
          const T d = g(r, j);
          if (need_z) {
            T* gz = t.grad(gates).row_ptr(r);
            gz[j] += d * gg * ig * (T(1) - ig);
            gz[h + j] += d * cp(r, j) * fg * (T(1) - fg);
            gz[2 * h + j] += d * ig * (T(1) - gg * gg);
          }
          if (need_c) t.grad(c_prev)(r, j) += d * fg;
        }
      }
    });
  }

  /// LSTM output h = sigmoid(o) * tanh(c), o taken from the gate block.
  Var lstm_hidden(Var gates, Var cell) {
    const Matrix<T>& z = value(gates);
    const Matrix<T>& c = value(cell);
    const std::size_t h = c.cols();
    if (z.rows() != c.rows() || z.cols() != 4 * h) shape_mismatch("lstm_hidden", z, c);
    Matrix<T> out(c.rows(), h);
    for (std::size_t r = 0; r < c.rows(); ++r) {
      const T* zr = z.row_ptr(r);
      for (std::size_t j = 0; j < h; ++j) out(r, j) = neural::sigmoid(zr[3 * h + j]) * std::tanh(c(r, j));
    }
    return record(std::move(out), {gates, cell}, [gates, cell, h](Tape& t, std::size_t self) {
      const Matrix<T>& g = t.grad(self);
      const Matrix<T>& z = t.value(gates);
      const Matrix<T>& c = t.value(cell);
      const bool need_z = t.needs_grad(gates), need_c = t.needs_grad(cell);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const T* zr = z.row_ptr(r);
        for (std::size_t j = 0; j < h; ++j) {
          const T og = neural::sigmoid(zr[3 * h + j]);
          const T tc = std::tanh(c(r, j));
          const T d = g(r, j);
          if (need_z) t.grad(gates)(r, 3 * h + j) += d * tc * og * (T(1) - og);
          if (need_c) t.grad(cell)(r, j) += d * og * (T(1) - tc * tc);
        }
      }
    });
  }

  /// Bilinear attention weights. Row b scores query[b] against memory[s][b]
  /// for s < lengths[b] and softmax-normalizes; positions past the length get
  /// weight exactly 0. query and every memory entry are B x D.
  Var attention_weights(Var query, std::span<const Var> memory, std::span<const std::size_t> lengths) {
    const Matrix<T>& q = value(query);
    const std::size_t batch = q.rows(), d = q.cols(), steps = memory.size();
    Matrix<T> alpha(batch, steps);
    std::vector<T> scores(steps);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t len = lengths[b];
      if (len == 0 || len > steps) throw ShapeError("attention_weights: bad source length");
      const T* qr = q.row_ptr(b);
      for (std::size_t s = 0; s < len; ++s) {
        const T* mr = value(memory[s]).row_ptr(b);
        T acc = T(0);
        for (std::size_t k = 0; k < d; ++k) acc += qr[k] * mr[k];
        scores[s] = acc;
      }
      softmax_row<T>(std::span<const T>(scores.data(), len), alpha.row(b).subspan(0, len));
    }
    std::vector<Var> inputs(memory.begin(), memory.end());
    inputs.push_back(query);
    std::vector<std::size_t> lens(lengths.begin(), lengths.end());
    return record(std::move(alpha), inputs,
                  [query, mem = std::vector<Var>(memory.begin(), memory.end()),
                   lens = std::move(lens)](Tape& t, std::size_t self) {
                    const Matrix<T>& g = t.grad(self);
                    const Matrix<T>& a = t.nodes_[self].value;
                    const Matrix<T>& q = t.value(query);
                    const std::size_t d = q.cols();
                    for (std::size_t b = 0; b < a.rows(); ++b) {
                      T dot = T(0);
                      for (std::size_t s = 0; s < lens[b]; ++s) dot += g(b, s) * a(b, s);
                      for (std::size_t s = 0; s < lens[b]; ++s) {
                        const T ds = a(b, s) * (g(b, s) - dot);
                        if (ds == T(0)) continue;
                        if (t.needs_grad(query)) {
                          const T* mr = t.value(mem[s]).row_ptr(b);
                          T* gq = t.grad(query).row_ptr(b);
                          for (std::size_t k = 0; k < d; ++k) gq[k] += ds * mr[k];
                        }
                        if (t.needs_grad(mem[s])) {
                          const T* qr = q.row_ptr(b);
                          T* gm = t.grad(mem[s]).row_ptr(b);
                          for (std::size_t k = 0; k < d; ++k) gm[k] += ds * qr[k];
                        }
                      }
                    }
                  });
  }

  /// context[b] = sum_s alpha[b, s] * memory[s][b].
  Var attention_context(Var alpha, std::span<const Var> memory) {
    const Matrix<T>& a = value(alpha);
    const std::size_t batch = a.rows(), steps = memory.size();
    if (a.cols() != steps) throw ShapeError("attention_context: weight/memory length mismatch");
    const std::size_t d = value(memory[0]).cols();
    Matrix<T> ctx(batch, d);
    for (std::size_t s = 0; s < steps; ++s) {
      const Matrix<T>& m = value(memory[s]);
      for (std::size_t b = 0; b < batch; ++b) {
        const T w = a(b, s);
        if (w == T(0)) continue;
        const T* mr = m.row_ptr(b);
        T* cr = ctx.row_ptr(b);
        for (std::size_t k = 0; k < d; ++k) cr[k] += w * mr[k];
      }
    }
    std::vector<Var> inputs(memory.begin(), memory.end());
    inputs.push_back(alpha);
    return record(std::move(ctx), inputs,
                  [alpha, mem = std::vector<Var>(memory.begin(), memory.end())](Tape& t,
                                                                                 std::size_t self) {
                    const Matrix<T>& g = t.grad(self);
                    const Matrix<T>& a = t.value(alpha);
                    const std::size_t d = g.cols();
                    for (std::size_t s = 0; s < mem.size(); ++s) {
                      const Matrix<T>& m = t.value(mem[s]);
                      const bool need_m = t.needs_grad(mem[s]);
                      for (std::size_t b = 0; b < g.rows(); ++b) {
                        const T* gr = g.row_ptr(b);
                        if (t.needs_grad(alpha)) {
                          const T* mr = m.row_ptr(b);
                          T acc = T(0);
                          for (std::size_t k = 0; k < d; ++k) acc += gr[k] * mr[k];
                          t.grad(alpha)(b, s) += acc;
                        }
                        const T w = a(b, s);
                        if (need_m && w != T(0)) {
                          T* gm = t.grad(mem[s]).row_ptr(b);
                          for (std::size_t k = 0; k < d; ++k) gm[k] += w * gr[k];
                        }
                      }
                    }
                  });
  }

  /// Weighted negative log-likelihood: sum_r weights[r] * -log softmax(logits[r])[targets[r]].
  /// Rows with target kIgnoreIndex contribute nothing. Returns 1x1.
  Var weighted_nll(Var logits, std::span<const std::size_t> targets, std::span<const T> weights) {
    const Matrix<T>& z = value(logits);
    if (targets.size() != z.rows() || weights.size() != z.rows()) {
      throw ShapeError("weighted_nll: target/weight count does not match " + z.shape_string());
    }
    Matrix<T> probs(z.rows(), z.cols());
    std::vector<T> lp(z.cols());
    T total = T(0);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      if (targets[r] == kIgnoreIndex) continue;
      if (targets[r] >= z.cols()) {
        throw InputError("target index " + std::to_string(targets[r]) + " out of range for " +
                         std::to_string(z.cols()) + " classes");
      }
      log_softmax_row<T>(z.row(r), lp);
      total -= weights[r] * lp[targets[r]];
      for (std::size_t c = 0; c < z.cols(); ++c) probs(r, c) = std::exp(lp[c]);
    }
    std::vector<std::size_t> tg(targets.begin(), targets.end());
    std::vector<T> w(weights.begin(), weights.end());
    return record(Matrix<T>(1, 1, total), {logits},
                  [logits, probs = std::move(probs), tg = std::move(tg), w = std::move(w)](
                      Tape& t, std::size_t self) {
                    const T g = t.grad(self)[0];
                    Matrix<T>& gz = t.grad(logits);
                    for (std::size_t r = 0; r < tg.size(); ++r) {
                      if (tg[r] == kIgnoreIndex) continue;
                      const T s = g * w[r];
                      T* gr = gz.row_ptr(r);
                      const T* pr = probs.row_ptr(r);
                      for (std::size_t c = 0; c < gz.cols(); ++c) gr[c] += s * pr[c];
                      gr[tg[r]] -= s;
                    }
                  });
  }

  /// Masked mean cross entropy, matching neural::cross_entropy.
  Var cross_entropy(Var logits, std::span<const std::size_t> targets) {
    std::size_t count = 0;
    for (auto t : targets) count += t != kIgnoreIndex;
    const T w = count ? T(1) / static_cast<T>(count) : T(0);
    std::vector<T> weights(targets.size(), w);
    return weighted_nll(logits, targets, weights);
  }

  /// Sum of 1x1 nodes.
  Var sum_scalars(std::span<const Var> terms) {
    T total = T(0);
    for (Var v : terms) total += value(v)[0];
    return record(Matrix<T>(1, 1, total), terms,
                  [ts = std::vector<Var>(terms.begin(), terms.end())](Tape& t, std::size_t self) {
                    const T g = t.grad(self)[0];
                    for (Var v : ts) {
                      if (t.needs_grad(v)) t.grad(v)[0] += g;
                    }
                  });
  }

  /// Sum of every entry, as 1x1.
  Var sum(Var a) {
    T total = T(0);
    for (T v : value(a).values()) total += v;
    return record(Matrix<T>(1, 1, total), {a}, [a](Tape& t, std::size_t self) {
      const T g = t.grad(self)[0];
      for (auto& v : t.grad(a).values()) v += g;
    });
  }

private:
  struct Node {
    Matrix<T> value;
    const Matrix<T>* value_ref = nullptr;
    Matrix<T> grad;
    Matrix<T>* grad_ref = nullptr;
    bool needs_grad = false;
    Backward backward;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool track_grads_ = true;
};

}  // namespace diacritize::neural
