#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "diacritize/error.hpp"
#include "diacritize/neural/tape.hpp"

namespace diacritize::neural {

enum class OptimizerKind { kSgd, kAdam };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw InputError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

/// Global L2 norm over every parameter gradient.
template <typename T>
double global_grad_norm(std::span<Parameter<T>* const> params) {
  double sq = 0.0;
  for (auto* p : params) {
    for (T g : p->grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

/// Rescales all gradients so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(std::span<Parameter<T>* const> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto* p : params) {
      for (T& g : p->grad.values()) g *= s;
    }
  }
  return norm;
}

/// Plain SGD or Adam (beta1 0.9, beta2 0.999, eps 1e-8).
template <typename T>
class Optimizer {
public:
  explicit Optimizer(OptimizerKind kind) : kind_(kind) {}

  OptimizerKind kind() const { return kind_; }

  void step(std::span<Parameter<T>* const> params, double lr) {
    ++t_;
    if (kind_ == OptimizerKind::kSgd) {
      for (auto* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
          p->value[i] -= static_cast<T>(lr) * p->grad[i];
        }
      }
      return;
    }
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
      }
    }
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        p.value[i] -= static_cast<T>(update);
      }
    }
  }

private:
  OptimizerKind kind_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace diacritize::neural
