#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "diacritize/error.hpp"
#include "diacritize/neural/tape.hpp"
#include "diacritize/random.hpp"

namespace diacritize::neural {

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t min_coordinates = 200;
  uint64_t seed = 7;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

namespace detail {

/// At least min(total, want) coordinates, spread evenly over parameters.
template <typename T>
std::vector<std::set<std::size_t>> sample_coordinates(std::span<Parameter<T>* const> params,
                                                      std::size_t want, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::set<std::size_t>> picks(params.size());
  std::size_t total = 0;
  for (auto* p : params) total += p->value.size();
  const std::size_t target = std::min(total, want);
  if (params.empty() || target == 0) return picks;
  const std::size_t quota = (target + params.size() - 1) / params.size();
  std::size_t picked = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i]->value.size();
    while (picks[i].size() < std::min(n, quota)) {
      picks[i].insert(static_cast<std::size_t>(rng.uniform_index(n)));
    }
    picked += picks[i].size();
  }
  while (picked < target) {
    const auto i = static_cast<std::size_t>(rng.uniform_index(params.size()));
    const std::size_t n = params[i]->value.size();
    if (picks[i].size() == n) continue;
    if (picks[i].insert(static_cast<std::size_t>(rng.uniform_index(n))).second) ++picked;
  }
  return picks;
}

}  // namespace detail

/// Compares reverse-mode gradients of `params` with central differences
/// (f(x+eps) - f(x-eps)) / 2eps evaluated on a mirror parameter set.
///
/// `build` / `ref_build` record a scalar loss on the tape they are given.
/// `ref_params` must hold the same values as `params`, possibly in a wider
/// type so the finite differences are not limited by the rounding of T.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8).
template <typename T, typename R, typename Build, typename RefBuild>
GradCheckResult grad_check(std::span<Parameter<T>* const> params, Build&& build,
                           std::span<Parameter<R>* const> ref_params, RefBuild&& ref_build,
                           const GradCheckOptions& opts = {}) {
  if (params.size() != ref_params.size()) {
    throw ShapeError("grad_check: reference parameter set differs in size");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.rows() != ref_params[i]->value.rows() ||
        params[i]->value.cols() != ref_params[i]->value.cols()) {
      throw ShapeError("grad_check: reference shape mismatch for " + params[i]->name);
    }
  }

  for (auto* p : params) p->zero_grad();
  {
    Tape<T> tape;
    const Var loss = build(tape);
    if (!std::isfinite(static_cast<double>(tape.scalar(loss)))) {
      throw NumericError("grad_check: non-finite loss");
    }
    tape.backward(loss);
  }

  auto evaluate = [&] {
    Tape<R> tape(false);
    const R v = tape.scalar(ref_build(tape));
    if (!std::isfinite(static_cast<double>(v))) throw NumericError("grad_check: non-finite loss");
    return v;
  };

  const auto picks = detail::sample_coordinates(params, opts.min_coordinates, opts.seed);
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& ref = *ref_params[i];
    for (std::size_t idx : picks[i]) {
      const R saved = ref.value[idx];
      ref.value[idx] = saved + static_cast<R>(opts.eps);
      const R up = evaluate();
      ref.value[idx] = saved - static_cast<R>(opts.eps);
      const R down = evaluate();
      ref.value[idx] = saved;
      const double numeric = static_cast<double>((up - down) / (R(2) * static_cast<R>(opts.eps)));
      const double analytic = static_cast<double>(params[i]->grad[idx]);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      if (result.coordinates == 0 || rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = params[i]->name;
        result.worst_index = idx;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
      ++result.coordinates;
    }
  }
  return result;
}

/// Same-precision check: finite differences perturb `params` themselves.
template <typename T, typename Build>
GradCheckResult grad_check(std::span<Parameter<T>* const> params, Build&& build,
                           const GradCheckOptions& opts = {}) {
  return grad_check(params, build, params, build, opts);
}

}  // namespace diacritize::neural
