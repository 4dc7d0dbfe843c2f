#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "das/error.hpp"
#include "das/tensor.hpp"
#include "das/util.hpp"

namespace das::train {

using num::Shape;
using num::Tensor;

// 53-bit uniform in [0, 1); avoids std::uniform_real_distribution so the
// stream is identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Entries i.i.d. uniform on [-b, b], b = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_uniform(int64_t fan_in, int64_t fan_out, std::mt19937_64& rng) {
  if (fan_in <= 0 || fan_out <= 0) raise(ErrorCategory::contract, "fans must be positive");
  const double b = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t(Shape{fan_in, fan_out});
  for (int64_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<T>(b * (2.0 * uniform01(rng) - 1.0));
  }
  return t;
}

// lr = d_model^{-0.5} * min(step^{-0.5}, step * ws^{-1.5}): linear warmup to
// step ws, then inverse-square-root decay.
inline double noam_lr(int64_t step, int64_t d_model, int64_t warmup_steps) {
  if (step < 1) raise(ErrorCategory::contract, "noam schedule is defined for steps >= 1");
  if (d_model < 1 || warmup_steps < 1) {
    raise(ErrorCategory::config, "noam schedule needs positive d_model and warmup steps");
  }
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup_steps);
  return std::pow(static_cast<double>(d_model), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  int64_t step = 0;
  std::vector<Tensor<T>> m, v;
};

// Standard Adam with bias correction. Aborts on a NaN gradient, naming the
// offending parameter.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
               const std::vector<std::string>& names, AdamState<T>& state, double lr) {
  if (params.size() != grads.size() || params.size() != names.size()) {
    raise(ErrorCategory::contract, "adam_step: params/grads/names size mismatch");
  }
  if (state.m.empty()) {
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const auto* p : params) {
      state.m.emplace_back(p->shape);
      state.v.emplace_back(p->shape);
    }
  }
  if (state.m.size() != params.size()) {
    raise(ErrorCategory::contract, "adam_step: optimizer state does not match parameter list");
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor<T>& p = *params[k];
    const Tensor<T>& g = *grads[k];
    if (g.shape != p.shape) {
      raise(ErrorCategory::contract,
            strfmt("adam_step: gradient shape mismatch for '%s'", names[k].c_str()));
    }
    Tensor<T>& m = state.m[k];
    Tensor<T>& v = state.v[k];
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double gi = static_cast<double>(g[i]);
      if (std::isnan(gi)) {
        raise(ErrorCategory::contract,
              strfmt("gradient for parameter '%s' contains NaN", names[k].c_str()));
      }
      const double mi = state.beta1 * static_cast<double>(m[i]) + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * static_cast<double>(v[i]) + (1.0 - state.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

// Scales gradients in place when their global L2 norm exceeds max_norm;
// returns the pre-clip norm.
template <typename T>
double clip_global_norm(const std::vector<Tensor<T>*>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto* g : grads) {
    for (int64_t i = 0; i < g->numel(); ++i) {
      const double v = static_cast<double>((*g)[i]);
      sq += v * v;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto* g : grads) {
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] *= factor;
    }
  }
  return norm;
}

// Deterministic Fisher-Yates; std::shuffle's draw pattern is not pinned by
// the standard.
template <typename V>
void shuffle_indices(std::vector<V>& items, std::mt19937_64& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

// One epoch's sample stream: every majority-class item once, minority items
// replicated (full copies plus seeded draws with replacement) until the
// classes balance 1:1, then shuffled.
inline std::vector<size_t> oversample_indices(const std::vector<int>& labels,
                                              std::mt19937_64& rng) {
  std::vector<size_t> pos, neg;
  for (size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) {
    raise(ErrorCategory::data,
          strfmt("oversampling needs both classes; got %zu positive / %zu negative", pos.size(),
                 neg.size()));
  }
  const auto& minority = pos.size() <= neg.size() ? pos : neg;
  const auto& majority = pos.size() <= neg.size() ? neg : pos;

  std::vector<size_t> stream;
  stream.reserve(2 * majority.size());
  stream.insert(stream.end(), majority.begin(), majority.end());
  const size_t copies = majority.size() / minority.size();
  const size_t remainder = majority.size() % minority.size();
  for (size_t c = 0; c < copies; ++c) {
    stream.insert(stream.end(), minority.begin(), minority.end());
  }
  for (size_t i = 0; i < remainder; ++i) {
    stream.push_back(minority[static_cast<size_t>(rng() % minority.size())]);
  }
  shuffle_indices(stream, rng);
  return stream;
}

}  // namespace das::train
