// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_ADAM_HPP
#define AMR_ADAM_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "amr/param_store.hpp"
#include "amr/tensor.hpp"

namespace amr {

/// Bias-corrected Adam. Moments are allocated lazily against the store
/// layout on the first step.
template <typename S>
struct AdamStateT {
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::vector<TensorT<S>> m;
  std::vector<TensorT<S>> v;
};

using AdamState = AdamStateT<float>;

template <typename S>
void adam_step(ParamStoreT<S>& params, AdamStateT<S>& state) {
  if (state.m.empty()) {
    for (const auto& e : params) {
      state.m.emplace_back(e.value.shape);
      state.v.emplace_back(e.value.shape);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entry(i);
    S* w = e.value.ptr();
    S* g = e.grad.ptr();
    S* m = state.m[i].ptr();
    S* v = state.v[i].ptr();
    const std::size_t n = e.value.numel();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = S(state.beta1) * m[j] + S(1.0 - state.beta1) * g[j];
      v[j] = S(state.beta2) * v[j] + S(1.0 - state.beta2) * g[j] * g[j];
      const double mhat = double(m[j]) / bc1;
      const double vhat = double(v[j]) / bc2;
      w[j] -= S(state.lr * mhat / (std::sqrt(vhat) + state.epsilon));
      g[j] = S(0);
    }
  }
}

}  // namespace amr

#endif  // AMR_ADAM_HPP
