// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_GRADCHECK_HPP
#define AMR_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "amr/errors.hpp"
#include "amr/param_store.hpp"
#include "amr/rng.hpp"

namespace amr {

/// Central-difference verification of the analytic gradients currently
/// stored in `params`. `f` re-runs the forward pass against the store
/// and returns the scalar loss; it must not touch the gradients.
///
/// Error for one scalar is |analytic - numeric| / max(|analytic|,
/// |numeric|, 1), so small gradients are judged absolutely.
///
/// With samples_per_tensor > 0 only that many entries of each tensor are
/// probed (deterministically chosen from `seed`); 0 probes everything.
template <typename S>
double finite_difference_gradcheck(const std::function<double()>& f,
                                   ParamStoreT<S>& params, double h,
                                   std::size_t samples_per_tensor = 0,
                                   std::uint64_t seed = 0) {
  if (h <= 0) throw InputError("gradcheck: step size h must be positive");
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entry(i);
    const std::size_t n = e.value.numel();
    std::vector<std::size_t> probe;
    if (samples_per_tensor == 0 || samples_per_tensor >= n) {
      probe.resize(n);
      for (std::size_t j = 0; j < n; ++j) probe[j] = j;
    } else {
      Rng rng(mix_seed(seed, i));
      for (std::size_t j = 0; j < samples_per_tensor; ++j)
        probe.push_back(rng.uniform_index(n));
    }
    for (std::size_t j : probe) {
      const S saved = e.value.data[j];
      e.value.data[j] = S(double(saved) + h);
      const double fplus = f();
      e.value.data[j] = S(double(saved) - h);
      const double fminus = f();
      e.value.data[j] = saved;
      const double numeric = (fplus - fminus) / (2.0 * h);
      const double analytic = double(e.grad.data[j]);
      const double denom =
          std::max({std::fabs(analytic), std::fabs(numeric), 1.0});
      worst = std::max(worst, std::fabs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace amr

#endif  // AMR_GRADCHECK_HPP
