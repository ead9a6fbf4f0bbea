// SPDX-License-Identifier: Apache-2.0
#include "amr/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amr/errors.hpp"

namespace amr {

void SparsitySchedule::validate() const {
  if (!(initial_sparsity >= 0.0 && initial_sparsity < 1.0))
    throw InputError("initial sparsity must be in [0, 1)");
  if (!(final_sparsity > initial_sparsity && final_sparsity <= 1.0))
    throw InputError("final sparsity must be in (initial, 1]");
  if (start_step < 0) throw InputError("start step must be >= 0");
  if (frequency < 1) throw InputError("pruning frequency must be >= 1");
  if (increments < 1) throw InputError("increments must be >= 1");
}

double sparsity_at(const SparsitySchedule& sched, long t) {
  sched.validate();
  if (t < sched.start_step || t > sched.end_step() ||
      (t - sched.start_step) % sched.frequency != 0)
    throw InputError("step " + std::to_string(t) +
                     " is not on the pruning schedule grid");
  const double progress = double(t - sched.start_step) /
                          double(sched.increments * sched.frequency);
  const double keep = 1.0 - progress;
  return sched.final_sparsity +
         (sched.initial_sparsity - sched.final_sparsity) * keep * keep * keep;
}

void apply_magnitude_masks(ParamStore& params, MaskSet& masks, double s) {
  if (!(s >= 0.0 && s < 1.0))
    throw InputError("sparsity must be in [0, 1), got " + std::to_string(s));
  for (auto& e : params) {
    if (!e.prunable) continue;
    const std::size_t n = e.value.numel();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const float* w = e.value.ptr();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const float ma = std::fabs(w[a]), mb = std::fabs(w[b]);
      return ma != mb ? ma < mb : a < b;
    });

    auto& mask = masks.masks[e.name];
    mask.assign(n, 1);
    const std::size_t cut = std::size_t(std::floor(s * double(n)));
    for (std::size_t i = 0; i < cut; ++i) mask[order[i]] = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (!mask[i]) e.value.data[i] = 0.0f;
  }
}

std::size_t count_nnz(const ParamStore& params, const MaskSet& masks) {
  std::size_t nnz = 0;
  for (const auto& e : params) {
    auto it = masks.masks.find(e.name);
    if (e.prunable && it != masks.masks.end()) {
      for (std::uint8_t m : it->second) nnz += m;
    } else {
      nnz += e.value.numel();
    }
  }
  return nnz;
}

void enforce_masks(ParamStore& params, const MaskSet& masks) {
  for (auto& e : params) {
    auto it = masks.masks.find(e.name);
    if (it == masks.masks.end()) continue;
    for (std::size_t i = 0; i < it->second.size(); ++i)
      if (!it->second[i]) e.value.data[i] = 0.0f;
  }
}

void mask_grads(ParamStore& params, const MaskSet& masks) {
  for (auto& e : params) {
    auto it = masks.masks.find(e.name);
    if (it == masks.masks.end()) continue;
    for (std::size_t i = 0; i < it->second.size(); ++i)
      if (!it->second[i]) e.grad.data[i] = 0.0f;
  }
}

double kernel_sparsity_for_target(const ParamStore& params,
                                  double model_sparsity) {
  if (!(model_sparsity >= 0.0 && model_sparsity < 1.0))
    throw InputError("target sparsity must be in [0, 1)");
  const double total = double(params.total_scalars());
  const double prunable = double(params.prunable_scalars());
  if (prunable == 0.0) return 0.0;
  const double s = model_sparsity * total / prunable;
  if (s >= 1.0)
    throw InputError("target sparsity unreachable with biases unpruned");
  return s;
}

}  // namespace amr
