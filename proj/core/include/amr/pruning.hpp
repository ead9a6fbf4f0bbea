// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_PRUNING_HPP
#define AMR_PRUNING_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "amr/model.hpp"
#include "amr/param_store.hpp"

namespace amr {

/// Cubic sparsity ramp
///   s(t) = s_f + (s_i - s_f) * (1 - (t - t0) / (n * dt))^3
/// defined on the step grid {t0, t0 + dt, ..., t0 + n*dt}.
struct SparsitySchedule {
  double initial_sparsity = 0.0;  // s_i in [0, 1)
  double final_sparsity = 0.8;    // s_f in (s_i, 1]
  long start_step = 0;            // t0
  long frequency = 100;           // dt, steps between mask updates
  long increments = 1;            // n

  void validate() const;
  long end_step() const { return start_step + increments * frequency; }
};

/// Sparsity at grid step t; throws InputError off the grid.
double sparsity_at(const SparsitySchedule& sched, long t);

/// Per-tensor binary masks, keyed by parameter name. Iteration over
/// std::map keys is deterministic.
struct MaskSet {
  std::map<std::string, std::vector<std::uint8_t>> masks;

  bool empty() const { return masks.empty(); }
};

/// Re-derives masks so that for each prunable tensor the
/// floor(s * N) smallest-magnitude weights are zeroed (ties pruned at
/// the lower flat index first) and multiplies the weights by the mask
/// in place. Already-zero weights sort smallest, so masks are monotone
/// under increasing s.
void apply_magnitude_masks(ParamStore& params, MaskSet& masks, double s);

/// Weight scalars with a nonzero mask plus every non-prunable scalar.
std::size_t count_nnz(const ParamStore& params, const MaskSet& masks);

/// Re-zeroes masked weights (used after each optimizer step).
void enforce_masks(ParamStore& params, const MaskSet& masks);

/// Zeroes the gradients of masked weights so pruned weights receive no
/// update.
void mask_grads(ParamStore& params, const MaskSet& masks);

/// Model-level sparsity targets count zeros against the TOTAL parameter
/// count while biases stay unpruned, so the per-kernel sparsity is
/// scaled up by total/prunable. This is what reproduces the published
/// NNZ table: e.g. 71,871 * 0.2 = 14,374 remaining at sparsity 0.8.
double kernel_sparsity_for_target(const ParamStore& params,
                                  double model_sparsity);

struct PruneReport {
  MaskSet masks;
  std::size_t nnz_total = 0;
  std::map<std::string, std::size_t> nnz_per_tensor;
  std::vector<double> finetune_loss;  // per epoch
  long steps_run = 0;
};

}  // namespace amr

#endif  // AMR_PRUNING_HPP
