// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_LOSS_HPP
#define AMR_LOSS_HPP

#include <cmath>
#include <cstddef>
#include <utility>

#include "amr/errors.hpp"
#include "amr/tensor.hpp"

namespace amr {

template <typename S>
struct LossResult {
  S loss;
  TensorT<S> grad;  // d loss / d logits, [batch, classes]
};

/// Mean categorical cross-entropy over the batch, fused with softmax.
/// labels must be one-hot rows.
template <typename S>
LossResult<S> softmax_cross_entropy(const TensorT<S>& logits,
                                    const TensorT<S>& labels) {
  if (logits.rank() != 2) throw DimensionError("logits must be [batch, C]");
  require_shape(labels, logits.shape, "labels");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);

  LossResult<S> res{S(0), TensorT<S>(logits.shape)};
  for (std::size_t b = 0; b < batch; ++b) {
    const S* lrow = labels.ptr() + b * classes;
    std::size_t ones = 0, truth = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (lrow[c] == S(1)) {
        ++ones;
        truth = c;
      } else if (lrow[c] != S(0)) {
        throw InputError("label row is not one-hot");
      }
    }
    if (ones != 1) throw InputError("label row is not one-hot");

    const S* row = logits.ptr() + b * classes;
    S mx = row[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    S sum = 0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - mx);
    const S log_sum = std::log(sum);
    res.loss += -(row[truth] - mx - log_sum);

    S* grow = res.grad.ptr() + b * classes;
    const S inv_batch = S(1) / S(batch);
    for (std::size_t c = 0; c < classes; ++c) {
      const S p = std::exp(row[c] - mx) / sum;
      grow[c] = (p - lrow[c]) * inv_batch;
    }
  }
  res.loss /= S(batch);
  return res;
}

}  // namespace amr

#endif  // AMR_LOSS_HPP
