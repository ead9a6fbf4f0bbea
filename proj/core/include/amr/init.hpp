// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_INIT_HPP
#define AMR_INIT_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "amr/rng.hpp"
#include "amr/tensor.hpp"

namespace amr {

/// Uniform Glorot in [-sqrt(6/(fan_in+fan_out)), +...].
template <typename S>
void glorot_uniform(TensorT<S>& t, std::size_t fan_in, std::size_t fan_out,
                    Rng& rng) {
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  for (S& v : t.data) v = S(rng.uniform(-limit, limit));
}

/// Fills a [units, gates*units] matrix with per-gate orthogonal blocks,
/// obtained by modified Gram-Schmidt on a Gaussian square matrix.
template <typename S>
void orthogonal_blocks(TensorT<S>& t, std::size_t units, std::size_t gates,
                       Rng& rng) {
  std::vector<double> q(units * units);
  for (std::size_t g = 0; g < gates; ++g) {
    for (double& v : q) v = rng.normal();
    // Orthonormalize columns.
    for (std::size_t c = 0; c < units; ++c) {
      for (std::size_t prev = 0; prev < c; ++prev) {
        double dot = 0;
        for (std::size_t r = 0; r < units; ++r)
          dot += q[r * units + c] * q[r * units + prev];
        for (std::size_t r = 0; r < units; ++r)
          q[r * units + c] -= dot * q[r * units + prev];
      }
      double norm = 0;
      for (std::size_t r = 0; r < units; ++r)
        norm += q[r * units + c] * q[r * units + c];
      norm = std::sqrt(norm);
      // A degenerate draw is vanishingly unlikely; re-seed the column.
      if (norm < 1e-12) {
        for (std::size_t r = 0; r < units; ++r)
          q[r * units + c] = rng.normal();
        --c;
        continue;
      }
      for (std::size_t r = 0; r < units; ++r) q[r * units + c] /= norm;
    }
    for (std::size_t r = 0; r < units; ++r)
      for (std::size_t c = 0; c < units; ++c)
        t.data[r * gates * units + g * units + c] = S(q[r * units + c]);
  }
}

}  // namespace amr

#endif  // AMR_INIT_HPP
