// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_MATMUL_HPP
#define AMR_MATMUL_HPP

#include <cstddef>

namespace amr {

// Accumulation over the contraction index is strictly ascending in all
// kernels below, so results are bit-identical to a naive triple loop.

/// c[m,n] += a[m,k] * b[k,n]
template <typename S>
void matmul_nn(const S* __restrict a, const S* __restrict b, S* __restrict c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    S* crow = c + i * n;
    const S* arow = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const S av = arow[kk];
      const S* brow = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// c[m,n] += a^T * b with a stored as [k,m], b as [k,n]
template <typename S>
void matmul_tn(const S* __restrict a, const S* __restrict b, S* __restrict c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t kk = 0; kk < k; ++kk) {
    const S* arow = a + kk * m;
    const S* brow = b + kk * n;
    for (std::size_t i = 0; i < m; ++i) {
      const S av = arow[i];
      S* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// out[n,m] = a^T with a stored as [m,n]
template <typename S>
void transpose(const S* a, S* out, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
}

}  // namespace amr

#endif  // AMR_MATMUL_HPP
