// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_GRU_HPP
#define AMR_GRU_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "amr/errors.hpp"
#include "amr/matmul.hpp"
#include "amr/param_store.hpp"
#include "amr/tensor.hpp"

namespace amr {

// Reset-after GRU with two bias vectors (cuDNN/Keras v2 convention) and
// gate order [update z | reset r | candidate c] along the 3*units axis:
//   z_t = sigmoid(x_t Wz + bz_in + h_{t-1} Uz + bz_rec)
//   r_t = sigmoid(x_t Wr + br_in + h_{t-1} Ur + br_rec)
//   c_t = tanh  (x_t Wc + bc_in + r_t * (h_{t-1} Uc + bc_rec))
//   h_t = z_t * h_{t-1} + (1 - z_t) * c_t
//
// kernel: [in, 3u], recurrent: [u, 3u], bias: [2, 3u] (row 0 input-side,
// row 1 recurrent-side).

template <typename S>
inline S sigmoid(S v) {
  return S(1) / (S(1) + std::exp(-v));
}

template <typename S>
struct GruCache {
  std::size_t batch = 0, steps = 0, in = 0, units = 0;
  std::vector<S> xw;      // [batch, T, 3u] input projection + input bias
  std::vector<S> h;       // [T+1, batch, u] hidden states, h[0] = 0
  std::vector<S> z, r, c; // [T, batch, u]
  std::vector<S> p;       // [T, batch, u] recurrent candidate preact
};

template <typename S>
void gru_check_params(const TensorT<S>& kernel, const TensorT<S>& recurrent,
                      const TensorT<S>& bias, std::size_t in,
                      std::size_t units) {
  require_shape(kernel, {in, 3 * units}, "gru kernel");
  require_shape(recurrent, {units, 3 * units}, "gru recurrent kernel");
  require_shape(bias, {2, 3 * units}, "gru bias");
}

/// Runs the full sequence and fills the cache. Returns nothing; the
/// final hidden state is cache.h's last block.
template <typename S>
void gru_forward_cached(const TensorT<S>& x, const TensorT<S>& kernel,
                        const TensorT<S>& recurrent, const TensorT<S>& bias,
                        std::size_t units, GruCache<S>& cache) {
  if (x.rank() != 3) throw DimensionError("gru: input must be [batch, T, in]");
  const std::size_t batch = x.dim(0), steps = x.dim(1), in = x.dim(2);
  gru_check_params(kernel, recurrent, bias, in, units);
  const std::size_t u3 = 3 * units;

  cache.batch = batch;
  cache.steps = steps;
  cache.in = in;
  cache.units = units;
  cache.xw.assign(batch * steps * u3, S(0));
  cache.h.assign((steps + 1) * batch * units, S(0));
  cache.z.assign(steps * batch * units, S(0));
  cache.r.assign(steps * batch * units, S(0));
  cache.c.assign(steps * batch * units, S(0));
  cache.p.assign(steps * batch * units, S(0));

  // Input projection for every timestep at once: [batch*T, in] x [in, 3u].
  for (std::size_t row = 0; row < batch * steps; ++row)
    std::copy(bias.ptr(), bias.ptr() + u3, cache.xw.data() + row * u3);
  matmul_nn(x.ptr(), kernel.ptr(), cache.xw.data(), batch * steps, in, u3);

  const S* brec = bias.ptr() + u3;
  std::vector<S> g(batch * u3);
  for (std::size_t t = 0; t < steps; ++t) {
    const S* hprev = cache.h.data() + t * batch * units;
    S* hnext = cache.h.data() + (t + 1) * batch * units;
    for (std::size_t row = 0; row < batch; ++row)
      std::copy(brec, brec + u3, g.data() + row * u3);
    matmul_nn(hprev, recurrent.ptr(), g.data(), batch, units, u3);

    S* zt = cache.z.data() + t * batch * units;
    S* rt = cache.r.data() + t * batch * units;
    S* ct = cache.c.data() + t * batch * units;
    S* pt = cache.p.data() + t * batch * units;
    for (std::size_t b = 0; b < batch; ++b) {
      // xw rows are laid out [batch, T, 3u]
      const S* xwr = cache.xw.data() + (b * steps + t) * u3;
      const S* gr = g.data() + b * u3;
      const S* hp = hprev + b * units;
      S* hn = hnext + b * units;
      for (std::size_t j = 0; j < units; ++j) {
        const S z = sigmoid(xwr[j] + gr[j]);
        const S r = sigmoid(xwr[units + j] + gr[units + j]);
        const S p = gr[2 * units + j];
        const S c = std::tanh(xwr[2 * units + j] + r * p);
        zt[b * units + j] = z;
        rt[b * units + j] = r;
        pt[b * units + j] = p;
        ct[b * units + j] = c;
        hn[j] = z * hp[j] + (S(1) - z) * c;
      }
    }
  }
}

/// Returns the final hidden state h_T, shape [batch, units]; h_0 = 0.
template <typename S>
TensorT<S> gru_forward(const TensorT<S>& x, const TensorT<S>& kernel,
                       const TensorT<S>& recurrent, const TensorT<S>& bias,
                       std::size_t units) {
  GruCache<S> cache;
  gru_forward_cached(x, kernel, recurrent, bias, units, cache);
  TensorT<S> h({cache.batch, units});
  std::copy(cache.h.end() - cache.batch * units, cache.h.end(),
            h.data.begin());
  return h;
}

/// ParamStore flavor; entries are <prefix>/kernel, <prefix>/recurrent,
/// <prefix>/bias. Missing entries raise ConfigError.
template <typename S>
TensorT<S> gru_forward(const TensorT<S>& x, const ParamStoreT<S>& params,
                       const std::string& prefix, std::size_t units) {
  return gru_forward(x, params.at(prefix + "/kernel").value,
                     params.at(prefix + "/recurrent").value,
                     params.at(prefix + "/bias").value, units);
}

/// BPTT through the cached sequence. dh_final: [batch, units].
/// Accumulates into dkernel/drecurrent/dbias and fills dx.
template <typename S>
void gru_backward(const TensorT<S>& x, const TensorT<S>& kernel,
                  const TensorT<S>& recurrent, const GruCache<S>& cache,
                  const TensorT<S>& dh_final, TensorT<S>& dx,
                  TensorT<S>& dkernel, TensorT<S>& drecurrent,
                  TensorT<S>& dbias) {
  const std::size_t batch = cache.batch, steps = cache.steps, in = cache.in,
                    units = cache.units, u3 = 3 * units;
  require_shape(dh_final, {batch, units}, "gru_backward dh");

  std::vector<S> rec_t(u3 * units);
  transpose(recurrent.ptr(), rec_t.data(), units, u3);

  std::vector<S> dh(dh_final.data.begin(), dh_final.data.end());
  std::vector<S> dxw(batch * steps * u3, S(0));  // [batch, T, 3u]
  std::vector<S> dg(batch * u3);
  std::vector<S> dh_prev(batch * units);
  S* dbin = dbias.ptr();
  S* dbrec = dbias.ptr() + u3;

  for (std::size_t t = steps; t-- > 0;) {
    const S* hprev = cache.h.data() + t * batch * units;
    const S* zt = cache.z.data() + t * batch * units;
    const S* rt = cache.r.data() + t * batch * units;
    const S* ct = cache.c.data() + t * batch * units;
    const S* pt = cache.p.data() + t * batch * units;

    std::fill(dg.begin(), dg.end(), S(0));
    std::fill(dh_prev.begin(), dh_prev.end(), S(0));

    for (std::size_t b = 0; b < batch; ++b) {
      S* dxwr = dxw.data() + (b * steps + t) * u3;
      S* dgr = dg.data() + b * u3;
      const S* hp = hprev + b * units;
      const S* dhb = dh.data() + b * units;
      S* dhp = dh_prev.data() + b * units;
      for (std::size_t j = 0; j < units; ++j) {
        const S z = zt[b * units + j];
        const S r = rt[b * units + j];
        const S c = ct[b * units + j];
        const S p = pt[b * units + j];
        const S d = dhb[j];
        const S dz = d * (hp[j] - c);
        const S dc = d * (S(1) - z);
        dhp[j] += d * z;
        const S dac = dc * (S(1) - c * c);
        const S dr = dac * p;
        const S dp = dac * r;
        const S daz = dz * z * (S(1) - z);
        const S dar = dr * r * (S(1) - r);
        dxwr[j] = daz;
        dxwr[units + j] = dar;
        dxwr[2 * units + j] = dac;
        dgr[j] = daz;
        dgr[units + j] = dar;
        dgr[2 * units + j] = dp;
      }
    }

    // Recurrent-side gradients.
    matmul_tn(hprev, dg.data(), drecurrent.ptr(), units, batch, u3);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < u3; ++j) dbrec[j] += dg[b * u3 + j];
    matmul_nn(dg.data(), rec_t.data(), dh_prev.data(), batch, u3, units);
    dh = dh_prev;
  }

  // Input-side gradients over all timesteps at once.
  matmul_tn(x.ptr(), dxw.data(), dkernel.ptr(), in, batch * steps, u3);
  for (std::size_t row = 0; row < batch * steps; ++row)
    for (std::size_t j = 0; j < u3; ++j) dbin[j] += dxw[row * u3 + j];
  std::vector<S> ker_t(u3 * in);
  transpose(kernel.ptr(), ker_t.data(), in, u3);
  matmul_nn(dxw.data(), ker_t.data(), dx.ptr(), batch * steps, u3, in);
}

}  // namespace amr

#endif  // AMR_GRU_HPP
