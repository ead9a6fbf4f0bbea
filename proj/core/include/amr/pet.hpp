// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_PET_HPP
#define AMR_PET_HPP

#include <cmath>
#include <cstddef>
#include <utility>

#include "amr/errors.hpp"
#include "amr/tensor.hpp"

namespace amr {

// Phase estimation and transformation. A frame is a [2, L] tensor with
// row 0 the in-phase and row 1 the quadrature component.

template <typename S>
void require_frame(const TensorT<S>& y, const char* what) {
  if (y.rank() != 2 || y.dim(0) != 2)
    throw DimensionError(std::string(what) + ": frame must be [2, L]");
}

/// Linear single-output estimator: phi = flatten(y) . W + b. The result
/// is unbounded; the rotation below is periodic so no wrapping is done.
template <typename S>
S estimate_phase(const TensorT<S>& y, const TensorT<S>& w,
                 const TensorT<S>& b) {
  require_frame(y, "estimate_phase");
  if (w.rank() != 2 || w.dim(1) != 1)
    throw ConfigError("estimate_phase: W must have exactly one column");
  const std::size_t n = y.numel();
  if (w.dim(0) != n)
    throw DimensionError("estimate_phase: W rows must equal 2L");
  require_shape(b, {std::size_t{1}}, "estimate_phase bias");
  S phi = b.data[0];
  for (std::size_t i = 0; i < n; ++i) phi += y.data[i] * w.data[i];
  return phi;
}

/// Rotates every sample by e^{-j phi}:
///   I' = I cos(phi) + Q sin(phi)
///   Q' = Q cos(phi) - I sin(phi)
/// Isometric for any phi; exact identity at phi = 0.
template <typename S>
TensorT<S> transform_phase(const TensorT<S>& y, S phi) {
  require_frame(y, "transform_phase");
  const std::size_t len = y.dim(1);
  const S c = std::cos(phi), s = std::sin(phi);
  TensorT<S> out(y.shape);
  const S* i_in = y.ptr();
  const S* q_in = y.ptr() + len;
  S* i_out = out.ptr();
  S* q_out = out.ptr() + len;
  for (std::size_t l = 0; l < len; ++l) {
    i_out[l] = i_in[l] * c + q_in[l] * s;
    q_out[l] = q_in[l] * c - i_in[l] * s;
  }
  return out;
}

template <typename S>
struct PetGrad {
  TensorT<S> grad_y;
  S grad_phi;
};

/// Gradients of transform_phase:
///   dI'/dphi = -I sin(phi) + Q cos(phi)
///   dQ'/dphi = -Q sin(phi) - I cos(phi)
/// grad_y is the transpose (inverse) rotation of the upstream gradient.
template <typename S>
PetGrad<S> pet_backward(const TensorT<S>& y, S phi,
                        const TensorT<S>& upstream) {
  require_frame(y, "pet_backward");
  require_shape(upstream, y.shape, "pet_backward upstream");
  const std::size_t len = y.dim(1);
  const S c = std::cos(phi), s = std::sin(phi);
  PetGrad<S> out{TensorT<S>(y.shape), S(0)};
  const S* i_in = y.ptr();
  const S* q_in = y.ptr() + len;
  const S* gi = upstream.ptr();
  const S* gq = upstream.ptr() + len;
  S* oi = out.grad_y.ptr();
  S* oq = out.grad_y.ptr() + len;
  for (std::size_t l = 0; l < len; ++l) {
    out.grad_phi += gi[l] * (-i_in[l] * s + q_in[l] * c) +
                    gq[l] * (-q_in[l] * s - i_in[l] * c);
    oi[l] = gi[l] * c - gq[l] * s;
    oq[l] = gq[l] * c + gi[l] * s;
  }
  return out;
}

}  // namespace amr

#endif  // AMR_PET_HPP
