// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_LAYERS_HPP
#define AMR_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "amr/errors.hpp"
#include "amr/matmul.hpp"
#include "amr/tensor.hpp"

namespace amr {

enum class Activation { linear, relu, softmax };

/// In-place numerically stable softmax over the rows of a [rows, cols]
/// buffer.
template <typename S>
void softmax_rows(S* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    S* row = x + r * cols;
    S mx = row[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    S sum = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= sum;
  }
}

/// y = act(x W + b), x: [batch, in], W: [in, out], b: [out]
template <typename S>
TensorT<S> dense_forward(const TensorT<S>& x, const TensorT<S>& w,
                         const TensorT<S>& b, Activation act) {
  if (x.rank() != 2 || w.rank() != 2)
    throw DimensionError("dense_forward: operands must be rank 2");
  const std::size_t batch = x.dim(0), in = x.dim(1);
  if (w.dim(0) != in)
    throw DimensionError("dense_forward: x columns != W rows");
  const std::size_t out = w.dim(1);
  require_shape(b, {out}, "dense_forward bias");

  TensorT<S> y({batch, out});
  for (std::size_t r = 0; r < batch; ++r)
    std::copy(b.ptr(), b.ptr() + out, y.ptr() + r * out);
  matmul_nn(x.ptr(), w.ptr(), y.ptr(), batch, in, out);

  switch (act) {
    case Activation::linear:
      break;
    case Activation::relu:
      for (S& v : y.data) v = std::max(v, S(0));
      break;
    case Activation::softmax:
      softmax_rows(y.ptr(), batch, out);
      break;
  }
  return y;
}

/// Gradients of y = x W + b (pre-activation) given dY.
template <typename S>
void dense_backward(const TensorT<S>& x, const TensorT<S>& w,
                    const TensorT<S>& dy, TensorT<S>& dx, TensorT<S>& dw,
                    TensorT<S>& db) {
  const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(1);
  if (dy.shape != std::vector<std::size_t>{batch, out})
    throw DimensionError("dense_backward: dY shape mismatch");
  // dW += x^T dY, db += colsum(dY), dx += dY W^T
  matmul_tn(x.ptr(), dy.ptr(), dw.ptr(), in, batch, out);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < out; ++c) db.data[c] += dy.data[r * out + c];
  std::vector<S> wt(in * out);
  transpose(w.ptr(), wt.data(), in, out);
  matmul_nn(dy.ptr(), wt.data(), dx.ptr(), batch, out, in);
}

// ---------------------------------------------------------------------------
// Valid-padding 2D cross-correlation, NHWC layout.
// x: [batch, H, W, Cin], k: [kh, kw, Cin, Cout], b: [Cout]
// y: [batch, H-kh+1, W-kw+1, Cout]
// Implemented as im2col + matmul; the column order (kh, kw, cin) matches
// the kernel layout so accumulation order equals the naive loop nest.
// ---------------------------------------------------------------------------

template <typename S>
struct Conv2dDims {
  std::size_t batch, h, w, cin, kh, kw, cout, oh, ow;
};

template <typename S>
Conv2dDims<S> conv2d_dims(const TensorT<S>& x, const TensorT<S>& k) {
  if (x.rank() != 4 || k.rank() != 4)
    throw DimensionError("conv2d: x and k must be rank 4");
  Conv2dDims<S> d{x.dim(0), x.dim(1), x.dim(2), x.dim(3),
                  k.dim(0), k.dim(1), k.dim(3), 0, 0};
  if (k.dim(2) != d.cin)
    throw DimensionError("conv2d: kernel input channels mismatch");
  if (d.kh > d.h || d.kw > d.w)
    throw DimensionError("conv2d: kernel larger than input");
  d.oh = d.h - d.kh + 1;
  d.ow = d.w - d.kw + 1;
  return d;
}

template <typename S>
void im2col(const TensorT<S>& x, const Conv2dDims<S>& d, S* cols) {
  const std::size_t patch = d.kh * d.kw * d.cin;
  for (std::size_t b = 0; b < d.batch; ++b) {
    const S* xb = x.ptr() + b * d.h * d.w * d.cin;
    for (std::size_t oy = 0; oy < d.oh; ++oy) {
      for (std::size_t ox = 0; ox < d.ow; ++ox) {
        S* dst = cols + ((b * d.oh + oy) * d.ow + ox) * patch;
        for (std::size_t ky = 0; ky < d.kh; ++ky) {
          const S* src = xb + ((oy + ky) * d.w + ox) * d.cin;
          std::copy(src, src + d.kw * d.cin, dst + ky * d.kw * d.cin);
        }
      }
    }
  }
}

template <typename S>
TensorT<S> conv2d_forward(const TensorT<S>& x, const TensorT<S>& k,
                          const TensorT<S>& b) {
  const auto d = conv2d_dims(x, k);
  require_shape(b, {d.cout}, "conv2d bias");
  const std::size_t rows = d.batch * d.oh * d.ow;
  const std::size_t patch = d.kh * d.kw * d.cin;
  std::vector<S> cols(rows * patch);
  im2col(x, d, cols.data());

  TensorT<S> y({d.batch, d.oh, d.ow, d.cout});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(b.ptr(), b.ptr() + d.cout, y.ptr() + r * d.cout);
  matmul_nn(cols.data(), k.ptr(), y.ptr(), rows, patch, d.cout);
  return y;
}

template <typename S>
void conv2d_backward(const TensorT<S>& x, const TensorT<S>& k,
                     const TensorT<S>& dy, TensorT<S>& dx, TensorT<S>& dk,
                     TensorT<S>& db) {
  const auto d = conv2d_dims(x, k);
  if (dy.shape != std::vector<std::size_t>{d.batch, d.oh, d.ow, d.cout})
    throw DimensionError("conv2d_backward: dY shape mismatch");
  const std::size_t rows = d.batch * d.oh * d.ow;
  const std::size_t patch = d.kh * d.kw * d.cin;

  std::vector<S> cols(rows * patch);
  im2col(x, d, cols.data());
  matmul_tn(cols.data(), dy.ptr(), dk.ptr(), patch, rows, d.cout);

  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d.cout; ++c)
      db.data[c] += dy.data[r * d.cout + c];

  // dcols = dY k^T, then scatter-add back to input positions.
  std::vector<S> kt(patch * d.cout);
  transpose(k.ptr(), kt.data(), patch, d.cout);
  std::vector<S> dcols(rows * patch, S(0));
  matmul_nn(dy.ptr(), kt.data(), dcols.data(), rows, d.cout, patch);

  for (std::size_t b = 0; b < d.batch; ++b) {
    S* dxb = dx.ptr() + b * d.h * d.w * d.cin;
    for (std::size_t oy = 0; oy < d.oh; ++oy) {
      for (std::size_t ox = 0; ox < d.ow; ++ox) {
        const S* src = dcols.data() + ((b * d.oh + oy) * d.ow + ox) * patch;
        for (std::size_t ky = 0; ky < d.kh; ++ky) {
          S* dst = dxb + ((oy + ky) * d.w + ox) * d.cin;
          const S* s = src + ky * d.kw * d.cin;
          for (std::size_t i = 0; i < d.kw * d.cin; ++i) dst[i] += s[i];
        }
      }
    }
  }
}

}  // namespace amr

#endif  // AMR_LAYERS_HPP
