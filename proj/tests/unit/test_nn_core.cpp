// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "amr/adam.hpp"
#include "amr/gradcheck.hpp"
#include "amr/gru.hpp"
#include "amr/layers.hpp"
#include "amr/loss.hpp"
#include "amr/rng.hpp"
#include "amr/tensor.hpp"

using namespace amr;

namespace {

Tensor randn(std::vector<std::size_t> shape, std::uint64_t seed,
             double scale = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data) v = float(scale * rng.normal());
  return t;
}

/// Naive quadruple-loop conv2d reference with the same accumulation
/// order as the im2col implementation: bias first, then (kh, kw, cin)
/// ascending.
Tensor conv2d_naive(const Tensor& x, const Tensor& k, const Tensor& b) {
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), Cin = x.dim(3);
  const std::size_t kh = k.dim(0), kw = k.dim(1), Cout = k.dim(3);
  const std::size_t oh = H - kh + 1, ow = W - kw + 1;
  Tensor y({B, oh, ow, Cout});
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t co = 0; co < Cout; ++co) {
          float acc = b.data[co];
          for (std::size_t ky = 0; ky < kh; ++ky)
            for (std::size_t kx = 0; kx < kw; ++kx)
              for (std::size_t ci = 0; ci < Cin; ++ci)
                acc += x.data[((n * H + oy + ky) * W + ox + kx) * Cin + ci] *
                       k.data[((ky * kw + kx) * Cin + ci) * Cout + co];
          y.data[((n * oh + oy) * ow + ox) * Cout + co] = acc;
        }
  return y;
}

/// Scalar per-timestep reset-after GRU reference in double precision.
std::vector<double> gru_reference(const Tensor& x, const Tensor& kernel,
                                  const Tensor& recurrent, const Tensor& bias,
                                  std::size_t units) {
  const std::size_t B = x.dim(0), T = x.dim(1), in = x.dim(2), u3 = 3 * units;
  std::vector<double> h(B * units, 0.0);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> hn(B * units);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t j = 0; j < units; ++j) {
        double az = bias.data[j], ar = bias.data[units + j],
               ac_in = bias.data[2 * units + j];
        double gz = bias.data[u3 + j], gr = bias.data[u3 + units + j],
               gp = bias.data[u3 + 2 * units + j];
        for (std::size_t i = 0; i < in; ++i) {
          const double xv = x.data[(b * T + t) * in + i];
          az += xv * kernel.data[i * u3 + j];
          ar += xv * kernel.data[i * u3 + units + j];
          ac_in += xv * kernel.data[i * u3 + 2 * units + j];
        }
        for (std::size_t i = 0; i < units; ++i) {
          const double hv = h[b * units + i];
          gz += hv * recurrent.data[i * u3 + j];
          gr += hv * recurrent.data[i * u3 + units + j];
          gp += hv * recurrent.data[i * u3 + 2 * units + j];
        }
        const double z = sig(az + gz);
        const double r = sig(ar + gr);
        const double c = std::tanh(ac_in + r * gp);
        hn[b * units + j] = z * h[b * units + j] + (1.0 - z) * c;
      }
    }
    h = hn;
  }
  return h;
}

}  // namespace

TEST_CASE("tensor: shape and data invariants") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.all_finite());
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0f}), DimensionError);
  t.data[0] = std::nanf("");
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("dense_forward: identity, relu clamp, softmax uniform") {
  // x=[[1,2]], W=I, b=0, linear -> [[1,2]]
  Tensor x({1, 2}, {1, 2});
  Tensor w({2, 2}, {1, 0, 0, 1});
  Tensor b({2});
  auto y = dense_forward(x, w, b, Activation::linear);
  CHECK(y.data == std::vector<float>{1, 2});

  // x=[[1,-1]], W=[[1],[1]], b=0, relu -> [[0]]
  Tensor x2({1, 2}, {1, -1});
  Tensor w2({2, 1}, {1, 1});
  Tensor b2({1});
  auto y2 = dense_forward(x2, w2, b2, Activation::relu);
  CHECK(y2.data[0] == 0.0f);

  // x=[[0,0,0]], W=I, b=0, softmax -> uniform thirds
  Tensor x3({1, 3});
  Tensor w3({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor b3({3});
  auto y3 = dense_forward(x3, w3, b3, Activation::softmax);
  for (float v : y3.data) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-6));

  CHECK_THROWS_AS(dense_forward(x3, w2, b2, Activation::linear),
                  DimensionError);
}

TEST_CASE("dense: softmax rows sum to 1 and lie in [0,1]") {
  const Tensor x = randn({5, 7}, 11);
  const Tensor w = randn({7, 4}, 12);
  const Tensor b = randn({4}, 13);
  auto y = dense_forward(x, w, b, Activation::softmax);
  for (std::size_t r = 0; r < 5; ++r) {
    double sum = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      const float v = y.data[r * 4 + c];
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("conv2d_forward: identity 1x1 kernel") {
  const Tensor x = randn({2, 3, 5, 1}, 21);
  Tensor k({1, 1, 1, 1}, {1});
  Tensor b({1});
  auto y = conv2d_forward(x, k, b);
  CHECK(y.shape == x.shape);
  CHECK(y.data == x.data);
}

TEST_CASE("conv2d_forward: hand-evaluated 2x2 window") {
  // input [[1,2],[3,4]], kernel [[1,0],[0,1]], bias 0 -> 1*1 + 4*1 = 5
  Tensor x({1, 2, 2, 1}, {1, 2, 3, 4});
  Tensor k({2, 2, 1, 1}, {1, 0, 0, 1});
  Tensor b({1});
  auto y = conv2d_forward(x, k, b);
  CHECK(y.shape == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(y.data[0] == 5.0f);
}

TEST_CASE("conv2d_forward: production shape chain and error") {
  const Tensor x = randn({1, 2, 128, 1}, 22);
  const Tensor k = randn({2, 8, 1, 75}, 23, 0.1);
  Tensor b({75});
  auto y = conv2d_forward(x, k, b);
  CHECK(y.shape == std::vector<std::size_t>{1, 1, 121, 75});

  const Tensor big = randn({3, 2, 1, 1}, 24);
  CHECK_THROWS_AS(conv2d_forward(big, k, b), DimensionError);
}

TEST_CASE("conv2d_forward equals naive reference exactly on small inputs") {
  for (std::uint64_t trial = 0; trial < 4; ++trial) {
    const Tensor x = randn({2, 4, 16, 3}, 100 + trial);
    const Tensor k = randn({2, 5, 3, 6}, 200 + trial);
    const Tensor b = randn({6}, 300 + trial);
    const auto y = conv2d_forward(x, k, b);
    const auto ref = conv2d_naive(x, k, b);
    REQUIRE(y.shape == ref.shape);
    CHECK(y.data == ref.data);  // bit-exact, same accumulation order
  }
}

TEST_CASE("gru_forward: zero weights give zero state") {
  const Tensor x = randn({2, 5, 3}, 31);
  Tensor k({3, 9}), rec({3, 9}), b({2, 9});
  auto h = gru_forward(x, k, rec, b, 3);
  CHECK(h.shape == std::vector<std::size_t>{2, 3});
  for (float v : h.data) CHECK(v == 0.0f);
}

TEST_CASE("gru_forward: scalar one-step oracle") {
  // in=1, units=1, all kernels 1, biases 0, x=1:
  //   z = r = sigmoid(1), p = 0, c = tanh(1)
  //   h1 = (1 - sigmoid(1)) * tanh(1)
  Tensor x({1, 1, 1}, {1});
  Tensor k({1, 3}, {1, 1, 1});
  Tensor rec({1, 3}, {1, 1, 1});
  Tensor b({2, 3});
  auto h = gru_forward(x, k, rec, b, 1);
  const double sig1 = 1.0 / (1.0 + std::exp(-1.0));
  const double expect = (1.0 - sig1) * std::tanh(1.0);
  CHECK(double(h.data[0]) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("gru_forward: shape contract and missing params") {
  const Tensor x = randn({1, 117, 25}, 41, 0.3);
  const Tensor k = randn({25, 384}, 42, 0.1);
  const Tensor rec = randn({128, 384}, 43, 0.05);
  const Tensor b = randn({2, 384}, 44, 0.1);
  auto h = gru_forward(x, k, rec, b, 128);
  CHECK(h.shape == std::vector<std::size_t>{1, 128});

  ParamStore store;
  CHECK_THROWS_AS(gru_forward(x, store, "gru", 128), ConfigError);
}

TEST_CASE("gru_forward matches scalar reference on small cases") {
  for (std::size_t units : {1u, 2u, 3u}) {
    for (std::size_t T : {1u, 2u, 4u}) {
      const std::uint64_t s = units * 100 + T;
      const Tensor x = randn({2, T, 2}, s, 0.5);
      const Tensor k = randn({2, 3 * units}, s + 1, 0.5);
      const Tensor rec = randn({units, 3 * units}, s + 2, 0.5);
      const Tensor b = randn({2, 3 * units}, s + 3, 0.5);
      const auto h = gru_forward(x, k, rec, b, units);
      const auto ref = gru_reference(x, k, rec, b, units);
      for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(double(h.data[i]) == doctest::Approx(ref[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("softmax_cross_entropy: uniform, saturated, closed-form grad") {
  Tensor logits({1, 11});
  Tensor labels({1, 11});
  labels.data[3] = 1.0f;
  auto r = softmax_cross_entropy(logits, labels);
  CHECK(double(r.loss) == doctest::Approx(std::log(11.0)).epsilon(1e-6));

  Tensor sat({1, 2}, {1000.0f, 0.0f});
  Tensor sat_l({1, 2}, {1.0f, 0.0f});
  CHECK(double(softmax_cross_entropy(sat, sat_l).loss) < 1e-6);

  Tensor l2({2, 2}, {0, 0, 0, 0});
  Tensor y2({2, 2}, {1, 0, 0, 1});
  auto r2 = softmax_cross_entropy(l2, y2);
  CHECK(double(r2.grad.data[0]) == doctest::Approx(-0.25).epsilon(1e-6));
  CHECK(double(r2.grad.data[1]) == doctest::Approx(0.25).epsilon(1e-6));

  CHECK_THROWS_AS(softmax_cross_entropy(l2, Tensor({2, 2}, {1, 0, 0.5, 0.5})),
                  InputError);
}

TEST_CASE("adam_step: no-op on zero grads, first-step size, counter") {
  ParamStore params;
  auto& e = params.add("w", {1}, true);
  e.value.data[0] = 0.0f;
  AdamState st;

  // zero gradient -> parameter unchanged
  adam_step(params, st);
  CHECK(params.at("w").value.data[0] == 0.0f);
  CHECK(st.step == 1);

  // g=1, lr=1e-3, first effective step from fresh state: w ~= -1e-3
  ParamStore p2;
  p2.add("w", {1}, true).grad.data[0] = 1.0f;
  AdamState st2;
  adam_step(p2, st2);
  CHECK(double(p2.at("w").value.data[0]) ==
        doctest::Approx(-1e-3).epsilon(1e-3));
  CHECK(p2.at("w").grad.data[0] == 0.0f);  // gradients zeroed

  adam_step(p2, st2);
  CHECK(st2.step == 2);
}

TEST_CASE("gradcheck: polynomial and dense+cross-entropy") {
  // f = w^2 at w = 3 in double precision
  ParamStoreT<double> p;
  auto& e = p.add("w", {1}, true);
  e.value.data[0] = 3.0;
  e.grad.data[0] = 6.0;
  auto f = [&]() { return p.at("w").value.data[0] * p.at("w").value.data[0]; };
  CHECK(finite_difference_gradcheck<double>(f, p, 1e-4) < 1e-6);
  CHECK_THROWS_AS(finite_difference_gradcheck<double>(f, p, 0.0), InputError);

  // dense layer + cross-entropy on random 2x3 input (float)
  ParamStore dp;
  dp.add("w", {3, 2}, true).value = randn({3, 2}, 51);
  dp.add("b", {2}, false).value = randn({2}, 52);
  const Tensor x = randn({2, 3}, 53);
  Tensor labels({2, 2}, {1, 0, 0, 1});

  auto loss_fn = [&]() {
    auto y = dense_forward(x, dp.at("w").value, dp.at("b").value,
                           Activation::linear);
    return double(softmax_cross_entropy(y, labels).loss);
  };
  // analytic gradients
  dp.zero_grads();
  auto y = dense_forward(x, dp.at("w").value, dp.at("b").value,
                         Activation::linear);
  auto lr = softmax_cross_entropy(y, labels);
  Tensor dx({2, 3});
  dense_backward(x, dp.at("w").value, lr.grad, dx, dp.at("w").grad,
                 dp.at("b").grad);
  CHECK(finite_difference_gradcheck<float>(loss_fn, dp, 1e-3) < 1e-3);
}

TEST_CASE("gradcheck: conv and gru layers on small instances") {
  // conv2d in double precision, tightened tolerance
  ParamStoreT<double> cp;
  cp.add("k", {2, 3, 2, 2}, true).value = randn({2, 3, 2, 2}, 61).cast<double>();
  cp.add("b", {2}, false).value = randn({2}, 62).cast<double>();
  const TensorT<double> cx = randn({1, 3, 6, 2}, 63).cast<double>();
  TensorT<double> clabels({1, 2}, {1, 0});

  auto conv_loss = [&]() {
    auto a = conv2d_forward(cx, cp.at("k").value, cp.at("b").value);
    // mean-pool to [1, 2] then cross-entropy
    TensorT<double> pooled({1, 2});
    const std::size_t n = a.numel() / 2;
    for (std::size_t i = 0; i < a.numel(); ++i) pooled.data[i % 2] += a.data[i];
    for (auto& v : pooled.data) v /= double(n);
    return double(softmax_cross_entropy(pooled, clabels).loss);
  };
  cp.zero_grads();
  {
    auto a = conv2d_forward(cx, cp.at("k").value, cp.at("b").value);
    TensorT<double> pooled({1, 2});
    const std::size_t n = a.numel() / 2;
    for (std::size_t i = 0; i < a.numel(); ++i) pooled.data[i % 2] += a.data[i];
    for (auto& v : pooled.data) v /= double(n);
    auto lr = softmax_cross_entropy(pooled, clabels);
    TensorT<double> da(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i)
      da.data[i] = lr.grad.data[i % 2] / double(n);
    TensorT<double> dx(cx.shape);
    conv2d_backward(cx, cp.at("k").value, da, dx, cp.at("k").grad,
                    cp.at("b").grad);
  }
  CHECK(finite_difference_gradcheck<double>(conv_loss, cp, 1e-5) < 1e-4);

  // gru in double precision
  ParamStoreT<double> gp;
  gp.add("k", {2, 6}, true).value = randn({2, 6}, 71, 0.5).cast<double>();
  gp.add("r", {2, 6}, true).value = randn({2, 6}, 72, 0.5).cast<double>();
  gp.add("b", {2, 6}, false).value = randn({2, 6}, 73, 0.5).cast<double>();
  const TensorT<double> gx = randn({2, 3, 2}, 74, 0.5).cast<double>();
  TensorT<double> glabels({2, 2}, {1, 0, 0, 1});

  auto gru_loss = [&]() {
    auto h = gru_forward(gx, gp.at("k").value, gp.at("r").value,
                         gp.at("b").value, 2);
    return double(softmax_cross_entropy(h, glabels).loss);
  };
  gp.zero_grads();
  {
    GruCache<double> cache;
    gru_forward_cached(gx, gp.at("k").value, gp.at("r").value,
                       gp.at("b").value, 2, cache);
    TensorT<double> h({2, 2});
    std::copy(cache.h.end() - 4, cache.h.end(), h.data.begin());
    auto lr = softmax_cross_entropy(h, glabels);
    TensorT<double> dx(gx.shape);
    gru_backward(gx, gp.at("k").value, gp.at("r").value, cache, lr.grad, dx,
                 gp.at("k").grad, gp.at("r").grad, gp.at("b").grad);
  }
  CHECK(finite_difference_gradcheck<double>(gru_loss, gp, 1e-5) < 1e-4);
}

TEST_CASE("determinism: identical seeds give bit-identical tensors") {
  const Tensor a = randn({4, 4}, 99);
  const Tensor b = randn({4, 4}, 99);
  CHECK(a == b);
}
