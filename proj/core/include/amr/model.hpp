// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_MODEL_HPP
#define AMR_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "amr/errors.hpp"
#include "amr/gru.hpp"
#include "amr/init.hpp"
#include "amr/layers.hpp"
#include "amr/loss.hpp"
#include "amr/param_store.hpp"
#include "amr/pet.hpp"
#include "amr/rng.hpp"

namespace amr {

// PET-CGDNN: a one-parameter phase estimator (flatten + linear dense),
// the inverse-rotation transform, then conv(75, 2x8) -> conv(25, 1x5)
// -> GRU(128) -> dense softmax. The part3_only variant drops the
// estimator and the transform and feeds raw I/Q into the first conv.

enum class Variant { full, part3_only };

inline const char* variant_name(Variant v) {
  return v == Variant::full ? "full" : "part3_only";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "part3_only" || s == "part3") return Variant::part3_only;
  throw ConfigError("unknown model variant: " + s);
}

struct ModelSpec {
  std::size_t frame_len = 128;   // L
  std::size_t num_classes = 11;  // C
  Variant variant = Variant::full;

  // Architecture constants; only L, C and the variant vary.
  static constexpr std::size_t conv1_filters = 75;
  static constexpr std::size_t conv1_kh = 2;
  static constexpr std::size_t conv1_kw = 8;
  static constexpr std::size_t conv2_filters = 25;
  static constexpr std::size_t conv2_kw = 5;
  static constexpr std::size_t gru_units = 128;

  std::size_t conv_out_steps() const {
    return frame_len - conv1_kw - conv2_kw + 2;  // L - 11
  }

  void validate() const {
    if (frame_len < conv1_kw + conv2_kw - 1)
      throw ConfigError("frame length too short for the conv stack: " +
                        std::to_string(frame_len));
    if (num_classes < 2)
      throw ConfigError("need at least two classes");
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Closed-form parameter count:
///   estimator (full only): 2L + 1
///   conv1: 2*8*1*75 + 75          conv2: 1*5*75*25 + 25
///   gru:   3*(25*128 + 128^2 + 2*128)
///   dense: 128*C + C
inline std::size_t count_params(const ModelSpec& spec) {
  spec.validate();
  const std::size_t u = ModelSpec::gru_units;
  std::size_t n = 0;
  if (spec.variant == Variant::full) n += 2 * spec.frame_len + 1;
  n += ModelSpec::conv1_kh * ModelSpec::conv1_kw * 1 * ModelSpec::conv1_filters +
       ModelSpec::conv1_filters;
  n += 1 * ModelSpec::conv2_kw * ModelSpec::conv1_filters *
           ModelSpec::conv2_filters +
       ModelSpec::conv2_filters;
  n += 3 * (ModelSpec::conv2_filters * u + u * u + 2 * u);
  n += u * spec.num_classes + spec.num_classes;
  return n;
}

template <typename S>
struct ModelT {
  ModelSpec spec;
  ParamStoreT<S> params;

  template <typename T>
  ModelT<T> cast() const {
    return ModelT<T>{spec, params.template cast<T>()};
  }
};

using Model = ModelT<float>;

template <typename S>
ModelT<S> build(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelT<S> m{spec, {}};
  const std::size_t L = spec.frame_len, C = spec.num_classes,
                    u = ModelSpec::gru_units;

  auto stream = [&](const char* name) {
    return Rng(mix_seed(seed, fnv1a64(name)));
  };

  // Register every parameter first; ParamStore::add may reallocate, so
  // initialization below re-fetches entries by name.
  if (spec.variant == Variant::full) {
    m.params.add("estimator/kernel", {2 * L, 1}, true);
    m.params.add("estimator/bias", {1}, false);
  }
  m.params.add(
      "conv1/kernel",
      {ModelSpec::conv1_kh, ModelSpec::conv1_kw, 1, ModelSpec::conv1_filters},
      true);
  m.params.add("conv1/bias", {ModelSpec::conv1_filters}, false);
  m.params.add("conv2/kernel",
               {1, ModelSpec::conv2_kw, ModelSpec::conv1_filters,
                ModelSpec::conv2_filters},
               true);
  m.params.add("conv2/bias", {ModelSpec::conv2_filters}, false);
  m.params.add("gru/kernel", {ModelSpec::conv2_filters, 3 * u}, true);
  m.params.add("gru/recurrent", {u, 3 * u}, true);
  m.params.add("gru/bias", {2, 3 * u}, false);
  m.params.add("dense/kernel", {u, C}, true);
  m.params.add("dense/bias", {C}, false);

  auto glorot = [&](const char* name, std::size_t fan_in,
                    std::size_t fan_out) {
    Rng rng = stream(name);
    glorot_uniform(m.params.at(name).value, fan_in, fan_out, rng);
  };
  // estimator weights stay zero so the transform starts as the identity
  // rotation; the full variant is then initially equivalent to part3_only
  // and the phase head is learned from scratch
  glorot("conv1/kernel", ModelSpec::conv1_kh * ModelSpec::conv1_kw * 1,
         ModelSpec::conv1_kh * ModelSpec::conv1_kw * ModelSpec::conv1_filters);
  glorot("conv2/kernel", ModelSpec::conv2_kw * ModelSpec::conv1_filters,
         ModelSpec::conv2_kw * ModelSpec::conv2_filters);
  glorot("gru/kernel", ModelSpec::conv2_filters, 3 * u);
  {
    Rng rng = stream("gru/recurrent");
    orthogonal_blocks(m.params.at("gru/recurrent").value, u, 3, rng);
  }
  glorot("dense/kernel", u, C);

  return m;
}

template <typename S>
struct ForwardResult {
  TensorT<S> probs;        // [batch, C]
  std::vector<S> phi;      // [batch]; zeros for part3_only
  TensorT<S> transformed;  // [batch, 2, L]; input copy for part3_only
};

template <typename S>
struct ModelCache {
  std::vector<S> phi;
  TensorT<S> transformed;  // [batch, 2, L, 1]
  TensorT<S> a1, a2;       // post-ReLU conv activations
  GruCache<S> gru;
  TensorT<S> h;       // [batch, units]
  TensorT<S> logits;  // [batch, C]
};

template <typename S>
void check_batch(const ModelT<S>& m, const TensorT<S>& batch) {
  if (batch.rank() != 3 || batch.dim(1) != 2 ||
      batch.dim(2) != m.spec.frame_len)
    throw DimensionError("model input must be [batch, 2, " +
                         std::to_string(m.spec.frame_len) + "]");
}

template <typename S>
void forward_cached(const ModelT<S>& m, const TensorT<S>& batch,
                    ModelCache<S>& cache) {
  check_batch(m, batch);
  const std::size_t B = batch.dim(0), L = m.spec.frame_len;

  cache.phi.assign(B, S(0));
  cache.transformed = TensorT<S>({B, 2, L, 1});
  if (m.spec.variant == Variant::full) {
    const auto& ew = m.params.at("estimator/kernel").value;
    const auto& eb = m.params.at("estimator/bias").value;
    for (std::size_t b = 0; b < B; ++b) {
      S phi = eb.data[0];
      const S* y = batch.ptr() + b * 2 * L;
      for (std::size_t i = 0; i < 2 * L; ++i) phi += y[i] * ew.data[i];
      cache.phi[b] = phi;
      const S c = std::cos(phi), s = std::sin(phi);
      S* out = cache.transformed.ptr() + b * 2 * L;
      for (std::size_t l = 0; l < L; ++l) {
        out[l] = y[l] * c + y[L + l] * s;
        out[L + l] = y[L + l] * c - y[l] * s;
      }
    }
  } else {
    std::copy(batch.data.begin(), batch.data.end(),
              cache.transformed.data.begin());
  }

  cache.a1 = conv2d_forward(cache.transformed, m.params.at("conv1/kernel").value,
                            m.params.at("conv1/bias").value);
  for (S& v : cache.a1.data) v = std::max(v, S(0));
  cache.a2 = conv2d_forward(cache.a1, m.params.at("conv2/kernel").value,
                            m.params.at("conv2/bias").value);
  for (S& v : cache.a2.data) v = std::max(v, S(0));

  // [B, 1, T, 25] and [B, T, 25] share layout.
  TensorT<S> seq({B, m.spec.conv_out_steps(), ModelSpec::conv2_filters},
                 cache.a2.data);
  gru_forward_cached(seq, m.params.at("gru/kernel").value,
                     m.params.at("gru/recurrent").value,
                     m.params.at("gru/bias").value, ModelSpec::gru_units,
                     cache.gru);
  cache.h = TensorT<S>({B, ModelSpec::gru_units});
  std::copy(cache.gru.h.end() - B * ModelSpec::gru_units, cache.gru.h.end(),
            cache.h.data.begin());

  cache.logits = dense_forward(cache.h, m.params.at("dense/kernel").value,
                               m.params.at("dense/bias").value,
                               Activation::linear);
}

template <typename S>
ForwardResult<S> forward(const ModelT<S>& m, const TensorT<S>& batch) {
  ModelCache<S> cache;
  forward_cached(m, batch, cache);
  ForwardResult<S> res;
  res.probs = cache.logits;
  softmax_rows(res.probs.ptr(), res.probs.dim(0), res.probs.dim(1));
  res.phi = cache.phi;
  res.transformed =
      TensorT<S>({batch.dim(0), std::size_t{2}, m.spec.frame_len},
                 cache.transformed.data);
  return res;
}

/// Cross-entropy training step gradient. Zeroes the store's gradients,
/// runs forward + backprop and returns the batch loss. When `probs_out`
/// is given it receives the softmax probabilities of this pass.
template <typename S>
S backward(ModelT<S>& m, const TensorT<S>& batch, const TensorT<S>& labels,
           TensorT<S>* probs_out = nullptr) {
  check_batch(m, batch);
  const std::size_t B = batch.dim(0), L = m.spec.frame_len;
  const std::size_t T = m.spec.conv_out_steps();

  ModelCache<S> cache;
  forward_cached(m, batch, cache);
  auto loss = softmax_cross_entropy(cache.logits, labels);
  if (probs_out) {
    *probs_out = cache.logits;
    softmax_rows(probs_out->ptr(), B, m.spec.num_classes);
  }

  m.params.zero_grads();

  // Dense classifier.
  auto& dw = m.params.at("dense/kernel");
  TensorT<S> dh({B, ModelSpec::gru_units});
  dense_backward(cache.h, dw.value, loss.grad, dh, dw.grad,
                 m.params.at("dense/bias").grad);

  // GRU over the conv feature sequence.
  TensorT<S> seq({B, T, ModelSpec::conv2_filters}, cache.a2.data);
  TensorT<S> dseq({B, T, ModelSpec::conv2_filters});
  gru_backward(seq, m.params.at("gru/kernel").value,
               m.params.at("gru/recurrent").value, cache.gru, dh, dseq,
               m.params.at("gru/kernel").grad,
               m.params.at("gru/recurrent").grad,
               m.params.at("gru/bias").grad);

  // ReLU mask + conv2.
  TensorT<S> da2({B, 1, T, ModelSpec::conv2_filters}, dseq.data);
  for (std::size_t i = 0; i < da2.numel(); ++i)
    if (cache.a2.data[i] <= S(0)) da2.data[i] = S(0);
  TensorT<S> da1(cache.a1.shape);
  conv2d_backward(cache.a1, m.params.at("conv2/kernel").value, da2, da1,
                  m.params.at("conv2/kernel").grad,
                  m.params.at("conv2/bias").grad);

  // ReLU mask + conv1.
  for (std::size_t i = 0; i < da1.numel(); ++i)
    if (cache.a1.data[i] <= S(0)) da1.data[i] = S(0);
  TensorT<S> dtrans(cache.transformed.shape);
  conv2d_backward(cache.transformed, m.params.at("conv1/kernel").value, da1,
                  dtrans, m.params.at("conv1/kernel").grad,
                  m.params.at("conv1/bias").grad);

  // Phase estimator via the transform's phi partials.
  if (m.spec.variant == Variant::full) {
    auto& ew = m.params.at("estimator/kernel");
    auto& eb = m.params.at("estimator/bias");
    for (std::size_t b = 0; b < B; ++b) {
      const S* y = batch.ptr() + b * 2 * L;
      const S* g = dtrans.ptr() + b * 2 * L;
      const S c = std::cos(cache.phi[b]), s = std::sin(cache.phi[b]);
      S dphi = 0;
      for (std::size_t l = 0; l < L; ++l) {
        dphi += g[l] * (-y[l] * s + y[L + l] * c) +
                g[L + l] * (-y[L + l] * s - y[l] * c);
      }
      for (std::size_t i = 0; i < 2 * L; ++i)
        ew.grad.data[i] += y[i] * dphi;
      eb.grad.data[0] += dphi;
    }
  }

  return loss.loss;
}

}  // namespace amr

#endif  // AMR_MODEL_HPP
