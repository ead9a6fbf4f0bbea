// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_TENSOR_HPP
#define AMR_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "amr/errors.hpp"

namespace amr {

/// Dense n-dimensional row-major array. Default scalar is 32-bit; the
/// double instantiation exists for tightened gradient checks.
template <typename S>
struct TensorT {
  std::vector<std::size_t> shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(std::vector<std::size_t> shp)
      : shape(std::move(shp)), data(numel_of(shape), S(0)) {}
  TensorT(std::vector<std::size_t> shp, std::vector<S> values)
      : shape(std::move(shp)), data(std::move(values)) {
    if (numel_of(shape) != data.size()) {
      throw DimensionError("tensor data length " +
                           std::to_string(data.size()) +
                           " does not match shape product " +
                           std::to_string(numel_of(shape)));
    }
  }

  static std::size_t numel_of(const std::vector<std::size_t>& shp) {
    return std::accumulate(shp.begin(), shp.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::size_t numel() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (S v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  template <typename T>
  TensorT<T> cast() const {
    TensorT<T> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<T>(data[i]);
    return out;
  }

  friend bool operator==(const TensorT& a, const TensorT& b) {
    return a.shape == b.shape && a.data == b.data;
  }
};

using Tensor = TensorT<float>;

template <typename S>
void require_shape(const TensorT<S>& t, std::vector<std::size_t> expect,
                   const char* what) {
  if (t.shape != expect) {
    std::string msg = std::string(what) + ": expected shape [";
    for (std::size_t i = 0; i < expect.size(); ++i)
      msg += (i ? "," : "") + std::to_string(expect[i]);
    msg += "], got [";
    for (std::size_t i = 0; i < t.shape.size(); ++i)
      msg += (i ? "," : "") + std::to_string(t.shape[i]);
    msg += "]";
    throw DimensionError(msg);
  }
}

}  // namespace amr

#endif  // AMR_TENSOR_HPP
