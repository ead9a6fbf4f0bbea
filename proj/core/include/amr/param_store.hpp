// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_PARAM_STORE_HPP
#define AMR_PARAM_STORE_HPP

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "amr/errors.hpp"
#include "amr/tensor.hpp"

namespace amr {

template <typename S>
struct ParamEntryT {
  std::string name;
  TensorT<S> value;
  TensorT<S> grad;
  bool prunable = false;
};

/// Ordered, named collection of parameter tensors with matching
/// gradient buffers. Iteration order is insertion order.
template <typename S>
class ParamStoreT {
public:
  ParamEntryT<S>& add(const std::string& name, std::vector<std::size_t> shape,
                      bool prunable) {
    if (index_.count(name)) {
      throw ConfigError("duplicate parameter entry: " + name);
    }
    index_.emplace(name, entries_.size());
    entries_.push_back(ParamEntryT<S>{name, TensorT<S>(shape),
                                      TensorT<S>(shape), prunable});
    return entries_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  ParamEntryT<S>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw ConfigError("missing parameter entry: " + name);
    return entries_[it->second];
  }
  const ParamEntryT<S>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw ConfigError("missing parameter entry: " + name);
    return entries_[it->second];
  }

  std::size_t size() const { return entries_.size(); }
  ParamEntryT<S>& entry(std::size_t i) { return entries_[i]; }
  const ParamEntryT<S>& entry(std::size_t i) const { return entries_[i]; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grads() {
    for (auto& e : entries_) e.grad.fill(S(0));
  }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  std::size_t prunable_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (e.prunable) n += e.value.numel();
    return n;
  }

  template <typename T>
  ParamStoreT<T> cast() const {
    ParamStoreT<T> out;
    for (const auto& e : entries_) {
      auto& ne = out.add(e.name, e.value.shape, e.prunable);
      ne.value = e.value.template cast<T>();
      ne.grad = e.grad.template cast<T>();
    }
    return out;
  }

private:
  std::vector<ParamEntryT<S>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ParamStore = ParamStoreT<float>;

}  // namespace amr

#endif  // AMR_PARAM_STORE_HPP
