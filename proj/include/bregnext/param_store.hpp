#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bregnext/error.hpp"
#include "bregnext/tensor.hpp"

namespace bnx {

/// What a stored tensor is for. The optimizer keys weight decay and the
/// alpha clamp off this.
enum class ParamRole {
  ConvKernel,
  DenseWeight,
  DenseBias,
  BnGamma,
  BnBeta,
  BnRunningMean,
  BnRunningVar,
  BnStatCount,
  MappingAlpha,
  MappingBeta,
  InputMeans,
  Generic,
};

const char* role_name(ParamRole role);
ParamRole role_from_name(const std::string& name);

template <typename T>
struct ParamEntry {
  std::string name;
  std::string owner;  // layer or residual unit that created the entry
  ParamRole role = ParamRole::Generic;
  bool trainable = true;
  BasicTensor<T> value;
  BasicTensor<T> grad;
};

/// Named tensors with gradients. Indices are stable once added.
template <typename T>
class BasicParamStore {
 public:
  std::size_t add(std::string name, std::string owner, ParamRole role, bool trainable, BasicTensor<T> value) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    const std::size_t idx = entries_.size();
    index_.emplace(name, idx);
    BasicTensor<T> grad(value.shape());
    entries_.push_back({std::move(name), std::move(owner), role, trainable, std::move(value), std::move(grad)});
    return idx;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t index_of(const std::string& name) const {
    auto idx = find(name);
    if (!idx) throw ConfigError("unknown parameter '" + name + "'");
    return *idx;
  }

  ParamEntry<T>& operator[](std::size_t i) { return entries_.at(i); }
  const ParamEntry<T>& operator[](std::size_t i) const { return entries_.at(i); }
  ParamEntry<T>& at(const std::string& name) { return entries_[index_of(name)]; }
  const ParamEntry<T>& at(const std::string& name) const { return entries_[index_of(name)]; }

  std::span<ParamEntry<T>> entries() noexcept { return entries_; }
  std::span<const ParamEntry<T>> entries() const noexcept { return entries_; }

  void zero_grads() {
    for (auto& e : entries_) e.grad.fill(T(0));
  }

  std::size_t trainable_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (e.trainable) n += e.value.size();
    return n;
  }

  /// Set by backward(), cleared by an optimizer step.
  bool grads_fresh() const noexcept { return grads_fresh_; }
  void set_grads_fresh(bool fresh) noexcept { grads_fresh_ = fresh; }

  template <typename U>
  BasicParamStore<U> cast() const {
    BasicParamStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.owner, e.role, e.trainable, e.value.template cast<U>());
    return out;
  }

 private:
  std::vector<ParamEntry<T>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  bool grads_fresh_ = false;
};

using ParamStore = BasicParamStore<float>;

}  // namespace bnx
