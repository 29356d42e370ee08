#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "entrosim/nn/tensor.hpp"

namespace entrosim::nn {

/// Ordered collection of named tensors. Order is insertion order and is the
/// order used for serialization and optimizer state.
template <typename T>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
  };

  Tensor<T>& add(std::string name, Tensor<T> value) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(value)});
    return entries_.back().value;
  }

  Tensor<T>* find(std::string_view name) {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].value;
  }
  const Tensor<T>* find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].value;
  }

  Tensor<T>& at(std::string_view name) {
    if (auto* t = find(name)) return *t;
    throw ConfigError("unknown parameter '" + std::string(name) + "'");
  }
  const Tensor<T>& at(std::string_view name) const {
    if (const auto* t = find(name)) return *t;
    throw ConfigError("unknown parameter '" + std::string(name) + "'");
  }

  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& e : entries_) out.add(e.name, Tensor<T>(e.value.shape()));
    return out;
  }

  void set_zero() {
    for (auto& e : entries_) e.value.fill(T{0});
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

  bool operator==(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name != other.entries_[i].name || !(entries_[i].value == other.entries_[i].value)) return false;
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace entrosim::nn
