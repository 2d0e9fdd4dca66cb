#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auxi/tensor.hpp"

namespace auxi {

struct ParamEntry {
  std::string name;
  Tensor value;
  bool nonneg = false;  // entry participates in monotone weight clipping
};

// Ordered, named, shaped parameter collection with a deterministic mapping to
// a single flat coordinate vector (entry order, row-major within entries).
class ParamSet {
 public:
  ParamSet() = default;

  void add(std::string name, Tensor value, bool nonneg = false);

  int64_t count() const { return static_cast<int64_t>(entries_.size()); }
  int64_t dim() const;  // total flattened dimension

  ParamEntry& entry(int64_t i) { return entries_[static_cast<size_t>(i)]; }
  const ParamEntry& entry(int64_t i) const { return entries_[static_cast<size_t>(i)]; }
  int64_t find(std::string_view name) const;  // -1 if absent
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<ParamEntry> entries_;
};

}  // namespace auxi
