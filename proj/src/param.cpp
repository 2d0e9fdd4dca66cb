#include "auxi/param.hpp"

#include <algorithm>

#include "auxi/errors.hpp"

namespace auxi {

void ParamSet::add(std::string name, Tensor value, bool nonneg) {
  if (find(name) >= 0) throw ContractError("duplicate parameter name: " + name);
  entries_.push_back({std::move(name), std::move(value), nonneg});
}

int64_t ParamSet::dim() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

int64_t ParamSet::find(std::string_view name) const {
  for (size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return static_cast<int64_t>(i);
  return -1;
}

Tensor& ParamSet::at(std::string_view name) {
  int64_t i = find(name);
  if (i < 0) throw ContractError("no parameter named " + std::string(name));
  return entries_[static_cast<size_t>(i)].value;
}

const Tensor& ParamSet::at(std::string_view name) const {
  return const_cast<ParamSet*>(this)->at(name);
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(dim()));
  for (const auto& e : entries_)
    flat.insert(flat.end(), e.value.vec().begin(), e.value.vec().end());
  return flat;
}

void ParamSet::unflatten(std::span<const double> flat) {
  if (static_cast<int64_t>(flat.size()) != dim())
    throw ContractError("unflatten dimension mismatch: got " + std::to_string(flat.size()) +
                        ", expected " + std::to_string(dim()));
  size_t off = 0;
  for (auto& e : entries_) {
    std::copy(flat.begin() + static_cast<ptrdiff_t>(off),
              flat.begin() + static_cast<ptrdiff_t>(off + e.value.vec().size()),
              e.value.vec().begin());
    off += e.value.vec().size();
  }
}

}  // namespace auxi
