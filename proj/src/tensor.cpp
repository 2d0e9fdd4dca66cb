#include "auxi/tensor.hpp"

#include <cmath>
#include <sstream>

#include "auxi/errors.hpp"

namespace auxi {

int64_t shape_size(std::span<const int64_t> shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(std::span<const int64_t> shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  for (int64_t d : shape_)
    if (d <= 0) throw ContractError("tensor dimension must be positive, got " + auxi::shape_str(shape_));
  data_.assign(static_cast<size_t>(shape_size(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != static_cast<int64_t>(data_.size()))
    throw ContractError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + auxi::shape_str(shape_));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int64_t> shape, double v) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = v;
  return t;
}

Tensor Tensor::from(std::vector<double> v) {
  auto n = static_cast<int64_t>(v.size());
  return Tensor({n}, std::move(v));
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str());
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const { return auxi::shape_str(shape_); }

}  // namespace auxi
