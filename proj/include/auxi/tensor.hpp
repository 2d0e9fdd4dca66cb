#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace auxi {

// Dense row-major tensor of 64-bit floats. Rank 0 is a scalar (size 1).
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor full(std::vector<int64_t> shape, double v);
  static Tensor from(std::vector<double> v);  // 1-D

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  bool is_scalar() const { return shape_.empty(); }
  double item() const;  // requires size() == 1
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  std::string shape_str() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

int64_t shape_size(std::span<const int64_t> shape);
std::string shape_str(std::span<const int64_t> shape);

}  // namespace auxi
