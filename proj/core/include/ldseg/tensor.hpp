// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

namespace ldseg {

// Dense row-major tensor of doubles, rank 1..4. All shape arithmetic is
// checked; out-of-range access asserts in debug builds.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, std::vector<double> data);
  static Tensor scalar(double value) { return from({1}, {value}); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int i) {
    assert(ndim() == 1);
    return data_[idx1(i)];
  }
  double at(int i) const { return const_cast<Tensor*>(this)->at(i); }
  double& at(int i, int j) {
    assert(ndim() == 2);
    return data_[idx2(i, j)];
  }
  double at(int i, int j) const { return const_cast<Tensor*>(this)->at(i, j); }
  double& at(int i, int j, int k) {
    assert(ndim() == 3);
    return data_[idx3(i, j, k)];
  }
  double at(int i, int j, int k) const { return const_cast<Tensor*>(this)->at(i, j, k); }
  double& at(int i, int j, int k, int l) {
    assert(ndim() == 4);
    return data_[idx4(i, j, k, l)];
  }
  double at(int i, int j, int k, int l) const {
    return const_cast<Tensor*>(this)->at(i, j, k, l);
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double value);

  // Reinterprets the flat data under a new shape with equal element count.
  Tensor reshaped(std::vector<int> shape) const;

  double max_abs() const;
  double sum() const;

  std::string shape_str() const;
  static std::string shape_str(const std::vector<int>& shape);
  static std::size_t count(const std::vector<int>& shape);

 private:
  std::size_t idx1(int i) const {
    assert(i >= 0 && i < shape_[0]);
    return static_cast<std::size_t>(i);
  }
  std::size_t idx2(int i, int j) const {
    assert(i >= 0 && i < shape_[0] && j >= 0 && j < shape_[1]);
    return static_cast<std::size_t>(i) * shape_[1] + j;
  }
  std::size_t idx3(int i, int j, int k) const {
    assert(i >= 0 && i < shape_[0] && j >= 0 && j < shape_[1] && k >= 0 && k < shape_[2]);
    return (static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k;
  }
  std::size_t idx4(int i, int j, int k, int l) const {
    assert(i >= 0 && i < shape_[0] && j >= 0 && j < shape_[1] && k >= 0 && k < shape_[2] &&
           l >= 0 && l < shape_[3]);
    return ((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace ldseg
