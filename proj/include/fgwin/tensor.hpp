#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fgwin {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. The buffer length always equals the
/// product of the shape; every dimension is positive.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, v); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Same buffer, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Boolean companion of Tensor, used for padding masks ([B x T], true = real).
class Mask {
 public:
  Mask() = default;
  explicit Mask(Shape shape, bool fill = true);

  static Mask from_lengths(std::span<const std::size_t> lengths, std::size_t max_len);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }
  bool at(std::size_t i, std::size_t j) const { return bits_[i * shape_[1] + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { bits_[i * shape_[1] + j] = v ? 1 : 0; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Shape shape_;
  std::vector<std::uint8_t> bits_;
};

/// [m x k] * [k x n], or batched [b x m x k] * [b x k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Logistic function, strictly inside (0, 1) for every finite input.
double sigmoid(double x);
Tensor sigmoid(const Tensor& x);

/// Softmax over the last axis restricted to positions where the mask is
/// true. The mask broadcasts numpy-style against the scores (right-aligned,
/// each mask dim equal to the score dim or 1). Masked positions get exactly 0
/// and a fully masked row is all zeros.
Tensor masked_softmax(const Tensor& scores, const Mask& mask);

/// Row-level entry point used by attention: softmax of `scores` in place over
/// entries with valid[i] != 0.
void masked_softmax_row(std::span<double> scores, std::span<const std::uint8_t> valid);

}  // namespace fgwin
