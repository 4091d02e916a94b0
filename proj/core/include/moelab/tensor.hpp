#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace moelab {

/// Dense row-major matrix of 64-bit floats. Row vectors are 1xN, scalars 1x1.
/// All training math runs in double so finite-difference checks stay tight.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols);  // zero-filled
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor full(std::size_t rows, std::size_t cols, double value);
  static Tensor identity(std::size_t n);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row_vector(std::vector<double> values);
  static Tensor column_vector(const std::vector<double>& values);
  static Tensor scalar(double value);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

  /// Value of a 1x1 tensor; throws otherwise.
  double item() const;

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_str() const;

  bool all_finite() const;
  /// Throws std::invalid_argument naming `what` if any entry is NaN/Inf.
  void ensure_finite(const char* what) const;

  void fill(double value);

  bool operator==(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Exact max-abs difference, for tests and oracles.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace moelab
