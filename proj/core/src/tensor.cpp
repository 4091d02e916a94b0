#include "moelab/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace moelab {

Tensor::Tensor(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    std::ostringstream msg;
    msg << "tensor data length " << data_.size() << " does not match shape " << rows_ << "x"
        << cols_;
    throw std::invalid_argument(msg.str());
  }
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
  Tensor t(rows, cols);
  t.fill(value);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("ragged initializer rows");
    std::size_t j = 0;
    for (double v : row) t(i, j++) = v;
    ++i;
  }
  return t;
}

Tensor Tensor::row_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(1, n, std::move(values));
}

Tensor Tensor::column_vector(const std::vector<double>& values) {
  Tensor t(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) t(i, 0) = values[i];
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t(1, 1);
  t(0, 0) = value;
  return t;
}

double Tensor::item() const {
  if (rows_ != 1 || cols_ != 1) {
    throw std::invalid_argument("item() requires a 1x1 tensor, got " + shape_str());
  }
  return data_[0];
}

std::string Tensor::shape_str() const {
  std::ostringstream s;
  s << rows_ << "x" << cols_;
  return s.str();
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::ensure_finite(const char* what) const {
  if (!all_finite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entries in " + shape_str() +
                                " tensor");
  }
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("max_abs_diff shape mismatch: " + a.shape_str() + " vs " +
                                b.shape_str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

}  // namespace moelab
