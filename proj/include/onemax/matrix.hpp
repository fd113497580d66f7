#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "onemax/error.hpp"

namespace onemax {

// Dense column-major matrix of doubles. Columns are time frames throughout
// the library, so a column is a contiguous spectral vector.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

  std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // Appends zero columns up to `cols`; never shrinks.
  void pad_cols(std::size_t cols) {
    if (cols > cols_) {
      data_.resize(rows_ * cols, 0.0);
      cols_ = cols;
    }
  }

  // Appends one row at the bottom.
  void append_row(std::span<const double> values) {
    if (values.size() != cols_) throw ShapeError("append_row: length does not match column count");
    std::vector<double> grown((rows_ + 1) * cols_);
    for (std::size_t c = 0; c < cols_; ++c) {
      for (std::size_t r = 0; r < rows_; ++r) grown[c * (rows_ + 1) + r] = (*this)(r, c);
      grown[c * (rows_ + 1) + rows_] = values[c];
    }
    data_ = std::move(grown);
    ++rows_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace onemax
