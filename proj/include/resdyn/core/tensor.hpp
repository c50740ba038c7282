#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include "resdyn/core/check.hpp"

namespace resdyn::core {

/// Dense 2-D row-major matrix of doubles. Copies share the underlying
/// buffer; use clone() for a deep copy. A vector is represented as a
/// single-row or single-column matrix by the caller's convention.
class Tensor {
 public:
  Tensor() : rows_(0), cols_(0), buf_(std::make_shared<std::vector<double>>()) {}

  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows),
        cols_(cols),
        buf_(std::make_shared<std::vector<double>>(rows * cols, fill)) {}

  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols),
        buf_(std::make_shared<std::vector<double>>(std::move(values))) {
    RESDYN_REQUIRE(buf_->size() == rows_ * cols_, "tensor: value count does not match shape");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return rows_ * cols_; }

  double& at(std::size_t r, std::size_t c) { return (*buf_)[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return (*buf_)[r * cols_ + c]; }

  double* data() { return buf_->data(); }
  const double* data() const { return buf_->data(); }

  Tensor clone() const {
    Tensor out(rows_, cols_);
    *out.buf_ = *buf_;
    return out;
  }

  /// Same buffer, new shape (row-major reinterpretation).
  Tensor reshaped(std::size_t rows, std::size_t cols) const {
    RESDYN_REQUIRE(rows * cols == size(), "tensor: reshape changes element count");
    Tensor out;
    out.rows_ = rows;
    out.cols_ = cols;
    out.buf_ = buf_;
    return out;
  }

  void fill(double v) {
    for (auto& x : *buf_) x = v;
  }

  bool all_finite() const {
    for (double x : *buf_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool same_buffer(const Tensor& other) const { return buf_ == other.buf_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::shared_ptr<std::vector<double>> buf_;
};

}  // namespace resdyn::core
