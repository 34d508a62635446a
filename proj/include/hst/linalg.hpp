#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "hst/error.hpp"

namespace hst {

// Dense row-major matrix of doubles. Sized for desk-scale sequences; no view
// machinery beyond row spans.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorCode::dimension_mismatch,
          "dot: vectors have different dimensions");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double squared_norm(std::span<const double> u) {
  double s = 0.0;
  for (double x : u) s += x * x;
  return s;
}

inline double norm(std::span<const double> u) { return std::sqrt(squared_norm(u)); }

inline double squared_distance(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorCode::dimension_mismatch,
          "squared_distance: vectors have different dimensions");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return s;
}

// u += a * v
inline void add_scaled(std::vector<double>& u, double a, std::span<const double> v) {
  require(u.size() == v.size(), ErrorCode::dimension_mismatch,
          "add_scaled: vectors have different dimensions");
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += a * v[i];
}

// Returns v scaled to unit L2 norm; the zero vector is returned unchanged.
inline std::vector<double> normalized(std::vector<double> v) {
  const double n = norm(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return v;
}

inline std::vector<double> mean_of(const std::vector<std::span<const double>>& rows) {
  require(!rows.empty(), ErrorCode::empty_input, "mean_of: no rows");
  std::vector<double> m(rows.front().size(), 0.0);
  for (const auto& r : rows) add_scaled(m, 1.0, r);
  for (double& x : m) x /= static_cast<double>(rows.size());
  return m;
}

// Row-wise softmax, numerically stabilised by the row maximum.
inline void softmax_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

// log(exp(a) + exp(b)) that tolerates -inf operands.
inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double mx = std::max(a, b);
  return mx + std::log1p(std::exp(std::min(a, b) - mx));
}

}  // namespace hst
