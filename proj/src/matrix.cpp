#include "anchoralign/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "anchoralign/error.hpp"

namespace anchoralign {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::kDimensionMismatch,
                "buffer of " + std::to_string(data_.size()) + " values for " +
                    std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw Error(ErrorCode::kDimensionMismatch, "ragged initializer list");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw Error(ErrorCode::kDimensionMismatch,
              std::string(op) + " of " + a.shape() + " and " + b.shape());
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix c(a.rows(), b.cols());
  // i-t-j order: each c(i,j) still sums over t in increasing order.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t t = 0; t < a.cols(); ++t) {
      const double av = a(i, t);
      auto brow = b.row(t);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_bt", a, b);
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_at", a, b);
  Matrix c(a.cols(), b.cols());
  for (std::size_t t = 0; t < a.rows(); ++t) {
    auto arow = a.row(t);
    auto brow = b.row(t);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double av = arow[i];
      auto crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a, b);
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
  return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("subtract", a, b);
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

Matrix scaled(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

double frobenius_norm(const Matrix& a) { return norm2(a.data()); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double n = norm2(m.row(r));
    if (!(n > kNormEpsilon)) {
      throw Error(ErrorCode::kDegenerateRow,
                  "row " + std::to_string(r) + " has norm " + std::to_string(n));
    }
    for (double& v : out.row(r)) v /= n;
  }
  return out;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace anchoralign
