#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace relstance {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
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
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

// y += M x
void gemv_add(const Matrix& m, std::span<const double> x, std::span<double> y);
// y += M^T x
void gemv_transposed_add(const Matrix& m, std::span<const double> x, std::span<double> y);
// M += scale * a b^T
void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b, double scale = 1.0);

// out.row(i) += W in.row(i) for every row i
void rows_apply_add(const Matrix& in, const Matrix& w, Matrix& out);
// out.row(i) += W^T in.row(i) for every row i
void rows_apply_transposed_add(const Matrix& in, const Matrix& w, Matrix& out);
// g += a^T b, i.e. g(o, k) += sum_i a(i, o) b(i, k)
void accumulate_outer_rows(const Matrix& a, const Matrix& b, Matrix& g);

void axpy(double alpha, std::span<const double> x, std::span<double> y);
double squared_norm(std::span<const double> x);
bool all_finite(std::span<const double> x);

}  // namespace relstance
