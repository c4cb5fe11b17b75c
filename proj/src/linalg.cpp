#include "relstance/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "relstance/random.hpp"

namespace relstance {

Rng::Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * stream.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  engine_.seed(seq);
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void gemv_add(const Matrix& m, std::span<const double> x, std::span<double> y) {
  assert(x.size() == m.cols() && y.size() == m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] += dot(m.row(r), x);
}

void gemv_transposed_add(const Matrix& m, std::span<const double> x, std::span<double> y) {
  assert(x.size() == m.rows() && y.size() == m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) y[c] += xr * row[c];
  }
}

void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b, double scale) {
  assert(a.size() == m.rows() && b.size() == m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ar = scale * a[r];
    if (ar == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += ar * b[c];
  }
}

void rows_apply_add(const Matrix& in, const Matrix& w, Matrix& out) {
  assert(in.rows() == out.rows() && in.cols() == w.cols() && out.cols() == w.rows());
  for (std::size_t i = 0; i < in.rows(); ++i) gemv_add(w, in.row(i), out.row(i));
}

void rows_apply_transposed_add(const Matrix& in, const Matrix& w, Matrix& out) {
  assert(in.rows() == out.rows() && in.cols() == w.rows() && out.cols() == w.cols());
  for (std::size_t i = 0; i < in.rows(); ++i) gemv_transposed_add(w, in.row(i), out.row(i));
}

void accumulate_outer_rows(const Matrix& a, const Matrix& b, Matrix& g) {
  assert(a.rows() == b.rows() && g.rows() == a.cols() && g.cols() == b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) outer_add(g, a.row(i), b.row(i));
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double squared_norm(std::span<const double> x) { return dot(x, x); }

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace relstance
