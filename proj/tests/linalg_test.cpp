#include <gtest/gtest.h>

#include <cmath>

#include "relstance/adam.hpp"
#include "relstance/gradcheck.hpp"
#include "relstance/linalg.hpp"
#include "relstance/random.hpp"

using namespace relstance;

TEST(Linalg, GemvAndTranspose) {
  Matrix m(2, 3);
  double v = 1.0;
  for (auto& x : m.values()) x = v++;
  Vector x{1.0, 0.5, -1.0};
  Vector y(2, 1.0);
  gemv_add(m, x, y);
  EXPECT_DOUBLE_EQ(y[0], 1.0 + 1.0 + 1.0 - 3.0);
  EXPECT_DOUBLE_EQ(y[1], 1.0 + 4.0 + 2.5 - 6.0);

  Vector z(3, 0.0);
  gemv_transposed_add(m, Vector{1.0, 2.0}, z);
  EXPECT_EQ(z, (Vector{9.0, 12.0, 15.0}));
}

TEST(Linalg, RowsApplyMatchesPerRowGemv) {
  Rng rng(3);
  Matrix in(4, 3), w(5, 3);
  for (auto& x : in.values()) x = rng.normal(0, 1);
  for (auto& x : w.values()) x = rng.normal(0, 1);
  Matrix out(4, 5);
  rows_apply_add(in, w, out);
  for (std::size_t i = 0; i < 4; ++i) {
    Vector y(5, 0.0);
    gemv_add(w, in.row(i), y);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(out(i, k), y[k], 1e-14);
  }
  Matrix back(4, 3);
  rows_apply_transposed_add(out, w, back);
  for (std::size_t i = 0; i < 4; ++i) {
    Vector y(3, 0.0);
    gemv_transposed_add(w, out.row(i), y);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(back(i, k), y[k], 1e-12);
  }
  Matrix g(5, 3);
  accumulate_outer_rows(out, in, g);
  Matrix h(5, 3);
  for (std::size_t i = 0; i < 4; ++i) outer_add(h, out.row(i), in.row(i));
  for (std::size_t k = 0; k < g.values().size(); ++k) EXPECT_NEAR(g.values()[k], h.values()[k], 1e-12);
}

TEST(Linalg, NormsAndFiniteness) {
  EXPECT_DOUBLE_EQ(squared_norm(Vector{3.0, 4.0}), 25.0);
  EXPECT_TRUE(all_finite(Vector{1.0, -2.0}));
  EXPECT_FALSE(all_finite(Vector{1.0, NAN}));
  Vector y{1.0, 1.0};
  axpy(2.0, Vector{1.0, -1.0}, y);
  EXPECT_EQ(y, (Vector{3.0, -1.0}));
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a(7, {1, 2}), b(7, {1, 2}), c(7, {1, 3});
  const double x = a.uniform();
  EXPECT_EQ(x, b.uniform());
  EXPECT_NE(x, c.uniform());
  Rng d(9);
  for (int i = 0; i < 1000; ++i) {
    const auto k = d.index(5);
    ASSERT_LT(k, 5u);
  }
}

TEST(Adam, FirstTwoStepsMatchClosedForm) {
  Vector p{1.0, -2.0};
  std::vector<std::span<double>> params{p};
  AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};
  Adam opt(cfg, params);

  Vector g1{0.5, -4.0};
  std::vector<std::span<double>> grads{g1};
  opt.step(params, grads);
  // Bias correction makes the first step lr * g / (|g| + eps).
  EXPECT_NEAR(p[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-15);

  Vector g2{1.0, 2.0};
  grads[0] = g2;
  const double before0 = p[0];
  opt.step(params, grads);
  const double m = (0.9 * 0.1 * 0.5 + 0.1 * 1.0) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 0.25 + 0.001 * 1.0) / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], before0 - 0.1 * m / (std::sqrt(v) + 1e-8), 1e-14);
  EXPECT_EQ(opt.steps(), 2u);
}

TEST(Adam, RejectsMismatchedLayout) {
  Vector p{1.0};
  std::vector<std::span<double>> params{p};
  Adam opt({}, params);
  Vector g{1.0, 2.0};
  std::vector<std::span<double>> grads{g};
  EXPECT_THROW(opt.step(params, grads), std::invalid_argument);
}

TEST(GradCheck, QuadraticPassesAndWrongGradientFails) {
  Vector x{0.3, -1.2, 2.0};
  const Vector a{1.0, 3.0, 0.5};
  const auto loss = [&]() -> long double {
    long double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += a[i] * x[i] * x[i];
    return s;
  };
  Vector good(3), bad(3);
  for (std::size_t i = 0; i < 3; ++i) {
    good[i] = 2 * a[i] * x[i];
    bad[i] = good[i] * 1.01;
  }
  std::vector<std::span<double>> params{x};
  std::vector<std::span<const double>> g{good}, b{bad};
  Rng rng(1);
  EXPECT_LT(max_relative_gradient_error(params, g, loss, 50, 1e-5, rng), 1e-9);
  EXPECT_NEAR(max_relative_gradient_error(params, b, loss, 50, 1e-5, rng), 0.01, 1e-6);
  EXPECT_EQ(x, (Vector{0.3, -1.2, 2.0}));
}
