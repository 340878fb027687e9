#include <catch2/catch_amalgamated.hpp>

#include "dot/matrix.hpp"
#include "dot/rng.hpp"

using dot::Matrix;

namespace {
Matrix random_matrix(int r, int c, dot::Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = scale * rng.gauss();
  return m;
}

// independent oracle: naive triple loop
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j)
      for (int k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}
}  // namespace

TEST_CASE("matmul identity") {
  dot::Rng rng(1);
  const Matrix b = random_matrix(3, 4, rng);
  CHECK(dot::max_abs_diff(dot::matmul(Matrix::identity(3), b), b) == 0.0);
}

TEST_CASE("matmul hand-checked") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{0}, {1}};
  const Matrix c = dot::matmul(a, b);
  CHECK(c(0, 0) == 2.0);
  CHECK(c(1, 0) == 4.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
  dot::Rng rng(7);
  const Matrix a = random_matrix(5, 4, rng);
  const Matrix b = random_matrix(4, 3, rng);
  CHECK(dot::max_abs_diff(dot::matmul(a, b), matmul_oracle(a, b)) < 1e-12);
}

TEST_CASE("matmul shape error names both shapes") {
  const Matrix a(2, 3), b(4, 2);
  CHECK_THROWS_MATCHES(dot::matmul(a, b), dot::ShapeError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("2x3") &&
                           Catch::Matchers::ContainsSubstring("4x2")));
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transpose") {
  dot::Rng rng(11);
  const Matrix a = random_matrix(4, 6, rng);
  const Matrix b = random_matrix(5, 6, rng);
  CHECK(dot::max_abs_diff(dot::matmul_nt(a, b),
                          dot::matmul(a, dot::transpose(b))) < 1e-13);
  const Matrix c = random_matrix(4, 3, rng);
  CHECK(dot::max_abs_diff(dot::matmul_tn(a, c),
                          dot::matmul(dot::transpose(a), c)) < 1e-13);
}

TEST_CASE("softmax_rows all-zero input is uniform") {
  const Matrix s(2, 2);
  const Matrix p = dot::softmax_rows(s, 1.0);
  for (double v : p.data()) CHECK(v == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("softmax_rows analytic value") {
  const Matrix s{{std::log(3.0), 0.0}};
  const Matrix p = dot::softmax_rows(s, 1.0);
  CHECK(p(0, 0) == Catch::Approx(0.75).margin(1e-12));
  CHECK(p(0, 1) == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("softmax_rows survives a huge entry") {
  Matrix s(1, 3);
  s(0, 0) = 1000.0;
  const Matrix p = dot::softmax_rows(s, 1.0);
  CHECK(std::isfinite(p(0, 0)));
  CHECK(p(0, 0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(p(0, 1) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("softmax_rows parameter and input errors") {
  const Matrix s(1, 2);
  CHECK_THROWS_AS(dot::softmax_rows(s, 0.0), dot::ParamError);
  CHECK_THROWS_AS(dot::softmax_rows(s, -1.0), dot::ParamError);
  Matrix bad(1, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(dot::softmax_rows(bad, 1.0), dot::InputError);
}

TEST_CASE("softmax_rows rows sum to 1 and shift invariance holds") {
  dot::Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int r = 1 + static_cast<int>(rng.below(6));
    const int c = 1 + static_cast<int>(rng.below(6));
    const double scale = 0.2 + 3.0 * rng.uniform01();
    const Matrix s = random_matrix(r, c, rng, 5.0);
    const Matrix p = dot::softmax_rows(s, scale);
    for (double rowsum : dot::row_sums(p))
      CHECK(std::abs(rowsum - 1.0) < 1e-12);

    Matrix shifted = s;
    for (int i = 0; i < r; ++i) {
      const double shift = 10.0 * rng.gauss();
      for (int j = 0; j < c; ++j) shifted(i, j) += shift;
    }
    CHECK(dot::max_abs_diff(dot::softmax_rows(shifted, scale), p) < 1e-12);
  }
}

TEST_CASE("pairwise_sq_dist basics") {
  const Matrix x{{1.0, 2.0}};
  CHECK(dot::pairwise_sq_dist(x, x)(0, 0) == 0.0);
  const Matrix a{{0.0}}, b{{3.0}};
  CHECK(dot::pairwise_sq_dist(a, b)(0, 0) == 9.0);
}

TEST_CASE("pairwise_sq_dist matches double-loop oracle") {
  dot::Rng rng(33);
  const Matrix x = random_matrix(4, 3, rng);
  const Matrix y = random_matrix(5, 3, rng);
  const Matrix d = dot::pairwise_sq_dist(x, y);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k)
        s += (x(i, k) - y(j, k)) * (x(i, k) - y(j, k));
      CHECK(std::abs(d(i, j) - s) < 1e-10);
    }
  CHECK_THROWS_AS(dot::pairwise_sq_dist(x, random_matrix(2, 2, rng)),
                  dot::ShapeError);
}

TEST_CASE("pairwise_sq_dist self distances are symmetric with zero diagonal") {
  dot::Rng rng(44);
  const Matrix x = random_matrix(6, 4, rng, 3.0);
  const Matrix d = dot::pairwise_sq_dist(x, x);
  for (int i = 0; i < 6; ++i) {
    CHECK(d(i, i) == 0.0);
    for (int j = 0; j < 6; ++j) CHECK(std::abs(d(i, j) - d(j, i)) < 1e-12);
  }
}

TEST_CASE("rng streams are deterministic and distinct") {
  dot::Rng a(5), b(5), c(6);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  bool differ = false;
  dot::Rng a2(5);
  for (int i = 0; i < 10; ++i) differ |= a2.next_u64() != c.next_u64();
  CHECK(differ);
}

TEST_CASE("rng gauss moments roughly standard") {
  dot::Rng rng(9);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gauss();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}
