#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gsmn/error.hpp"
#include "gsmn/matrix.hpp"
#include "gsmn/noise.hpp"
#include "gsmn/rng.hpp"
#include "support.hpp"

using namespace gsmn;

namespace {

Matrix triple_loop(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

}  // namespace

TEST_CASE("matmul with the identity returns the other operand") {
  const Matrix b{{3, 4}, {5, 6}};
  CHECK(matmul(Matrix{{1, 0}, {0, 1}}, b) == b);
  CHECK(matmul(Matrix::identity(2), b) == b);
}

TEST_CASE("matmul of a row by a column") {
  const Matrix c = matmul(Matrix{{1, 2}}, Matrix{{3}, {4}});
  REQUIRE(c.rows() == 1);
  REQUIRE(c.cols() == 1);
  CHECK(c(0, 0) == 11.0);
}

TEST_CASE("matmul agrees with a triple loop") {
  Rng rng(3);
  const Matrix a = test::random_matrix(5, 7, rng);
  const Matrix b = test::random_matrix(7, 3, rng);
  const Matrix c = matmul(a, b);
  CHECK(c.rows() == 5);
  CHECK(c.cols() == 3);
  CHECK(test::max_abs_diff(c, triple_loop(a, b)) < 1e-12);
  CHECK(test::max_abs_diff(matmul_tn(transpose(a), b), c) < 1e-12);
  CHECK(test::max_abs_diff(matmul_nt(a, transpose(b)), c) < 1e-12);
}

TEST_CASE("matmul shape mismatch names both operands") {
  try {
    (void)matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(std::count(msg.begin(), msg.end(), 'x') >= 2);
  }
}

TEST_CASE("constructor rejects data of the wrong length") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST_CASE("same seed and stream reproduce the sequence") {
  Rng a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("split children do not overlap the parent") {
  Rng parent(9);
  Rng child = parent.split();
  Rng child2 = parent.split();
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    seen.insert(parent.next_u64());
    seen.insert(child.next_u64());
    seen.insert(child2.next_u64());
  }
  CHECK(seen.size() == 30000);
}

TEST_CASE("uniform stays inside the open unit interval and below() is in range") {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(rng.below(7) < 7);
  }
}

TEST_CASE("draw from Constant(1)") {
  Rng rng(5);
  CHECK(draw(NoiseSpec::constant(1.0), rng, 4) == std::vector<double>{1, 1, 1, 1});
}

TEST_CASE("draw with n = 0 is a parameter error") {
  Rng rng(5);
  CHECK_THROWS_AS(draw(NoiseSpec::bernoulli(0.5), rng, 0), ParameterError);
}

TEST_CASE("Bernoulli(0.5) sample mean within 0.002 of 0.5") {
  Rng rng(11);
  const auto xs = draw(NoiseSpec::bernoulli(0.5), rng, 1000000);
  const auto [mean, var] = test::two_pass(xs);
  CHECK(std::abs(mean - 0.5) < 0.002);
}

TEST_CASE("Beta(0.5, 0.5) sample variance within 2% of 1/8") {
  Rng rng(12);
  const auto xs = draw(NoiseSpec::beta(0.5, 0.5), rng, 1000000);
  const auto [mean, var] = test::two_pass(xs);
  CHECK(std::abs(var - 0.125) / 0.125 < 0.02);
}

TEST_CASE("draw statistics match analytic moments within 5 standard errors") {
  const std::vector<NoiseSpec> specs{
      NoiseSpec::constant(2.0),    NoiseSpec::bernoulli(0.3), NoiseSpec::gaussian(1.0, 0.5),
      NoiseSpec::beta(0.5, 0.5),   NoiseSpec::beta(2.0, 5.0), NoiseSpec::beta(0.2, 0.7),
  };
  const std::size_t n = 1000000;
  std::uint64_t stream = 0;
  for (const auto& spec : specs) {
    CAPTURE(spec.name());
    Rng rng(77, ++stream);
    const auto xs = draw(spec, rng, n);
    const auto [mean, var] = test::two_pass(xs);
    const auto m = analytic_moments(spec);
    if (m.variance == 0.0) {
      CHECK(mean == m.mean);
      CHECK(var == 0.0);
      continue;
    }
    const double se_mean = std::sqrt(m.variance / n);
    // Var of the sample variance: (mu4 - sigma^4) / n.
    const double mu4 = spec.raw_moment(4) - 4 * m.mean * spec.raw_moment(3) +
                       6 * m.mean * m.mean * spec.raw_moment(2) - 3 * std::pow(m.mean, 4);
    const double se_var = std::sqrt((mu4 - m.variance * m.variance) / n);
    CHECK(std::abs(mean - m.mean) < 5 * se_mean);
    CHECK(std::abs(var - m.variance) < 5 * se_var);
  }
}

TEST_CASE("gamma sampler mean and variance") {
  for (double shape : {0.3, 1.0, 4.5}) {
    CAPTURE(shape);
    Rng rng(31, static_cast<std::uint64_t>(shape * 10));
    std::vector<double> xs(400000);
    for (double& x : xs) x = rng.gamma(shape);
    const auto [mean, var] = test::two_pass(xs);
    CHECK(std::abs(mean - shape) < 5 * std::sqrt(shape / xs.size()));
    CHECK(std::abs(var - shape) / shape < 0.03);
  }
}
