#include <doctest.h>

#include <cmath>

#include "gsmn/error.hpp"
#include "gsmn/network.hpp"
#include "gsmn/noise.hpp"
#include "support.hpp"

using namespace gsmn;

TEST_CASE("analytic moments") {
  auto m = analytic_moments(NoiseSpec::constant(1.0));
  CHECK(m.mean == 1.0);
  CHECK(m.variance == 0.0);
  m = analytic_moments(NoiseSpec::bernoulli(0.5));
  CHECK(m.mean == 0.5);
  CHECK(m.variance == 0.25);
  m = analytic_moments(NoiseSpec::beta(0.5, 0.5));
  CHECK(m.mean == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.variance == doctest::Approx(0.125).epsilon(1e-15));
  m = analytic_moments(NoiseSpec::gaussian(1.0, 0.5));
  CHECK(m.mean == 1.0);
  CHECK(m.variance == 0.25);
}

TEST_CASE("raw moments agree with mean and variance") {
  for (const auto& spec : {NoiseSpec::constant(3.0), NoiseSpec::bernoulli(0.2),
                           NoiseSpec::gaussian(0.7, 1.3), NoiseSpec::beta(2.5, 0.5)}) {
    CAPTURE(spec.name());
    CHECK(spec.raw_moment(1) == doctest::Approx(spec.mean()));
    CHECK(spec.raw_moment(2) - spec.mean() * spec.mean() == doctest::Approx(spec.variance()));
  }
  // E[lambda^4] for Bernoulli is p, for N(m, s^2) it is m^4 + 6 m^2 s^2 + 3 s^4.
  CHECK(NoiseSpec::bernoulli(0.5).raw_moment(4) == 0.5);
  CHECK(NoiseSpec::gaussian(1.0, 0.5).raw_moment(4) ==
        doctest::Approx(1.0 + 6 * 0.25 + 3 * 0.0625));
}

TEST_CASE("invalid parameters are rejected at construction") {
  CHECK_THROWS_AS(NoiseSpec::bernoulli(0.0), ParameterError);
  CHECK_THROWS_AS(NoiseSpec::bernoulli(1.5), ParameterError);
  CHECK_THROWS_AS(NoiseSpec::gaussian(1.0, -0.1), ParameterError);
  CHECK_THROWS_AS(NoiseSpec::beta(0.0, 1.0), ParameterError);
  CHECK_THROWS_AS(NoiseSpec::beta(1.0, -2.0), ParameterError);
  CHECK_THROWS_AS(NoiseSpec::constant(INFINITY), ParameterError);
  CHECK_NOTHROW(NoiseSpec::bernoulli(1.0));
  CHECK_NOTHROW(NoiseSpec::gaussian(1.0, 0.0));
}

TEST_CASE("lambda fields") {
  Rng rng(2);
  const std::vector<std::size_t> dims{3};
  auto f = sample_lambda_field(NoiseSpec::constant(1.0), dims, rng);
  REQUIRE(f.layers.size() == 1);
  CHECK(f.layers[0] == Matrix(1, 4, 1.0));

  const std::vector<std::size_t> dims2{5, 4};
  f = sample_lambda_field(NoiseSpec::bernoulli(1.0), dims2, rng, 3);
  CHECK(f.layers[0] == Matrix(3, 6, 1.0));
  CHECK(f.layers[1] == Matrix(3, 5, 1.0));

  const std::vector<std::size_t> big{100000};
  f = sample_lambda_field(NoiseSpec::bernoulli(0.5), big, rng);
  double ones = 0.0;
  for (std::size_t j = 0; j < 100000; ++j) ones += f.layers[0](0, j);
  CHECK(std::abs(ones / 100000 - 0.5) < 0.005);
  CHECK(f.layers[0](0, 100000) == 1.0);

  f = sample_lambda_field(NoiseSpec::gaussian(1.0, 3.0), dims2, rng, 8);
  for (const auto& m : f.layers)
    for (std::size_t r = 0; r < m.rows(); ++r) CHECK(m(r, m.cols() - 1) == 1.0);
}

TEST_CASE("expectation correction") {
  Rng rng(4);
  const Network net({{3, 2, Activation::tanh}, {2, 1, Activation::identity}}, rng);
  CHECK(expectation_correction(net, NoiseSpec::constant(1.0)) == net);
  CHECK(expectation_correction(net, NoiseSpec::gaussian(1.0, 0.5)) == net);

  const Network half = expectation_correction(net, NoiseSpec::bernoulli(0.5));
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Matrix& w = net.layer(l).weights;
    const Matrix& h = half.layer(l).weights;
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t c = 0; c < w.cols(); ++c) {
        const bool bias = r + 1 == w.rows();
        CHECK(h(r, c) == (bias ? w(r, c) : 0.5 * w(r, c)));
      }
  }

  // Twice with mean m scales by m^2.
  const Network quarter = expectation_correction(half, NoiseSpec::bernoulli(0.5));
  CHECK(quarter.layer(0).weights(0, 0) == 0.25 * net.layer(0).weights(0, 0));
  CHECK(expectation_correction(net, NoiseSpec::bernoulli(0.5), 0.7).layer(1).weights(0, 0) ==
        0.7 * net.layer(1).weights(0, 0));
  CHECK_THROWS_AS(expectation_correction(net, NoiseSpec::constant(0.0)), NumericError);
}

TEST_CASE("noise spec json round trip and strictness") {
  for (const auto& spec : {NoiseSpec::constant(2.0), NoiseSpec::bernoulli(0.8),
                           NoiseSpec::gaussian(1.0, 0.25), NoiseSpec::beta(0.5, 0.5)}) {
    const nlohmann::json j = spec;
    const NoiseSpec back = j.get<NoiseSpec>();
    CHECK(back.name() == spec.name());
    CHECK(back.mean() == spec.mean());
    CHECK(back.variance() == spec.variance());
  }
  CHECK_THROWS_AS(nlohmann::json({{"kind", "bernoulli"}, {"keep", 0.5}}).get<NoiseSpec>(),
                  ConfigError);
  CHECK_THROWS_AS(nlohmann::json({{"kind", "cauchy"}}).get<NoiseSpec>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json({{"kind", "bernoulli"}, {"keep_prob", 0.0}}).get<NoiseSpec>(),
                  ParameterError);
}
