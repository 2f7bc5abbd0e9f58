#include <doctest.h>

#include <cmath>
#include <fstream>

#include "gsmn/dataset.hpp"
#include "gsmn/error.hpp"
#include "gsmn/posterior.hpp"
#include "support.hpp"

using namespace gsmn;

namespace {

Dataset linear_data(std::size_t n, Rng& rng) {
  Dataset d{Matrix(n, 2), Matrix(n, 1), Task::regression, Split::train};
  for (std::size_t i = 0; i < n; ++i) {
    d.features(i, 0) = rng.normal();
    d.features(i, 1) = rng.normal();
    d.targets(i, 0) = d.features(i, 0) - 2.0 * d.features(i, 1) + 0.5 + rng.normal();
  }
  return d;
}

Network linear_net() { return Network({{2, 1, Activation::identity}}); }

}  // namespace

TEST_CASE("zero learning rate leaves the network untouched") {
  Rng rng(1);
  const Network net({{3, 2, Activation::tanh}, {2, 1, Activation::identity}}, rng);
  SgldConfig cfg;
  cfg.lr = {0.0, 1.0, 0.0};
  const Matrix x = test::random_matrix(4, 3, rng);
  const Matrix y = test::random_matrix(4, 1, rng);
  CHECK(sgld_step(net, x, y, cfg, 0, 100, rng) == net);
}

TEST_CASE("Langevin chain on a Gaussian mean matches the conjugate posterior") {
  Rng rng(2);
  const std::size_t n = 20;
  const double s2 = 4.0, sigma0 = 3.0;
  std::vector<double> xs(n);
  double sum = 0.0;
  for (double& x : xs) sum += (x = 1.5 + 2.0 * rng.normal());
  const double post_var = 1.0 / (n / s2 + 1.0 / (sigma0 * sigma0));
  const double post_mean = post_var * sum / s2;

  std::vector<double> theta{0.0}, grad{0.0}, chain;
  const double lr = 0.01;
  for (std::size_t t = 0; t < 400000; ++t) {
    grad[0] = (n * theta[0] - sum) / s2 + theta[0] / (sigma0 * sigma0);
    langevin_update(theta, grad, {}, lr, 2.0, rng);
    if (t >= 1000) chain.push_back(theta[0]);
  }
  const auto [m, v] = test::two_pass(chain);
  CHECK(std::abs(m - post_mean) < 0.05);
  CHECK(std::abs(v - post_var) / post_var < 0.10);
}

TEST_CASE("masked weights stay at zero") {
  Rng rng(3);
  Network net({{4, 3, Activation::tanh}, {3, 1, Activation::identity}}, rng);
  net.layer(0).mask(2, 1) = 0.0;
  net.apply_masks();
  Dataset d{test::random_matrix(30, 4, rng), test::random_matrix(30, 1, rng), Task::regression,
            Split::train};
  SgldConfig cfg;
  cfg.lr = {1e-3, 1.0, 0.0};
  cfg.burn_in = 0;
  cfg.n_samples = 10000;
  cfg.batch_size = 10;
  bool stayed = true;
  collect_moments(net, d, cfg, rng,
                  [&](const Network& s) { stayed &= s.layer(0).weights(2, 1) == 0.0; });
  CHECK(stayed);
}

TEST_CASE("collect_moments preconditions and the constant chain") {
  Rng rng(4);
  const Dataset d = linear_data(10, rng);
  Network net = linear_net();
  net.layer(0).weights = Matrix{{0.3}, {-0.1}, {0.05}};
  SgldConfig cfg;
  cfg.n_samples = 1;
  CHECK_THROWS_AS(collect_moments(net, d, cfg, rng), ParameterError);

  cfg.n_samples = 5;
  cfg.burn_in = 3;
  cfg.lr = {0.0, 1.0, 0.0};
  const auto run = collect_moments(net, d, cfg, rng);
  CHECK(run.moments.count() == 5);
  CHECK(run.moments.mean(0) == net.layer(0).weights);
  CHECK(run.moments.variance(0) == Matrix(3, 1, 0.0));
}

TEST_CASE("streaming moments equal two-pass statistics of the recorded chain") {
  Rng rng(5);
  const Dataset d = linear_data(40, rng);
  Rng init(6);
  const Network net({{2, 3, Activation::tanh}, {3, 1, Activation::identity}}, init);
  SgldConfig cfg;
  cfg.lr = {1e-3, 1.0, 0.0};
  cfg.noise_variance_scale = 2.0;
  cfg.burn_in = 50;
  cfg.thin = 2;
  cfg.n_samples = 1000;
  cfg.batch_size = 10;
  std::vector<Network> samples;
  const auto run = collect_moments(net, d, cfg, rng, [&](const Network& s) { samples.push_back(s); });
  REQUIRE(samples.size() == 1000);
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Matrix var = run.moments.variance(l);
    for (std::size_t i = 0; i < var.size(); ++i) {
      std::vector<double> xs;
      for (const auto& s : samples) xs.push_back(s.layer(l).weights.data()[i]);
      const auto [m, v] = test::two_pass(xs);
      CHECK(std::abs(run.moments.mean(l).data()[i] - m) < 1e-10);
      CHECK(std::abs(var.data()[i] - v) < 1e-10);
    }
  }
  CHECK(run.final_net == samples.back());

  // Same seed, same moments.
  Rng again(5);
  (void)linear_data(40, again);
  const auto rerun = collect_moments(net, d, cfg, again);
  CHECK(rerun.moments.mean(0) == run.moments.mean(0));
  CHECK(rerun.moments.m2(1) == run.moments.m2(1));
}

TEST_CASE("merging accumulators equals accumulating everything") {
  Rng rng(7);
  const Network shape({{2, 2, Activation::identity}});
  PosteriorMoments all(shape), a(shape), b(shape);
  for (int i = 0; i < 25; ++i) {
    Network s = shape;
    for (double& w : s.layer(0).weights.data()) w = rng.normal() + 3.0;
    all.add(s);
    (i < 10 ? a : b).add(s);
  }
  a.merge(b);
  CHECK(a.count() == 25);
  CHECK(test::max_abs_diff(a.mean(0), all.mean(0)) < 1e-12);
  CHECK(test::max_abs_diff(a.variance(0), all.variance(0)) < 1e-12);
  PosteriorMoments one(shape);
  one.add(shape);
  CHECK_THROWS_AS(one.variance(0), ParameterError);
}

TEST_CASE("moments file round trip and errors") {
  Rng rng(8);
  const Network shape({{3, 2, Activation::tanh}, {2, 2, Activation::softmax}}, rng);
  PosteriorMoments m(shape);
  for (int i = 0; i < 4; ++i) {
    Network s = shape;
    for (auto& layer : s.layers())
      for (double& w : layer.weights.data()) w += rng.normal();
    m.add(s);
  }
  test::TempDir dir("moments_io");
  save_moments(m, dir / "m.bin");
  const auto back = load_moments(dir / "m.bin");
  CHECK(back.count() == 4);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(back.mean(l) == m.mean(l));
    CHECK(test::max_abs_diff(back.variance(l), m.variance(l)) < 1e-15);
  }
  back.require_matches(shape);
  CHECK_THROWS_AS(back.require_matches(Network({{3, 3, Activation::tanh}})), ShapeError);

  {
    std::ofstream out(dir / "bad.bin", std::ios::binary);
    out << "NOPE0000";
  }
  CHECK_THROWS_AS(load_moments(dir / "bad.bin"), FormatError);
  std::filesystem::resize_file(dir / "m.bin", 30);
  CHECK_THROWS_WITH_AS(load_moments(dir / "m.bin"), doctest::Contains("offset"), FormatError);
}

TEST_CASE("invalid sampler settings") {
  SgldConfig cfg;
  cfg.thin = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = SgldConfig{};
  cfg.prior_sigma0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}
