#include <doctest.h>

#include "gsmn/dataset.hpp"
#include "gsmn/error.hpp"
#include "gsmn/training.hpp"
#include "support.hpp"

using namespace gsmn;

namespace {

Network toy_net(Rng& rng) {
  return Network({{2, 8, Activation::tanh}, {8, 2, Activation::softmax}}, rng);
}

}  // namespace

TEST_CASE("polynomial decay schedule") {
  const PolyDecay s{0.5, 1.0, 0.55};
  CHECK(s.at(0) == 0.5);
  CHECK(s.at(3) == doctest::Approx(0.5 * std::pow(4.0, -0.55)));
  CHECK_THROWS_AS((PolyDecay{-1.0, 1.0, 0.5}.validate()), ParameterError);
}

TEST_CASE("separable blobs are learned with constant noise") {
  Rng data_rng(100);
  const Dataset data = synth_two_blobs(200, 6.0, data_rng);
  Rng rng(101);
  TrainOptions opt;
  opt.epochs = 100;
  opt.batch_size = 16;
  opt.lr = {0.1, 1.0, 0.55};
  const Network net = train_mn(toy_net(rng), data, NoiseSpec::constant(1.0), opt, rng);
  CHECK(accuracy(net, data.features, data.targets) >= 0.95);
}

TEST_CASE("zero epochs returns the network unchanged") {
  Rng data_rng(1);
  const Dataset data = synth_two_blobs(50, 4.0, data_rng);
  Rng rng(2);
  const Network net = toy_net(rng);
  TrainOptions opt;
  opt.epochs = 0;
  CHECK(train_mn(net, data, NoiseSpec::bernoulli(0.5), opt, rng) == net);
}

TEST_CASE("same seed gives bit-identical weights; masks survive training") {
  Rng data_rng(3);
  const Dataset data = synth_two_blobs(80, 4.0, data_rng);
  Rng init(4);
  Network net = toy_net(init);
  net.layer(0).mask(0, 3) = 0.0;
  net.layer(1).mask(8, 1) = 0.0;
  TrainOptions opt;
  opt.epochs = 5;
  opt.prior_sigma0 = 1.0;
  Rng a(5), b(5);
  const Network na = train_mn(net, data, NoiseSpec::beta(0.5, 0.5), opt, a);
  const Network nb = train_mn(net, data, NoiseSpec::beta(0.5, 0.5), opt, b);
  CHECK(na == nb);
  CHECK(na.layer(0).weights(0, 3) == 0.0);
  CHECK(na.layer(1).weights(8, 1) == 0.0);
  CHECK(na.layer(0).weights(1, 3) != net.layer(0).weights(1, 3));
}

TEST_CASE("divergence reports the epoch") {
  Rng rng(6);
  SparseRegression s = synth_sparse_regression(40, 3, std::vector<std::size_t>{0}, 5.0, 0.1, rng);
  Network net({{3, 4, Activation::identity}, {4, 1, Activation::identity}}, rng);
  TrainOptions opt;
  opt.epochs = 50;
  opt.lr = {50.0, 1.0, 0.0};
  try {
    train_mn(net, s.data, NoiseSpec::constant(1.0), opt, rng);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() < 50);
    CHECK(e.exit_code() == 2);
  }
}

TEST_CASE("epoch callback sees every epoch") {
  Rng data_rng(7);
  const Dataset data = synth_two_blobs(30, 4.0, data_rng);
  Rng rng(8);
  TrainOptions opt;
  opt.epochs = 4;
  std::vector<std::size_t> seen;
  train_plain(toy_net(rng), data.features, data.targets, opt, rng,
              [&](const Network&, const EpochReport& r) {
                seen.push_back(r.epoch);
                CHECK(std::isfinite(r.train_loss));
              });
  CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3});
}
