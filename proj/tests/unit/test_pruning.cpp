#include <doctest.h>

#include <cmath>

#include "gsmn/error.hpp"
#include "gsmn/pruning.hpp"
#include "support.hpp"

using namespace gsmn;

namespace {

// Moments with the given means and standard deviations for a 1-layer net
// whose weight matrix has the same shape.
PosteriorMoments moments_of(const Matrix& mu, const Matrix& sd) {
  Matrix var = sd;
  for (double& v : var.data()) v *= v;
  return PosteriorMoments::from_mean_variance({{mu, var}}, 100);
}

std::vector<bool> masked_set(const Network& net) {
  std::vector<bool> out;
  for (const auto& layer : net.layers())
    for (double m : layer.mask.data()) out.push_back(m == 0.0);
  return out;
}

}  // namespace

TEST_CASE("rule formulas") {
  const auto m = moments_of(Matrix{{0.1, -0.3}}, Matrix{{1.0, 0.0}});
  const auto snr = score_weights(m, {PruneRuleKind::snr, 1e-8});
  const auto spr = score_weights(m, {PruneRuleKind::spr, 1e-8});
  const auto mag = score_weights(m, {PruneRuleKind::magnitude, 1e-8});
  CHECK(snr[0](0, 0) == doctest::Approx(0.1));
  CHECK(spr[0](0, 0) == doctest::Approx(1.1));
  CHECK(snr[0](0, 1) == doctest::Approx(3e7));
  CHECK(spr[0](0, 1) == doctest::Approx(0.3));
  CHECK(mag[0](0, 1) == doctest::Approx(0.3));
}

TEST_CASE("SNR and SPR rank equal-mean weights in opposite orders") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const double mu = rng.normal();
    const double sa = rng.uniform() * 3.0, sb = rng.uniform() * 3.0;
    if (sa == sb) continue;
    const auto m = moments_of(Matrix{{mu, -mu}}, Matrix{{sa, sb}});
    const auto snr = score_weights(m, {PruneRuleKind::snr, 1e-8});
    const auto spr = score_weights(m, {PruneRuleKind::spr, 1e-8});
    CHECK((snr[0](0, 0) < snr[0](0, 1)) != (spr[0](0, 0) < spr[0](0, 1)));
  }
}

TEST_CASE("pruning by fraction") {
  Network net({{4, 2, Activation::identity}});  // 10 weights including biases
  Matrix w(5, 2);
  for (std::size_t i = 0; i < 10; ++i) w.data()[i] = static_cast<double>(i) + 1.0;
  net.layer(0).weights = w;
  Matrix score(5, 2);
  const std::vector<double> order{7, 2, 9, 0, 5, 3, 8, 1, 6, 4};
  for (std::size_t i = 0; i < 10; ++i) score.data()[i] = order[i];
  const std::vector<Matrix> scores{score};

  CHECK(prune_to_fraction(net, scores, 0.0) == net);
  const Network half = prune_to_fraction(net, scores, 0.5);
  for (std::size_t i = 0; i < 10; ++i) {
    const bool pruned = order[i] < 5;
    CHECK(half.layer(0).mask.data()[i] == (pruned ? 0.0 : 1.0));
    CHECK(half.layer(0).weights.data()[i] == (pruned ? 0.0 : w.data()[i]));
  }
  CHECK(prune_to_fraction(half, scores, 0.5) == half);
  const Network all = prune_to_fraction(net, scores, 1.0);
  for (double v : all.layer(0).weights.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(prune_to_fraction(net, scores, 1.5), ParameterError);
}

TEST_CASE("ties break by layer, row, col") {
  Network net({{2, 2, Activation::identity}});
  const std::vector<Matrix> scores{Matrix(3, 2, 1.0)};
  const Network p = prune_to_fraction(net, scores, 0.5);
  CHECK(p.layer(0).mask == Matrix{{0, 0}, {0, 1}, {1, 1}});
}

TEST_CASE("exempt biases are never pruned") {
  Rng rng(2);
  Network net({{3, 2, Activation::identity}}, rng);
  const std::vector<Matrix> scores{Matrix{{5, 6}, {7, 8}, {9, 10}, {0, 0}}};
  const Network p = prune_to_fraction(net, scores, 0.5, {true});
  CHECK(p.layer(0).mask(3, 0) == 1.0);
  CHECK(p.layer(0).mask(3, 1) == 1.0);
  CHECK(p.layer(0).mask(0, 0) == 0.0);
  CHECK(p.layer(0).mask(1, 0) == 0.0);
  CHECK(p.layer(0).mask(0, 1) == 0.0);
}

TEST_CASE("masks grow monotonically with the fraction") {
  Rng rng(3);
  const Network net({{6, 5, Activation::tanh}, {5, 3, Activation::softmax}}, rng);
  std::vector<Matrix> scores;
  for (const auto& layer : net.layers()) {
    Matrix s = test::random_matrix(layer.weights.rows(), layer.weights.cols(), rng);
    // a few ties
    s(0, 0) = s(1, 1) = 0.0;
    scores.push_back(s);
  }
  std::vector<bool> prev = masked_set(net);
  for (double f = 0.0; f <= 1.0; f += 0.05) {
    const auto cur = masked_set(prune_to_fraction(net, scores, f));
    for (std::size_t i = 0; i < cur.size(); ++i) CHECK((!prev[i] || cur[i]));
    prev = cur;
  }
}

TEST_CASE("pruned weights do not influence the output") {
  Rng rng(4);
  const Network net({{4, 3, Activation::tanh}, {3, 2, Activation::identity}}, rng);
  std::vector<Matrix> scores;
  for (const auto& layer : net.layers())
    scores.push_back(test::random_matrix(layer.weights.rows(), layer.weights.cols(), rng));
  Network p = prune_to_fraction(net, scores, 0.4);
  const Matrix x = test::random_matrix(5, 4, rng);
  const Matrix before = predict(p, x);
  for (auto& layer : p.layers())
    for (std::size_t i = 0; i < layer.weights.size(); ++i)
      if (layer.mask.data()[i] == 0.0) layer.weights.data()[i] = 1e6;
  CHECK(predict(p, x) == before);
}

TEST_CASE("fully pruned classifier outputs the uniform distribution") {
  Rng rng(5);
  const Network net({{4, 3, Activation::relu}, {3, 5, Activation::softmax}}, rng);
  std::vector<Matrix> scores;
  for (const auto& layer : net.layers()) scores.emplace_back(layer.weights.rows(), layer.weights.cols());
  const Matrix out = predict(prune_to_fraction(net, scores, 1.0), test::random_matrix(2, 4, rng));
  for (double v : out.data()) CHECK(v == doctest::Approx(0.2));
}

TEST_CASE("sweeps") {
  Rng rng(6);
  const Network net({{3, 4, Activation::tanh}, {4, 2, Activation::softmax}}, rng);
  Dataset data{test::random_matrix(40, 3, rng), Matrix(40, 2), Task::classification, Split::test};
  for (std::size_t i = 0; i < 40; ++i) data.targets(i, rng.below(2)) = 1.0;
  std::vector<LayerMoments> lm;
  for (const auto& layer : net.layers())
    lm.push_back({layer.weights, Matrix(layer.weights.rows(), layer.weights.cols(), 0.0)});
  const auto zero_sd = PosteriorMoments::from_mean_variance(lm, 10);

  const std::vector<double> only0{0.0};
  const auto c0 = sweep(net, zero_sd, {PruneRuleKind::snr, 1e-8}, only0, data, Metric::error_rate);
  CHECK(c0.points.size() == 1);
  CHECK(c0.points[0].metric_value == evaluate(net, data, Metric::error_rate));

  const std::vector<double> fr{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  const auto mag = sweep(net, zero_sd, {PruneRuleKind::magnitude, 1e-8}, fr, data, Metric::error_rate);
  const auto spr = sweep(net, zero_sd, {PruneRuleKind::spr, 1e-8}, fr, data, Metric::error_rate);
  REQUIRE(mag.points.size() == spr.points.size());
  for (std::size_t i = 0; i < fr.size(); ++i)
    CHECK(mag.points[i].metric_value == spr.points[i].metric_value);
  CHECK(mag.n_weights_total == 16 + 10);
  CHECK(mag.points[2].n_weights_pruned == 10);

  const std::vector<double> unsorted{0.5, 0.1};
  CHECK_THROWS_AS(sweep(net, zero_sd, {}, unsorted, data, Metric::error_rate), ParameterError);

  // Each point starts from the unpruned net, so order does not matter.
  const std::vector<double> just04{0.4};
  CHECK(sweep(net, zero_sd, {PruneRuleKind::magnitude, 1e-8}, just04, data, Metric::error_rate)
            .points[0]
            .metric_value == mag.points[2].metric_value);
}

TEST_CASE("breakdown fraction") {
  PruneCurve flat{"snr", "error_rate", 10, {{0.0, 1.0, 0}, {0.5, 1.0, 5}, {0.9, 1.0, 9}}};
  CHECK(breakdown_fraction(flat, 1.0, 1.5) == 0.9);
  PruneCurve step{"spr", "error_rate", 10, {{0.0, 2.0, 0}, {0.5, 2.5, 5}, {0.6, 10.0, 6}}};
  CHECK(breakdown_fraction(step, 2.0, 1.5) == 0.5);
  PruneCurve rising{"spr", "error_rate", 10, {{0.0, 1.0, 0}, {0.1, 1.1, 1}, {0.2, 1.2, 2}}};
  CHECK(breakdown_fraction(rising, 0.9, 1.0) == 0.0);
  CHECK_THROWS_AS(breakdown_fraction(PruneCurve{}, 1.0, 1.5), ParameterError);
}

TEST_CASE("curve csv") {
  PruneCurve c{"spr", "error_rate", 26, {{0.0, 0.25, 0}, {0.5, 0.375, 13}}};
  CHECK(curve_csv_header() ==
        "rule,fraction_pruned,metric_name,metric_value,n_weights_total,n_weights_pruned\n");
  CHECK(curve_csv_rows(c) == "spr,0,error_rate,0.25,26,0\nspr,0.5,error_rate,0.375,26,13\n");
  CHECK(parse_prune_rule("snr") == PruneRuleKind::snr);
  CHECK_THROWS_AS(parse_prune_rule("random"), ConfigError);
}
