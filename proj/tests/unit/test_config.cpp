#include <doctest.h>

#include <fstream>

#include "gsmn/config.hpp"
#include "gsmn/error.hpp"
#include "support.hpp"

using namespace gsmn;
using nlohmann::json;

TEST_CASE("minimal config") {
  const auto cfg = parse_config(json{{"seed", 5}});
  CHECK(cfg.seed == 5);
  CHECK(cfg.dataset.kind.empty());
  CHECK(cfg.noise.name() == NoiseSpec::constant(1.0).name());
  CHECK_THROWS_AS(load_experiment_data(cfg), ConfigError);
}

TEST_CASE("seed is mandatory") {
  CHECK_THROWS_AS(parse_config(json::object()), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"output_dir", "x"}}), ConfigError);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"sede", 2}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"training", {{"epoch", 3}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"sgld", {{"lr", {{"scale", 1e-4}, {"x", 1}}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"noise", {{"kind", "bernoulli"}, {"p", 0.5}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"dataset", {{"kind", "mnist2"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"training", {{"epochs", "ten"}}}}), ConfigError);
}

TEST_CASE("invalid noise parameters") {
  auto noise = [](json spec) { return parse_config(json{{"seed", 1}, {"noise", spec}}); };
  CHECK_THROWS_AS(noise({{"kind", "bernoulli"}, {"keep_prob", 0.0}}), ParameterError);
  CHECK_THROWS_AS(noise({{"kind", "bernoulli"}, {"keep_prob", 1.5}}), ParameterError);
  CHECK_THROWS_AS(noise({{"kind", "beta"}, {"alpha", -1.0}, {"beta", 1.0}}), ParameterError);
  CHECK_THROWS_AS(noise({{"kind", "gaussian"}, {"mean", 1.0}, {"sd", -0.5}}), ParameterError);
  const auto ok = noise({{"kind", "gaussian"}, {"mean", 1.0}, {"sd", 0.5}, {"correction_factor", 2.0}});
  CHECK(ok.noise.name() == NoiseSpec::gaussian(1.0, 0.5).name());
  CHECK(ok.noise_correction_factor == 2.0);
}

TEST_CASE("relative paths resolve against the config file") {
  test::TempDir dir("config_paths");
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "c.json")
      << R"({"seed": 3, "output_dir": "../out", "dataset": {"kind": "csv",
           "train_path": "tr.csv", "test_path": "/abs/te.csv", "target_column": "y"}})";
  const auto cfg = load_config(dir / "sub" / "c.json");
  CHECK(cfg.output_dir == dir / "sub" / "../out");
  CHECK(cfg.dataset.train_path == dir / "sub" / "tr.csv");
  CHECK(cfg.dataset.test_path == "/abs/te.csv");
  CHECK_THROWS_AS(load_config(dir / "nope.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{\"seed\": ";
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
}

TEST_CASE("section validation") {
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"pruning", {{"fractions", {0.1, 1.2}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"pruning", {{"weights", "mean"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"pruning", {{"rules", {"random"}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"training", {{"batch_size", 0}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"distill", {{"temperature", 0.0}}}}),
                  ParameterError);
  CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"dataset", {{"kind", "csv"}}}}), ConfigError);
}

TEST_CASE("synthetic data splits and network dims") {
  const auto cfg = parse_config(json{
      {"seed", 2},
      {"dataset", {{"kind", "two_blobs"}, {"n_train", 40}, {"n_validation", 10}, {"n_test", 20}}},
      {"network", {{"hidden", {5, 3}}}}});
  const auto data = load_experiment_data(cfg);
  CHECK(data.train.size() == 40);
  REQUIRE(data.validation);
  CHECK(data.validation->size() == 10);
  CHECK(data.test.size() == 20);
  CHECK(network_dims(cfg, data) == std::vector<std::size_t>{2, 5, 3, 2});
  CHECK(output_activation(cfg, Task::classification) == Activation::softmax);
  CHECK(output_activation(cfg, Task::regression) == Activation::identity);
  CHECK(load_experiment_data(cfg).train.features == data.train.features);
}

TEST_CASE("shipped configs parse") {
  for (const char* name : {"verify.json", "mnist_desk.json"})
    CHECK_NOTHROW(load_config(std::filesystem::path(GSMN_SOURCE_DIR) / "configs" / name));
}
