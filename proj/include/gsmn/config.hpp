#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsmn/dataset.hpp"
#include "gsmn/distill.hpp"
#include "gsmn/gsm.hpp"
#include "gsmn/network.hpp"
#include "gsmn/noise.hpp"
#include "gsmn/posterior.hpp"
#include "gsmn/pruning.hpp"
#include "gsmn/training.hpp"
#include "gsmn/verification.hpp"

namespace gsmn {

struct DatasetConfig {
  std::string kind;  // mnist | csv | two_blobs | sparse_regression

  // mnist: rows are taken in file order. Train = [0, train_limit),
  // validation = [train_limit, train_limit + validation_limit) of the training
  // files, test = [0, test_limit) of the test files.
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::size_t train_limit = 10000;
  std::size_t validation_limit = 0;
  std::size_t test_limit = 2000;

  // csv: the last validation_count rows of the training file form the
  // validation split; features are standardized with training statistics.
  std::filesystem::path train_path, test_path;
  std::string target_column;
  Task task = Task::regression;
  std::size_t num_classes = 0;
  std::size_t validation_count = 0;
  bool standardize_targets = false;

  // synthetic generators
  std::size_t n_train = 200;
  std::size_t n_validation = 0;
  std::size_t n_test = 200;
  double separation = 6.0;
  std::size_t features = 20;
  std::vector<std::size_t> active;
  double w_scale = 1.0;
  double noise_sd = 0.1;
};

struct NetworkConfig {
  std::vector<std::size_t> hidden;
  Activation hidden_activation = Activation::relu;
  std::optional<Activation> output_activation;
  std::optional<LossKind> loss;
};

struct PruningConfig {
  std::vector<double> fractions;
  std::vector<PruneRuleKind> rules{PruneRuleKind::snr, PruneRuleKind::spr,
                                   PruneRuleKind::magnitude};
  double snr_sigma_floor = 1e-8;
  bool exempt_biases = false;
  double breakdown_multiplier = 1.5;
  // Weights that get pruned: the expectation-corrected trained network
  // ("network") or the SGLD posterior mean ("posterior_mean").
  std::string weights = "network";
};

struct DistillSettings {
  std::vector<double> budgets;
  double temperature = 1.0;
  TrainOptions train{};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  DatasetConfig dataset;
  NetworkConfig network;
  NoiseSpec noise = NoiseSpec::constant(1.0);
  std::optional<double> noise_correction_factor;
  TrainOptions training{};
  SgldConfig sgld{};
  GsmConfig gsm{};
  PruningConfig pruning{};
  DistillSettings distill{};
  VerifyConfig verify{};
};

// Relative paths are resolved against base_dir. Unknown keys and a missing
// seed raise ConfigError before anything is computed.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct ExperimentData {
  Dataset train;
  std::optional<Dataset> validation;
  Dataset test;
};

ExperimentData load_experiment_data(const ExperimentConfig& cfg);

std::vector<std::size_t> network_dims(const ExperimentConfig& cfg, const ExperimentData& data);
Activation output_activation(const ExperimentConfig& cfg, Task task);
Metric metric_for(Task task);

}  // namespace gsmn
