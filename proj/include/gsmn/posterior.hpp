#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gsmn/dataset.hpp"
#include "gsmn/gsm.hpp"
#include "gsmn/network.hpp"
#include "gsmn/rng.hpp"
#include "gsmn/training.hpp"

namespace gsmn {

// Streaming (Welford) per-weight mean and sum of squared deviations.
class PosteriorMoments {
 public:
  PosteriorMoments() = default;
  explicit PosteriorMoments(const Network& shape_like);

  // Rebuild from stored means and (n - 1)-normalized variances.
  static PosteriorMoments from_mean_variance(std::vector<LayerMoments> layers, std::uint64_t count);

  void add(const Network& sample);
  // Pairwise combination of two independent accumulators over the same shapes.
  void merge(const PosteriorMoments& other);

  std::uint64_t count() const noexcept { return count_; }
  std::size_t depth() const noexcept { return mean_.size(); }
  const Matrix& mean(std::size_t layer) const { return mean_.at(layer); }
  const Matrix& m2(std::size_t layer) const { return m2_.at(layer); }
  // M2 / (n - 1); requires n >= 2.
  Matrix variance(std::size_t layer) const;
  Matrix stddev(std::size_t layer) const;
  std::vector<LayerMoments> layer_moments() const;

  // Throws ShapeError unless every layer matches the network's weight shapes.
  void require_matches(const Network& net) const;

 private:
  std::uint64_t count_ = 0;
  std::vector<Matrix> mean_;
  std::vector<Matrix> m2_;
};

// Binary layout: "GSMM", u32 version, u64 sample count, u32 layer count, per
// layer u32 rows, u32 cols, then per weight (f64 mean, f64 variance), little-endian.
void save_moments(const PosteriorMoments& moments, const std::filesystem::path& path);
PosteriorMoments load_moments(const std::filesystem::path& path);

struct SgldConfig {
  PolyDecay lr{1e-5, 1.0, 0.0};
  // Injected noise variance is noise_variance_scale * lr_t. With the update
  // w -= lr * grad(U), a scale of 2 targets the exact posterior exp(-U).
  double noise_variance_scale = 0.5;
  double prior_sigma0 = 1.0;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::size_t n_samples = 1000;
  std::size_t batch_size = 100;

  void validate() const;
};

// w <- w - lr * grad + sqrt(noise_variance_scale * lr) * N(0, 1), skipping
// entries whose mask is 0.
void langevin_update(std::span<double> weights, std::span<const double> grad,
                     std::span<const double> mask, double lr, double noise_variance_scale,
                     Rng& rng);

// One step on U = n_total * mean minibatch NLL + sum w^2 / (2 sigma0^2), with
// no multiplicative noise in the forward pass.
Network sgld_step(const Network& net, const Matrix& x_batch, const Matrix& y_batch,
                  const SgldConfig& cfg, std::size_t step_index, std::size_t n_total, Rng& rng,
                  std::optional<LossKind> loss = std::nullopt);

struct SgldRun {
  PosteriorMoments moments;
  Network final_net;
};

using SampleCallback = std::function<void(const Network&)>;

SgldRun collect_moments(const Network& net, const Dataset& data, const SgldConfig& cfg, Rng& rng,
                        const SampleCallback& on_sample = {},
                        std::optional<LossKind> loss = std::nullopt);

}  // namespace gsmn
