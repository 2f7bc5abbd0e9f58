#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "gsmn/dataset.hpp"
#include "gsmn/network.hpp"
#include "gsmn/noise.hpp"
#include "gsmn/rng.hpp"

namespace gsmn {

// lr_t = scale * (offset + t)^(-decay)
struct PolyDecay {
  double scale = 0.1;
  double offset = 1.0;
  double decay = 0.55;

  double at(std::size_t t) const noexcept;
  void validate() const;
};

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  // Decays once per epoch.
  PolyDecay lr{};
  std::optional<double> prior_sigma0;
  std::optional<LossKind> loss;
};

struct EpochReport {
  std::size_t epoch;
  double train_loss;
};

using EpochCallback = std::function<void(const Network&, const EpochReport&)>;

// Minibatch SGD on the Monte Carlo multiplicative-noise loss. Every example in
// a minibatch gets its own freshly sampled lambda per layer input unit.
Network train_mn(Network net, const Dataset& data, const NoiseSpec& spec,
                 const TrainOptions& options, Rng& rng, const EpochCallback& on_epoch = {});

// Same loop without noise; used for distillation students and no-noise controls.
Network train_plain(Network net, const Matrix& x, const Matrix& y, const TrainOptions& options,
                    Rng& rng, const EpochCallback& on_epoch = {});

}  // namespace gsmn
