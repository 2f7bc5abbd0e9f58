#include "gsmn/training.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include <fmt/format.h>

#include "gsmn/error.hpp"

namespace gsmn {

double PolyDecay::at(std::size_t t) const noexcept {
  return scale * std::pow(offset + static_cast<double>(t), -decay);
}

void PolyDecay::validate() const {
  if (!(scale >= 0.0) || !(offset > 0.0) || !(decay >= 0.0))
    throw ParameterError(fmt::format(
        "learning-rate schedule needs scale >= 0, offset > 0, decay >= 0 (got {}, {}, {})", scale,
        offset, decay));
}

namespace {

void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
}

Network run_sgd(Network net, const Matrix& x, const Matrix& y, const NoiseSpec* spec,
                const TrainOptions& options, Rng& rng, const EpochCallback& on_epoch) {
  options.lr.validate();
  if (options.batch_size == 0) throw ParameterError("batch_size must be positive");
  if (x.rows() != y.rows()) throw ShapeError("training features and targets disagree in rows");
  if (x.cols() != net.input_dim() || y.cols() != net.output_dim())
    throw ShapeError(fmt::format("training data {} / {} incompatible with network {} -> {}",
                                 x.shape_string(), y.shape_string(), net.input_dim(),
                                 net.output_dim()));
  if (options.epochs == 0) return net;

  net.apply_masks();
  const LossKind loss_kind = options.loss.value_or(net.default_loss());
  std::optional<PriorTerm> prior;
  if (options.prior_sigma0) prior = PriorTerm{*options.prior_sigma0, x.rows()};
  const auto dims = net.input_dims();

  std::vector<std::size_t> order(x.rows());
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    const double lr = options.lr.at(epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const Matrix xb = gather_rows(x, idx);
      const Matrix yb = gather_rows(y, idx);

      std::optional<LambdaField> field;
      if (spec) field = sample_lambda_field(*spec, dims, rng, xb.rows());
      const LambdaField* lam = field ? &*field : nullptr;

      LossAndGradients step;
      try {
        step = loss_and_gradients(net, xb, yb, lam, loss_kind, prior);
      } catch (const NumericError& e) {
        throw DivergenceError(fmt::format("training diverged in epoch {}: {}", epoch, e.what()),
                              epoch);
      }
      const auto& [batch_loss, grads] = step;
      if (!std::isfinite(batch_loss))
        throw DivergenceError(fmt::format("training diverged in epoch {}", epoch), epoch);
      loss_sum += batch_loss;
      ++batches;

      for (std::size_t l = 0; l < net.depth(); ++l) {
        auto w = net.layer(l).weights.data();
        auto g = grads[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
      }
    }
    for (const auto& layer : net.layers())
      if (!layer.weights.all_finite())
        throw DivergenceError(fmt::format("training diverged in epoch {}", epoch), epoch);
    if (on_epoch) on_epoch(net, EpochReport{epoch, loss_sum / static_cast<double>(batches)});
  }
  return net;
}

}  // namespace

Network train_mn(Network net, const Dataset& data, const NoiseSpec& spec,
                 const TrainOptions& options, Rng& rng, const EpochCallback& on_epoch) {
  return run_sgd(std::move(net), data.features, data.targets, &spec, options, rng, on_epoch);
}

Network train_plain(Network net, const Matrix& x, const Matrix& y, const TrainOptions& options,
                    Rng& rng, const EpochCallback& on_epoch) {
  return run_sgd(std::move(net), x, y, nullptr, options, rng, on_epoch);
}

}  // namespace gsmn
