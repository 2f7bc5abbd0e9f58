#include "gsmn/posterior.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include <fmt/format.h>

#include "gsmn/error.hpp"

namespace gsmn {
namespace {

constexpr std::uint32_t kMomentsVersion = 1;

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <class T>
T take(const std::vector<std::uint8_t>& in, std::size_t& offset) {
  if (offset + sizeof(T) > in.size())
    throw FormatError(fmt::format("moments file truncated at offset {}", offset));
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  offset += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
}

}  // namespace

PosteriorMoments::PosteriorMoments(const Network& shape_like) {
  for (const auto& layer : shape_like.layers()) {
    mean_.emplace_back(layer.weights.rows(), layer.weights.cols());
    m2_.emplace_back(layer.weights.rows(), layer.weights.cols());
  }
}

PosteriorMoments PosteriorMoments::from_mean_variance(std::vector<LayerMoments> layers,
                                                      std::uint64_t count) {
  PosteriorMoments pm;
  pm.count_ = count;
  const double scale = count > 1 ? static_cast<double>(count - 1) : 0.0;
  for (auto& l : layers) {
    require_same_shape(l.mean, l.variance, "moments");
    Matrix m2 = l.variance;
    for (double& v : m2.data()) v *= scale;
    pm.mean_.push_back(std::move(l.mean));
    pm.m2_.push_back(std::move(m2));
  }
  return pm;
}

void PosteriorMoments::require_matches(const Network& net) const {
  if (net.depth() != mean_.size())
    throw ShapeError(fmt::format("moments have {} layers but the network has {}", mean_.size(),
                                 net.depth()));
  for (std::size_t l = 0; l < mean_.size(); ++l)
    require_same_shape(net.layer(l).weights, mean_[l], "network vs moments");
}

void PosteriorMoments::add(const Network& sample) {
  require_matches(sample);
  ++count_;
  const double n = static_cast<double>(count_);
  for (std::size_t l = 0; l < mean_.size(); ++l) {
    auto w = sample.layer(l).weights.data();
    auto mu = mean_[l].data();
    auto m2 = m2_[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double delta = w[i] - mu[i];
      mu[i] += delta / n;
      m2[i] += delta * (w[i] - mu[i]);
    }
  }
}

void PosteriorMoments::merge(const PosteriorMoments& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  if (other.mean_.size() != mean_.size()) throw ShapeError("merge: layer counts differ");
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  for (std::size_t l = 0; l < mean_.size(); ++l) {
    require_same_shape(mean_[l], other.mean_[l], "merge");
    auto mu = mean_[l].data();
    auto m2 = m2_[l].data();
    auto omu = other.mean_[l].data();
    auto om2 = other.m2_[l].data();
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double delta = omu[i] - mu[i];
      mu[i] += delta * nb / n;
      m2[i] += om2[i] + delta * delta * na * nb / n;
    }
  }
  count_ += other.count_;
}

Matrix PosteriorMoments::variance(std::size_t layer) const {
  if (count_ < 2) throw ParameterError("posterior variance needs at least two samples");
  Matrix v = m2_.at(layer);
  const double denom = static_cast<double>(count_ - 1);
  for (double& x : v.data()) x = std::max(0.0, x / denom);
  return v;
}

Matrix PosteriorMoments::stddev(std::size_t layer) const {
  Matrix v = variance(layer);
  for (double& x : v.data()) x = std::sqrt(x);
  return v;
}

std::vector<LayerMoments> PosteriorMoments::layer_moments() const {
  std::vector<LayerMoments> out;
  for (std::size_t l = 0; l < mean_.size(); ++l) out.push_back({mean_[l], variance(l)});
  return out;
}

void save_moments(const PosteriorMoments& moments, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes{'G', 'S', 'M', 'M'};
  put<std::uint32_t>(bytes, kMomentsVersion);
  put<std::uint64_t>(bytes, moments.count());
  put<std::uint32_t>(bytes, static_cast<std::uint32_t>(moments.depth()));
  for (std::size_t l = 0; l < moments.depth(); ++l) {
    const Matrix& mu = moments.mean(l);
    const Matrix var = moments.variance(l);
    put<std::uint32_t>(bytes, static_cast<std::uint32_t>(mu.rows()));
    put<std::uint32_t>(bytes, static_cast<std::uint32_t>(mu.cols()));
    for (std::size_t i = 0; i < mu.size(); ++i) {
      put<double>(bytes, mu.data()[i]);
      put<double>(bytes, var.data()[i]);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(fmt::format("cannot open {} for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

PosteriorMoments load_moments(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open moments file {}", path.string()));
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "GSMM", 4) != 0)
    throw FormatError("moments file: bad magic at offset 0");
  std::size_t offset = 4;
  const auto version = take<std::uint32_t>(bytes, offset);
  if (version != kMomentsVersion)
    throw FormatError(fmt::format("moments file: unsupported version {} at offset 4", version));
  const auto count = take<std::uint64_t>(bytes, offset);
  const auto depth = take<std::uint32_t>(bytes, offset);
  std::vector<LayerMoments> layers;
  for (std::uint32_t l = 0; l < depth; ++l) {
    const auto rows = take<std::uint32_t>(bytes, offset);
    const auto cols = take<std::uint32_t>(bytes, offset);
    LayerMoments lm{Matrix(rows, cols), Matrix(rows, cols)};
    for (std::size_t i = 0; i < lm.mean.size(); ++i) {
      lm.mean.data()[i] = take<double>(bytes, offset);
      lm.variance.data()[i] = take<double>(bytes, offset);
    }
    layers.push_back(std::move(lm));
  }
  if (offset != bytes.size())
    throw FormatError(fmt::format("moments file: trailing bytes at offset {}", offset));
  return PosteriorMoments::from_mean_variance(std::move(layers), count);
}

void SgldConfig::validate() const {
  lr.validate();
  if (!(noise_variance_scale >= 0.0))
    throw ParameterError("sgld noise_variance_scale must be non-negative");
  if (!(prior_sigma0 > 0.0)) throw ParameterError("sgld prior_sigma0 must be positive");
  if (thin == 0) throw ParameterError("sgld thin must be at least 1");
  if (batch_size == 0) throw ParameterError("sgld batch_size must be positive");
}

void langevin_update(std::span<double> weights, std::span<const double> grad,
                     std::span<const double> mask, double lr, double noise_variance_scale,
                     Rng& rng) {
  const double noise_sd = std::sqrt(noise_variance_scale * lr);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!mask.empty() && mask[i] == 0.0) continue;
    weights[i] += -lr * grad[i] + noise_sd * rng.normal();
  }
}

Network sgld_step(const Network& net, const Matrix& x_batch, const Matrix& y_batch,
                  const SgldConfig& cfg, std::size_t step_index, std::size_t n_total, Rng& rng,
                  std::optional<LossKind> loss) {
  const double lr = cfg.lr.at(step_index);
  if (lr == 0.0) return net;
  const auto grads = backprop(net, x_batch, y_batch, nullptr, loss.value_or(net.default_loss()),
                              PriorTerm{cfg.prior_sigma0, n_total});
  Network next = net;
  const double n = static_cast<double>(n_total);
  std::vector<double> scaled;
  for (std::size_t l = 0; l < next.depth(); ++l) {
    auto g = grads[l].data();
    scaled.assign(g.begin(), g.end());
    for (double& v : scaled) v *= n;
    Layer& layer = next.layer(l);
    langevin_update(layer.weights.data(), scaled, layer.mask.data(), lr, cfg.noise_variance_scale,
                    rng);
    if (!layer.weights.all_finite())
      throw DivergenceError(fmt::format("sampler diverged at step {}", step_index), step_index);
  }
  return next;
}

SgldRun collect_moments(const Network& net, const Dataset& data, const SgldConfig& cfg, Rng& rng,
                        const SampleCallback& on_sample, std::optional<LossKind> loss) {
  cfg.validate();
  if (cfg.n_samples < 2)
    throw ParameterError("collect_moments needs n_samples >= 2 for a variance estimate");
  if (data.size() == 0) throw ParameterError("collect_moments: empty dataset");

  SgldRun run{PosteriorMoments(net), net};
  run.final_net.apply_masks();
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();

  const std::size_t total_steps = cfg.burn_in + cfg.n_samples * cfg.thin;
  for (std::size_t step = 0; step < total_steps; ++step) {
    if (cursor + cfg.batch_size > order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle(order, rng);
      cursor = 0;
    }
    const std::size_t end = std::min(order.size(), cursor + cfg.batch_size);
    std::span<const std::size_t> idx(order.data() + cursor, end - cursor);
    cursor = end;
    const Matrix xb = gather_rows(data.features, idx);
    const Matrix yb = gather_rows(data.targets, idx);
    run.final_net = sgld_step(run.final_net, xb, yb, cfg, step, data.size(), rng, loss);

    if (step >= cfg.burn_in && (step - cfg.burn_in + 1) % cfg.thin == 0) {
      run.moments.add(run.final_net);
      if (on_sample) on_sample(run.final_net);
    }
  }
  return run;
}

}  // namespace gsmn
