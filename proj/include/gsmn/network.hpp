#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsmn/matrix.hpp"
#include "gsmn/noise.hpp"
#include "gsmn/rng.hpp"

namespace gsmn {

enum class Activation : std::uint8_t { identity = 0, sigmoid = 1, tanh = 2, relu = 3, softmax = 4 };
enum class LossKind { cross_entropy, squared_error };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);
std::string to_string(LossKind k);
LossKind parse_loss(const std::string& name);

struct LayerSpec {
  std::size_t in_dim;
  std::size_t out_dim;
  Activation activation;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Weights are (in_dim + 1) x out_dim with the bias in the last row. The
// effective weight is always weights (*) mask.
struct Layer {
  LayerSpec spec;
  Matrix weights;
  Matrix mask;

  friend bool operator==(const Layer&, const Layer&) = default;
};

class Network {
 public:
  Network() = default;
  // Glorot-uniform initialization on +-sqrt(6 / (in + out)); bias rows start at 0.
  Network(std::vector<LayerSpec> specs, Rng& rng);
  // Zero weights, all-ones masks.
  explicit Network(std::vector<LayerSpec> specs);

  static Network from_dims(std::span<const std::size_t> dims, Activation hidden, Activation output,
                           Rng& rng);

  std::size_t depth() const noexcept { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().spec.in_dim; }
  std::size_t output_dim() const { return layers_.back().spec.out_dim; }
  std::vector<std::size_t> input_dims() const;
  std::size_t weight_count() const noexcept;

  const Layer& layer(std::size_t l) const { return layers_.at(l); }
  Layer& layer(std::size_t l) { return layers_.at(l); }
  std::span<const Layer> layers() const noexcept { return layers_; }
  std::span<Layer> layers() noexcept { return layers_; }

  // Loss implied by the output activation: softmax/sigmoid -> cross entropy.
  LossKind default_loss() const noexcept;

  // Zeroes weights wherever the mask is zero.
  void apply_masks() noexcept;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  void validate() const;

  std::vector<Layer> layers_;
};

// Activations h_0 = x, h_1, ..., h_L; the last entry is the prediction.
std::vector<Matrix> forward(const Network& net, const Matrix& x,
                            const LambdaField* lambdas = nullptr);
Matrix predict(const Network& net, const Matrix& x);
// Output-layer pre-activations without noise.
Matrix output_logits(const Network& net, const Matrix& x);

inline constexpr double kProbabilityClamp = 1e-12;

// Mean loss over the batch. Squared error is 0.5 * sum_k (pred - target)^2 per row.
double loss(const Matrix& pred, const Matrix& target, LossKind kind);

// Gradient of mean NLL (+ sum w^2 / (2 sigma0^2 n_total) when a prior is given)
// with respect to each layer's weights. Masked weights get exactly zero.
struct PriorTerm {
  double sigma0;
  std::size_t n_total;
};
std::vector<Matrix> backprop(const Network& net, const Matrix& x, const Matrix& y,
                             const LambdaField* lambdas, LossKind loss_kind,
                             std::optional<PriorTerm> prior = std::nullopt);

// Mean NLL of the same (possibly noisy) forward pass alongside the gradients.
struct LossAndGradients {
  double loss;
  std::vector<Matrix> gradients;
};
LossAndGradients loss_and_gradients(const Network& net, const Matrix& x, const Matrix& y,
                                    const LambdaField* lambdas, LossKind loss_kind,
                                    std::optional<PriorTerm> prior = std::nullopt);

double classification_error(const Network& net, const Matrix& x, const Matrix& y);
double accuracy(const Network& net, const Matrix& x, const Matrix& y);
double rmse(const Network& net, const Matrix& x, const Matrix& y);

// Binary layout: "GSMN", u32 version, u32 layer count, then per layer
// u32 in, u32 out, u8 activation, weights and mask as little-endian f64.
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_network(const Network& net);
Network deserialize_network(std::span<const std::uint8_t> bytes);

}  // namespace gsmn
