#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gsmn/matrix.hpp"
#include "gsmn/rng.hpp"

namespace gsmn {

class Network;

namespace noise {
struct Constant {
  double value = 1.0;
};
struct Bernoulli {
  double keep_prob = 0.5;
};
struct Gaussian {
  double mean = 1.0;
  double sd = 0.0;
};
struct Beta {
  double alpha = 1.0;
  double beta = 1.0;
};
}  // namespace noise

struct Moments {
  double mean;
  double variance;
};

// Distribution p(lambda) of the multiplicative noise. Construction validates
// parameters, so every NoiseSpec in existence is well formed.
class NoiseSpec {
 public:
  using Kind = std::variant<noise::Constant, noise::Bernoulli, noise::Gaussian, noise::Beta>;

  NoiseSpec() : NoiseSpec(noise::Constant{1.0}) {}
  NoiseSpec(Kind kind);  // NOLINT(google-explicit-constructor)

  static NoiseSpec constant(double c) { return NoiseSpec(noise::Constant{c}); }
  static NoiseSpec bernoulli(double keep_prob) { return NoiseSpec(noise::Bernoulli{keep_prob}); }
  static NoiseSpec gaussian(double mean, double sd) { return NoiseSpec(noise::Gaussian{mean, sd}); }
  static NoiseSpec beta(double alpha, double beta) { return NoiseSpec(noise::Beta{alpha, beta}); }

  const Kind& kind() const noexcept { return kind_; }
  std::string name() const;
  bool is_discrete() const noexcept;

  double mean() const noexcept;
  double variance() const noexcept;
  // E[lambda^k] for k <= 4.
  double raw_moment(int k) const;

  double draw(Rng& rng) const noexcept;

  // d/dlambda log p(lambda); zero for degenerate or discrete distributions.
  double log_density_gradient(double lambda) const noexcept;

 private:
  Kind kind_;
};

Moments analytic_moments(const NoiseSpec& spec) noexcept;

std::vector<double> draw(const NoiseSpec& spec, Rng& rng, std::size_t n);

// One lambda per (layer, input unit) and per example row. Each layer's matrix
// is rows x (in_dim + 1); the trailing bias column is always exactly 1.
struct LambdaField {
  std::vector<Matrix> layers;
};

LambdaField sample_lambda_field(const NoiseSpec& spec, std::span<const std::size_t> layer_input_dims,
                                Rng& rng, std::size_t rows = 1);

// Test-time bias correction: scales every non-bias weight row by `factor`
// (E[lambda] unless overridden).
Network expectation_correction(const Network& net, const NoiseSpec& spec,
                               std::optional<double> factor_override = std::nullopt);

void to_json(nlohmann::json& j, const NoiseSpec& spec);
void from_json(const nlohmann::json& j, NoiseSpec& spec);

}  // namespace gsmn
