#include "gsmn/noise.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gsmn/error.hpp"
#include "gsmn/network.hpp"

namespace gsmn {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate(const NoiseSpec::Kind& kind) {
  std::visit(overloaded{
                 [](const noise::Constant& c) {
                   if (!std::isfinite(c.value))
                     throw ParameterError("constant noise value must be finite");
                 },
                 [](const noise::Bernoulli& b) {
                   if (!(b.keep_prob > 0.0 && b.keep_prob <= 1.0))
                     throw ParameterError(fmt::format(
                         "bernoulli keep_prob must lie in (0, 1], got {}", b.keep_prob));
                 },
                 [](const noise::Gaussian& g) {
                   if (!std::isfinite(g.mean) || !(g.sd >= 0.0) || !std::isfinite(g.sd))
                     throw ParameterError(fmt::format(
                         "gaussian noise needs finite mean and sd >= 0, got ({}, {})", g.mean,
                         g.sd));
                 },
                 [](const noise::Beta& b) {
                   if (!(b.alpha > 0.0 && b.beta > 0.0) || !std::isfinite(b.alpha) ||
                       !std::isfinite(b.beta))
                     throw ParameterError(fmt::format(
                         "beta noise needs alpha > 0 and beta > 0, got ({}, {})", b.alpha,
                         b.beta));
                 },
             },
             kind);
}

}  // namespace

NoiseSpec::NoiseSpec(Kind kind) : kind_(kind) { validate(kind_); }

std::string NoiseSpec::name() const {
  return std::visit(
      overloaded{
          [](const noise::Constant& c) { return fmt::format("constant({})", c.value); },
          [](const noise::Bernoulli& b) { return fmt::format("bernoulli({})", b.keep_prob); },
          [](const noise::Gaussian& g) { return fmt::format("gaussian({}, {})", g.mean, g.sd); },
          [](const noise::Beta& b) { return fmt::format("beta({}, {})", b.alpha, b.beta); },
      },
      kind_);
}

bool NoiseSpec::is_discrete() const noexcept {
  return std::holds_alternative<noise::Bernoulli>(kind_);
}

double NoiseSpec::mean() const noexcept { return raw_moment(1); }

double NoiseSpec::variance() const noexcept {
  const double m = raw_moment(1);
  return std::max(0.0, raw_moment(2) - m * m);
}

double NoiseSpec::raw_moment(int k) const {
  if (k < 0 || k > 4) throw ParameterError("raw_moment supports orders 0..4");
  if (k == 0) return 1.0;
  return std::visit(
      overloaded{
          [k](const noise::Constant& c) { return std::pow(c.value, k); },
          [](const noise::Bernoulli& b) { return b.keep_prob; },
          [k](const noise::Gaussian& g) {
            const double m = g.mean, s2 = g.sd * g.sd;
            switch (k) {
              case 1: return m;
              case 2: return m * m + s2;
              case 3: return m * m * m + 3.0 * m * s2;
              default: return m * m * m * m + 6.0 * m * m * s2 + 3.0 * s2 * s2;
            }
          },
          [k](const noise::Beta& b) {
            double acc = 1.0;
            for (int r = 0; r < k; ++r) acc *= (b.alpha + r) / (b.alpha + b.beta + r);
            return acc;
          },
      },
      kind_);
}

double NoiseSpec::draw(Rng& rng) const noexcept {
  return std::visit(
      overloaded{
          [](const noise::Constant& c) { return c.value; },
          [&rng](const noise::Bernoulli& b) { return rng.bernoulli(b.keep_prob) ? 1.0 : 0.0; },
          [&rng](const noise::Gaussian& g) { return g.mean + g.sd * rng.normal(); },
          [&rng](const noise::Beta& b) { return rng.beta(b.alpha, b.beta); },
      },
      kind_);
}

double NoiseSpec::log_density_gradient(double lambda) const noexcept {
  return std::visit(
      overloaded{
          [](const noise::Constant&) { return 0.0; },
          [](const noise::Bernoulli&) { return 0.0; },
          [lambda](const noise::Gaussian& g) {
            return g.sd > 0.0 ? -(lambda - g.mean) / (g.sd * g.sd) : 0.0;
          },
          [lambda](const noise::Beta& b) {
            const double x = std::clamp(lambda, 1e-12, 1.0 - 1e-12);
            return (b.alpha - 1.0) / x - (b.beta - 1.0) / (1.0 - x);
          },
      },
      kind_);
}

Moments analytic_moments(const NoiseSpec& spec) noexcept {
  return {spec.mean(), spec.variance()};
}

std::vector<double> draw(const NoiseSpec& spec, Rng& rng, std::size_t n) {
  if (n == 0) throw ParameterError("draw: n must be at least 1");
  std::vector<double> out(n);
  for (auto& v : out) v = spec.draw(rng);
  return out;
}

LambdaField sample_lambda_field(const NoiseSpec& spec, std::span<const std::size_t> layer_input_dims,
                                Rng& rng, std::size_t rows) {
  LambdaField field;
  field.layers.reserve(layer_input_dims.size());
  for (std::size_t dim : layer_input_dims) {
    if (dim == 0) throw ShapeError("sample_lambda_field: layer input dims must be positive");
    Matrix m(rows, dim + 1);
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = m.row(r);
      for (std::size_t j = 0; j < dim; ++j) row[j] = spec.draw(rng);
      row[dim] = 1.0;
    }
    field.layers.push_back(std::move(m));
  }
  return field;
}

Network expectation_correction(const Network& net, const NoiseSpec& spec,
                               std::optional<double> factor_override) {
  const double factor = factor_override.value_or(spec.mean());
  if (factor == 0.0) {
    throw NumericError(
        fmt::format("expectation correction is degenerate: noise {} has zero mean", spec.name()));
  }
  Network out = net;
  for (auto& layer : out.layers()) {
    const std::size_t bias_row = layer.spec.in_dim;
    for (std::size_t r = 0; r < bias_row; ++r)
      for (double& w : layer.weights.row(r)) w *= factor;
  }
  return out;
}

void to_json(nlohmann::json& j, const NoiseSpec& spec) {
  std::visit(overloaded{
                 [&j](const noise::Constant& c) { j = {{"kind", "constant"}, {"value", c.value}}; },
                 [&j](const noise::Bernoulli& b) {
                   j = {{"kind", "bernoulli"}, {"keep_prob", b.keep_prob}};
                 },
                 [&j](const noise::Gaussian& g) {
                   j = {{"kind", "gaussian"}, {"mean", g.mean}, {"sd", g.sd}};
                 },
                 [&j](const noise::Beta& b) {
                   j = {{"kind", "beta"}, {"alpha", b.alpha}, {"beta", b.beta}};
                 },
             },
             spec.kind());
}

void from_json(const nlohmann::json& j, NoiseSpec& spec) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("noise spec needs a \"kind\" field");
  const auto kind = j.at("kind").get<std::string>();
  auto expect_keys = [&j, &kind](std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : j.items()) {
      if (key == "kind") continue;
      if (std::none_of(allowed.begin(), allowed.end(), [&key](const char* a) { return key == a; }))
        throw ConfigError(fmt::format("unknown key \"{}\" in {} noise spec", key, kind));
    }
  };
  auto number = [&j](const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
  };
  if (kind == "constant") {
    expect_keys({"value"});
    spec = NoiseSpec::constant(number("value", 1.0));
  } else if (kind == "bernoulli") {
    expect_keys({"keep_prob"});
    spec = NoiseSpec::bernoulli(number("keep_prob", 0.5));
  } else if (kind == "gaussian") {
    expect_keys({"mean", "sd"});
    spec = NoiseSpec::gaussian(number("mean", 1.0), number("sd", 0.0));
  } else if (kind == "beta") {
    expect_keys({"alpha", "beta"});
    spec = NoiseSpec::beta(number("alpha", 1.0), number("beta", 1.0));
  } else {
    throw ConfigError(fmt::format("unknown noise kind \"{}\"", kind));
  }
}

}  // namespace gsmn
