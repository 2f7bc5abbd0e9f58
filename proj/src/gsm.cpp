#include "gsmn/gsm.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gsmn/error.hpp"

namespace gsmn {
namespace {

void check_linear_dims(const Matrix& x, std::span<const double> w, const char* context) {
  if (x.cols() != w.size())
    throw ShapeError(fmt::format("{}: X is {} but w has {} entries", context, x.shape_string(),
                                 w.size()));
}

void check_targets(const Matrix& x, std::span<const double> y, const char* context) {
  if (x.rows() != y.size())
    throw ShapeError(fmt::format("{}: X is {} but y has {} entries", context, x.shape_string(),
                                 y.size()));
}

// log(1 + e^z) without overflow.
double softplus(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logistic(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Running mean and variance of per-draw totals.
struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double v) noexcept {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  MonteCarloEstimate estimate() const noexcept {
    const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n)), n};
  }
};

void check_moment_shapes(std::span<const Matrix> weights, std::span<const LayerMoments> moments,
                         const char* context) {
  if (weights.size() != moments.size())
    throw ShapeError(fmt::format("{}: {} weight layers but {} moment layers", context,
                                 weights.size(), moments.size()));
  for (std::size_t l = 0; l < weights.size(); ++l) {
    require_same_shape(weights[l], moments[l].mean, context);
    require_same_shape(weights[l], moments[l].variance, context);
  }
}

}  // namespace

void GsmConfig::validate() const {
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0))
    throw ParameterError(fmt::format("sigma0 must be positive, got {}", sigma0));
  if (!(lambda_floor > 0.0) || !std::isfinite(lambda_floor))
    throw ParameterError(fmt::format("lambda_floor must be positive, got {}", lambda_floor));
}

RowMoments row_moments(const LayerMoments& layer, std::size_t row) {
  auto m = layer.mean.row(row);
  auto v = layer.variance.row(row);
  return {{m.begin(), m.end()}, {v.begin(), v.end()}};
}

double penalty_linear_mn(const Matrix& x, std::span<const double> w, const NoiseSpec& spec) {
  check_linear_dims(x, w, "penalty_linear_mn");
  double acc = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) col += x(i, j) * x(i, j);
    acc += w[j] * w[j] * col;
  }
  return 0.5 * spec.variance() * acc;
}

double loss_linear_mn_closed_form(const Matrix& x, std::span<const double> y,
                                  std::span<const double> w, const NoiseSpec& spec) {
  check_linear_dims(x, w, "loss_linear_mn_closed_form");
  check_targets(x, y, "loss_linear_mn_closed_form");
  const double m = spec.mean();
  double rss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) pred += x(i, j) * w[j];
    const double r = y[i] - m * pred;
    rss += r * r;
  }
  return 0.5 * rss + penalty_linear_mn(x, w, spec);
}

double logistic_nll(const Matrix& x, std::span<const double> y, std::span<const double> w,
                    double logit_scale) {
  check_linear_dims(x, w, "logistic_nll");
  check_targets(x, y, "logistic_nll");
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) z += x(i, j) * w[j];
    z *= logit_scale;
    total += softplus(z) - y[i] * z;
  }
  return total;
}

double loss_logistic_mn_approx(const Matrix& x, std::span<const double> y,
                               std::span<const double> w, const NoiseSpec& spec) {
  const double m = spec.mean();
  const double nll = logistic_nll(x, y, w, m);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) z += x(i, j) * w[j];
    const double f = logistic(m * z);
    const double curvature = f * (1.0 - f);
    for (std::size_t j = 0; j < w.size(); ++j) acc += curvature * w[j] * w[j] * x(i, j) * x(i, j);
  }
  return nll + 0.5 * spec.variance() * acc;
}

MonteCarloEstimate monte_carlo_linear_mn(const Matrix& x, std::span<const double> y,
                                         std::span<const double> w, const NoiseSpec& spec,
                                         std::size_t draws, Rng& rng) {
  check_linear_dims(x, w, "monte_carlo_linear_mn");
  check_targets(x, y, "monte_carlo_linear_mn");
  Welford acc;
  for (std::size_t t = 0; t < draws; ++t) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double pred = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) pred += x(i, j) * spec.draw(rng) * w[j];
      total += 0.5 * (y[i] - pred) * (y[i] - pred);
    }
    acc.add(total);
  }
  return acc.estimate();
}

MonteCarloEstimate monte_carlo_logistic_mn(const Matrix& x, std::span<const double> y,
                                           std::span<const double> w, const NoiseSpec& spec,
                                           std::size_t draws, Rng& rng) {
  check_linear_dims(x, w, "monte_carlo_logistic_mn");
  check_targets(x, y, "monte_carlo_logistic_mn");
  Welford acc;
  for (std::size_t t = 0; t < draws; ++t) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) z += x(i, j) * spec.draw(rng) * w[j];
      total += softplus(z) - y[i] * z;
    }
    acc.add(total);
  }
  return acc.estimate();
}

std::vector<double> gsm_sample_product(const NoiseSpec& spec, double sigma0, std::size_t n,
                                       Rng& rng) {
  if (n == 0) throw ParameterError("gsm_sample_product: n must be at least 1");
  std::vector<double> out(n);
  for (auto& v : out) {
    const double lambda = spec.draw(rng);
    const double w = sigma0 * rng.normal();
    v = lambda * w;
  }
  return out;
}

std::vector<double> gsm_sample_hierarchical(const NoiseSpec& spec, double sigma0, std::size_t n,
                                            Rng& rng) {
  if (n == 0) throw ParameterError("gsm_sample_hierarchical: n must be at least 1");
  std::vector<double> out(n);
  for (auto& v : out) {
    const double lambda = spec.draw(rng);
    const double sd = sigma0 * std::abs(lambda);
    v = sd * rng.normal();
  }
  return out;
}

double gsm_second_moment(const NoiseSpec& spec, double sigma0) {
  return sigma0 * sigma0 * spec.raw_moment(2);
}

double gsm_fourth_moment(const NoiseSpec& spec, double sigma0) {
  const double s2 = sigma0 * sigma0;
  return 3.0 * s2 * s2 * spec.raw_moment(4);
}

SampleStats sample_stats(std::span<const double> xs) {
  if (xs.empty()) throw ParameterError("sample_stats: empty sample");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : xs) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  return {mean, m2, m3, m4, m2 > 0.0 ? m4 / (m2 * m2) : 0.0};
}

double ecdf_sup_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ParameterError("ecdf_sup_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double sup = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == t) ++i;
    while (j < b.size() && b[j] == t) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return sup;
}

double em_m_step(const RowMoments& row, const GsmConfig& cfg, const LogPriorGradient& log_prior_grad,
                 double current_lambda) {
  if (row.mean.empty() || row.mean.size() != row.variance.size())
    throw ParameterError("em_m_step: row moments must be non-empty and of equal length");
  const double d = static_cast<double>(row.mean.size());
  double signal = 0.0;
  double spread = 0.0;
  for (std::size_t k = 0; k < row.mean.size(); ++k) {
    signal += row.mean[k] * row.mean[k];
    spread += row.variance[k];
  }
  double lambda_sq = signal / d + spread / d;
  if (log_prior_grad) lambda_sq += log_prior_grad(current_lambda);
  return std::max(lambda_sq, cfg.lambda_floor);
}

LinearPosterior linear_gaussian_posterior(const Matrix& x, std::span<const double> y,
                                          double obs_noise_var,
                                          std::span<const double> prior_variances) {
  const std::size_t d = x.cols();
  if (prior_variances.size() != d || y.size() != x.rows())
    throw ShapeError("linear_gaussian_posterior: dimension mismatch");
  if (!(obs_noise_var > 0.0)) throw ParameterError("observation noise variance must be positive");

  Matrix precision = matmul_tn(x, x);
  for (double& v : precision.data()) v /= obs_noise_var;
  for (std::size_t j = 0; j < d; ++j) {
    const double pv = prior_variances[j];
    if (!(pv > 0.0) || !std::isfinite(pv))
      throw NumericError(fmt::format("posterior precision is singular: prior variance {} at {}",
                                     pv, j));
    precision(j, j) += 1.0 / pv;
  }

  // Cholesky: precision = L L^T.
  Matrix chol(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = precision(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= chol(i, k) * chol(j, k);
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s))
          throw NumericError("posterior precision is not positive definite");
        chol(i, i) = std::sqrt(s);
      } else {
        chol(i, j) = s / chol(j, j);
      }
    }
  }
  // Inverse via solves against the identity columns.
  Matrix cov(d, d);
  std::vector<double> z(d);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = i == c ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= chol(i, k) * z[k];
      z[i] = s / chol(i, i);
    }
    for (std::size_t i = d; i-- > 0;) {
      double s = z[i];
      for (std::size_t k = i + 1; k < d; ++k) s -= chol(k, i) * cov(k, c);
      cov(i, c) = s / chol(i, i);
    }
  }
  std::vector<double> xty(d, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) xty[j] += x(i, j) * y[i] / obs_noise_var;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[i] += cov(i, j) * xty[j];
  return {std::move(mean), std::move(cov)};
}

EmResult em_fit_linear(const Matrix& x, std::span<const double> y, double obs_noise_var,
                       const GsmConfig& cfg, std::size_t iters, const EmOptions& options) {
  cfg.validate();
  if (!(obs_noise_var > 0.0))
    throw ParameterError(fmt::format("obs_noise_var must be positive, got {}", obs_noise_var));
  if (options.noise.is_discrete())
    throw ParameterError(fmt::format(
        "EM needs a continuous noise distribution; {} is discrete (try beta(a, a) with a < 1)",
        options.noise.name()));
  check_targets(x, y, "em_fit_linear");

  const std::size_t d = x.cols();
  EmResult result{std::vector<double>(d, std::max(options.initial_lambda_sq, cfg.lambda_floor)),
                  RowMoments{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)}, 0};
  LogPriorGradient prior_grad;
  if (options.use_prior_gradient)
    prior_grad = [&spec = options.noise](double lambda) { return spec.log_density_gradient(lambda); };

  std::vector<double> prior_var(d);
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t j = 0; j < d; ++j) prior_var[j] = cfg.sigma0 * cfg.sigma0 * result.lambda_sq[j];
    const auto post = linear_gaussian_posterior(x, y, obs_noise_var, prior_var);
    for (std::size_t j = 0; j < d; ++j) {
      result.moments.mean[j] = post.mean[j];
      result.moments.variance[j] = post.covariance(j, j);
      const RowMoments single{{post.mean[j]}, {post.covariance(j, j)}};
      result.lambda_sq[j] =
          em_m_step(single, cfg, prior_grad, std::sqrt(result.lambda_sq[j]));
    }
    result.iterations = it + 1;
  }
  return result;
}

double penalty_r_gsm(std::span<const Matrix> weights, std::span<const LayerMoments> moments,
                     const GsmConfig& cfg) {
  check_moment_shapes(weights, moments, "penalty_r_gsm");
  double total = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Matrix& v = weights[l];
    const double d = static_cast<double>(v.cols());
    for (std::size_t j = 0; j < v.rows(); ++j) {
      double numer = 0.0, signal = 0.0, spread = 0.0;
      for (std::size_t k = 0; k < v.cols(); ++k) {
        numer += v(j, k) * v(j, k);
        signal += moments[l].mean(j, k) * moments[l].mean(j, k);
        spread += moments[l].variance(j, k);
      }
      total += numer / std::max(signal / d + spread / d, cfg.lambda_floor);
    }
  }
  return total / (cfg.sigma0 * cfg.sigma0);
}

double penalty_r_gsm_simplified(std::span<const Matrix> weights,
                                std::span<const LayerMoments> moments, const GsmConfig& cfg) {
  check_moment_shapes(weights, moments, "penalty_r_gsm_simplified");
  double total = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Matrix& v = weights[l];
    const double d = static_cast<double>(v.cols());
    for (std::size_t j = 0; j < v.rows(); ++j) {
      double sq = 0.0, spread = 0.0;
      for (std::size_t k = 0; k < v.cols(); ++k) {
        sq += v(j, k) * v(j, k);
        spread += moments[l].variance(j, k);
      }
      // A row with no weight mass sits on the sparse path and costs nothing.
      if (sq == 0.0) continue;
      total += d / (1.0 + spread / sq);
    }
  }
  return total / (cfg.sigma0 * cfg.sigma0);
}

double penalty_r_gsmreg(std::span<const double> v, std::span<const double> variance,
                        const GsmConfig& cfg) {
  if (v.size() != variance.size())
    throw ShapeError(fmt::format("penalty_r_gsmreg: {} weights but {} variances", v.size(),
                                 variance.size()));
  double total = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j)
    total += v[j] * v[j] / std::max(variance[j], cfg.lambda_floor);
  return total / (cfg.sigma0 * cfg.sigma0);
}

}  // namespace gsmn
