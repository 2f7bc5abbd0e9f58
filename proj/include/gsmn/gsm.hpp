#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsmn/matrix.hpp"
#include "gsmn/noise.hpp"
#include "gsmn/rng.hpp"

namespace gsmn {

// Prior scale sigma0 on the weights and the numerical floor applied to every
// lambda^2 estimate and penalty denominator.
struct GsmConfig {
  double sigma0 = 1.0;
  double lambda_floor = 1e-8;

  void validate() const;
};

// Posterior mean and variance of every weight in one layer, shaped like the
// layer's weight matrix (row j = input unit j, column k = outgoing weight k).
struct LayerMoments {
  Matrix mean;
  Matrix variance;
};

// Moments of the weights leaving one input unit.
struct RowMoments {
  std::vector<double> mean;
  std::vector<double> variance;
};

RowMoments row_moments(const LayerMoments& layer, std::size_t row);

// --- Closed-form multiplicative-noise penalties -------------------------------

// 0.5 * Var[lambda] * sum_j w_j^2 sum_i x_ij^2
double penalty_linear_mn(const Matrix& x, std::span<const double> w, const NoiseSpec& spec);

// Expected noisy squared loss 0.5 * E sum_i (y_i - x_i Lambda w)^2 in closed form:
// the mean-noise residual term plus penalty_linear_mn. Exact in expectation.
double loss_linear_mn_closed_form(const Matrix& x, std::span<const double> y,
                                  std::span<const double> w, const NoiseSpec& spec);

// Second-order expansion of the noisy logistic loss around the noise mean:
// NLL at logits E[lambda] x_i w plus
// 0.5 * Var[lambda] * sum_j w_j^2 sum_i f(1 - f) x_ij^2.
double loss_logistic_mn_approx(const Matrix& x, std::span<const double> y,
                               std::span<const double> w, const NoiseSpec& spec);

// Plain logistic NLL, summed over examples.
double logistic_nll(const Matrix& x, std::span<const double> y, std::span<const double> w,
                    double logit_scale = 1.0);

// Monte Carlo estimates with an independent lambda per (example, feature).
struct MonteCarloEstimate {
  double mean;
  double standard_error;
  std::size_t draws;
};
MonteCarloEstimate monte_carlo_linear_mn(const Matrix& x, std::span<const double> y,
                                         std::span<const double> w, const NoiseSpec& spec,
                                         std::size_t draws, Rng& rng);
MonteCarloEstimate monte_carlo_logistic_mn(const Matrix& x, std::span<const double> y,
                                           std::span<const double> w, const NoiseSpec& spec,
                                           std::size_t draws, Rng& rng);

// --- Gaussian scale mixture sampling ------------------------------------------

// lambda * w with lambda ~ spec, w ~ N(0, sigma0^2).
std::vector<double> gsm_sample_product(const NoiseSpec& spec, double sigma0, std::size_t n,
                                       Rng& rng);
// lambda ~ spec, then v ~ N(0, sigma0^2 lambda^2).
std::vector<double> gsm_sample_hierarchical(const NoiseSpec& spec, double sigma0, std::size_t n,
                                            Rng& rng);

// Exact moments of the mixture: E[v^2] and E[v^4] (odd moments vanish).
double gsm_second_moment(const NoiseSpec& spec, double sigma0);
double gsm_fourth_moment(const NoiseSpec& spec, double sigma0);

struct SampleStats {
  double mean;
  double variance;  // central, divided by n
  double m3;        // third central moment
  double m4;        // fourth central moment
  double kurtosis;  // m4 / variance^2
};
SampleStats sample_stats(std::span<const double> xs);

// Two-sample Kolmogorov-Smirnov statistic (sup |F_a - F_b|).
double ecdf_sup_distance(std::vector<double> a, std::vector<double> b);

// --- Type-II maximum likelihood ------------------------------------------------

// d/dlambda log p(lambda), evaluated at the current lambda.
using LogPriorGradient = std::function<double(double)>;

// lambda^2 = mean_k E[v]^2 + mean_k Var[v] (+ prior term), floored.
double em_m_step(const RowMoments& row, const GsmConfig& cfg,
                 const LogPriorGradient& log_prior_grad = {}, double current_lambda = 1.0);

struct EmOptions {
  // Family of the noise prior; discrete families are rejected.
  NoiseSpec noise = NoiseSpec::beta(0.5, 0.5);
  // Include d/dlambda log p(lambda) in the M-step. Off means a flat prior.
  bool use_prior_gradient = false;
  double initial_lambda_sq = 1.0;
};

struct EmResult {
  std::vector<double> lambda_sq;
  RowMoments moments;  // one entry per coordinate
  std::size_t iterations;
};

// Alternates the exact conjugate Gaussian E-step (prior N(0, sigma0^2 lambda_j^2),
// observation noise variance obs_noise_var, off-diagonal posterior covariance
// discarded) with em_m_step per coordinate.
EmResult em_fit_linear(const Matrix& x, std::span<const double> y, double obs_noise_var,
                       const GsmConfig& cfg, std::size_t iters, const EmOptions& options = {});

// Exact Gaussian posterior for linear regression with a diagonal prior.
struct LinearPosterior {
  std::vector<double> mean;
  Matrix covariance;
};
LinearPosterior linear_gaussian_posterior(const Matrix& x, std::span<const double> y,
                                          double obs_noise_var,
                                          std::span<const double> prior_variances);

// --- Regularization penalties on the hierarchical weights ----------------------

// (1/sigma0^2) sum_l sum_j sum_k v^2 / (mean_k E[v]^2 + mean_k Var[v]).
double penalty_r_gsm(std::span<const Matrix> weights, std::span<const LayerMoments> moments,
                     const GsmConfig& cfg);
// (1/sigma0^2) sum_l sum_j d_l / (1 + sum_k Var[v] / sum_k v^2).
double penalty_r_gsm_simplified(std::span<const Matrix> weights,
                                std::span<const LayerMoments> moments, const GsmConfig& cfg);
// (1/sigma0^2) sum_j v_j^2 / Var[v_j].
double penalty_r_gsmreg(std::span<const double> v, std::span<const double> variance,
                        const GsmConfig& cfg);

}  // namespace gsmn
