#include "gsmn/verification.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>

#include <fmt/format.h>
#include <fmt/os.h>

#include "gsmn/dataset.hpp"
#include "gsmn/error.hpp"

namespace gsmn {
namespace {

using CheckTask = std::function<std::vector<CheckResult>()>;

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

CheckResult judged(std::string name, double closed, double mc, double err, std::size_t n,
                   double tol) {
  return {std::move(name), closed, mc, err, n, tol, err <= tol ? CheckStatus::pass : CheckStatus::fail};
}

const std::vector<std::pair<std::string, NoiseSpec>>& penalty_noises() {
  static const std::vector<std::pair<std::string, NoiseSpec>> v{
      {"bernoulli0.5", NoiseSpec::bernoulli(0.5)},
      {"gaussian1_0.5", NoiseSpec::gaussian(1.0, 0.5)},
      {"beta0.5_0.5", NoiseSpec::beta(0.5, 0.5)},
  };
  return v;
}

const std::vector<std::pair<std::string, NoiseSpec>>& sampler_noises() {
  static const std::vector<std::pair<std::string, NoiseSpec>> v{
      {"constant1", NoiseSpec::constant(1.0)},
      {"bernoulli0.5", NoiseSpec::bernoulli(0.5)},
      {"gaussian1_0.5", NoiseSpec::gaussian(1.0, 0.5)},
      {"beta0.5_0.5", NoiseSpec::beta(0.5, 0.5)},
  };
  return v;
}

struct LinearProblem {
  Matrix x;
  std::vector<double> y;
  std::vector<double> w;
};

// Random regression problem with N in [10, 50] and d in [2, 10].
LinearProblem random_linear_problem(Rng& rng) {
  const std::size_t n = 10 + rng.below(41);
  const std::size_t d = 2 + rng.below(9);
  LinearProblem p{Matrix(n, d), std::vector<double>(n), std::vector<double>(d)};
  for (double& v : p.x.data()) v = rng.normal();
  for (double& v : p.w) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += p.x(i, j) * p.w[j];
    p.y[i] = s + 0.5 * rng.normal();
  }
  return p;
}

// Logistic problem whose mean logits satisfy |x_i w| <= max_logit, with the
// bound attained.
LinearProblem random_logistic_problem(Rng& rng, double max_logit) {
  const std::size_t n = 20 + rng.below(31);
  const std::size_t d = 2 + rng.below(9);
  LinearProblem p{Matrix(n, d), std::vector<double>(n), std::vector<double>(d)};
  for (double& v : p.x.data()) v = rng.normal();
  for (double& v : p.w) v = rng.normal();
  double biggest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += p.x(i, j) * p.w[j];
    biggest = std::max(biggest, std::abs(s));
  }
  for (double& v : p.w) v *= max_logit / biggest;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += p.x(i, j) * p.w[j];
    p.y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-s)) ? 1.0 : 0.0;
  }
  return p;
}

// k-th raw moment of a sample with its standard error.
std::pair<double, double> raw_moment(std::span<const double> xs, int k) {
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double v : xs) {
    const double p = std::pow(v, k);
    ++n;
    const double d = p - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (p - mean);
  }
  const double var = m2 / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::report: return "report";
  }
  return "unknown";
}

std::vector<CheckResult> run_verification(const VerifyConfig& cfg, const GsmConfig& gsm,
                                          std::uint64_t seed) {
  gsm.validate();
  std::vector<CheckTask> tasks;
  std::uint64_t stream = 100;

  // Expected noisy squared loss vs its closed form.
  for (std::size_t p = 0; p < cfg.problems; ++p) {
    for (const auto& [label, spec] : penalty_noises()) {
      const std::uint64_t problem_stream = 10 + p;
      const std::uint64_t mc_stream = stream++;
      tasks.push_back([=, &cfg, label = label, spec = spec]() {
        Rng prng(seed, problem_stream);
        const auto prob = random_linear_problem(prng);
        Rng rng(seed, mc_stream);
        const double m = spec.mean();
        double rss = 0.0;
        for (std::size_t i = 0; i < prob.x.rows(); ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < prob.w.size(); ++j) s += prob.x(i, j) * prob.w[j];
          rss += (prob.y[i] - m * s) * (prob.y[i] - m * s);
        }
        const double closed =
            0.5 * rss + cfg.corrupt_penalty_scale * penalty_linear_mn(prob.x, prob.w, spec);
        const auto mc = monte_carlo_linear_mn(prob.x, prob.y, prob.w, spec, cfg.mc_draws, rng);
        return std::vector<CheckResult>{judged(fmt::format("linear_mn/{}/problem{}", label, p),
                                               closed, mc.mean, rel(mc.mean, closed),
                                               cfg.mc_draws, 0.01)};
      });
    }
  }

  // Second-order logistic expansion: asserted for small logits, reported beyond.
  for (std::size_t p = 0; p < cfg.problems; ++p) {
    for (const auto& [label, spec] : penalty_noises()) {
      for (double bound : {0.5, 4.0}) {
        const std::uint64_t problem_stream = 1000 + p;
        const std::uint64_t mc_stream = stream++;
        tasks.push_back([=, &cfg, label = label, spec = spec]() {
          Rng prng(seed, problem_stream);
          const auto prob = random_logistic_problem(prng, bound);
          Rng rng(seed, mc_stream);
          const double approx = loss_logistic_mn_approx(prob.x, prob.y, prob.w, spec);
          const auto mc = monte_carlo_logistic_mn(prob.x, prob.y, prob.w, spec, cfg.mc_draws, rng);
          const bool small = bound <= 0.5;
          CheckResult r{fmt::format("logistic_mn_{}/{}/problem{}", small ? "small" : "large",
                                    label, p),
                        approx,
                        mc.mean,
                        rel(approx, mc.mean),
                        cfg.mc_draws,
                        small ? 0.05 : std::numeric_limits<double>::infinity(),
                        CheckStatus::report};
          if (small) r.status = r.rel_err <= 0.05 ? CheckStatus::pass : CheckStatus::fail;
          return std::vector<CheckResult>{r};
        });
      }
    }
  }

  // Product vs hierarchical mixture sampling.
  for (const auto& [label, spec] : sampler_noises()) {
    const std::uint64_t a_stream = stream++;
    const std::uint64_t b_stream = stream++;
    tasks.push_back([=, &cfg, &gsm, label = label, spec = spec]() {
      Rng ra(seed, a_stream), rb(seed, b_stream);
      const auto prod = gsm_sample_product(spec, gsm.sigma0, cfg.sampler_draws, ra);
      const auto hier = gsm_sample_hierarchical(spec, gsm.sigma0, cfg.sampler_draws, rb);
      std::vector<CheckResult> out;
      const double ks = ecdf_sup_distance(prod, hier);
      out.push_back(judged(fmt::format("gsm_ecdf_sup/{}", label), 0.0, ks, ks, cfg.sampler_draws,
                           0.01));
      double worst_z = 0.0;
      for (int k = 1; k <= 4; ++k) {
        const auto [ma, sa] = raw_moment(prod, k);
        const auto [mb, sb] = raw_moment(hier, k);
        const double se = std::sqrt(sa * sa + sb * sb);
        worst_z = std::max(worst_z, se > 0.0 ? std::abs(ma - mb) / se : std::abs(ma - mb) * 1e300);
      }
      out.push_back(judged(fmt::format("gsm_moments_z/{}", label), 0.0, worst_z, worst_z,
                           cfg.sampler_draws, 5.0));
      const auto stats = sample_stats(hier);
      const double var = gsm_second_moment(spec, gsm.sigma0);
      const double kurt = gsm_fourth_moment(spec, gsm.sigma0) / (var * var);
      out.push_back(judged(fmt::format("gsm_variance/{}", label), var, stats.variance,
                           rel(stats.variance, var), cfg.sampler_draws, 0.02));
      out.push_back(judged(fmt::format("gsm_kurtosis/{}", label), kurt, stats.kurtosis,
                           rel(stats.kurtosis, kurt), cfg.sampler_draws, 0.05));
      return out;
    });
  }

  // Penalty identity at v = E[v].
  {
    const std::uint64_t id_stream = stream++;
    tasks.push_back([=, &cfg, &gsm]() {
      Rng rng(seed, id_stream);
      double worst = 0.0;
      double last_full = 0.0, last_simple = 0.0;
      for (std::size_t s = 0; s < cfg.identity_sets; ++s) {
        const std::size_t depth = 1 + rng.below(3);
        std::vector<Matrix> v;
        std::vector<LayerMoments> mom;
        for (std::size_t l = 0; l < depth; ++l) {
          const std::size_t rows = 1 + rng.below(8), cols = 1 + rng.below(8);
          LayerMoments lm{Matrix(rows, cols), Matrix(rows, cols)};
          for (double& x : lm.mean.data()) x = rng.normal();
          for (double& x : lm.variance.data()) x = -std::log(rng.uniform());
          v.push_back(lm.mean);
          mom.push_back(std::move(lm));
        }
        last_full = penalty_r_gsm(v, mom, gsm);
        last_simple = penalty_r_gsm_simplified(v, mom, gsm);
        worst = std::max(worst, rel(last_full, last_simple));
      }
      return std::vector<CheckResult>{judged("penalty_identity_at_posterior_mean", last_simple,
                                             last_full, worst, cfg.identity_sets, 1e-12)};
    });
  }

  // EM recovery on synthetic sparse regression.
  {
    const std::uint64_t em_stream = stream++;
    tasks.push_back([=, &cfg, &gsm]() {
      Rng rng(seed, em_stream);
      const std::vector<std::size_t> active{2, 7, 13};
      const double noise_sd = 0.1;
      const auto synth = synth_sparse_regression(200, 20, active, 1.0, noise_sd, rng);
      std::vector<double> y(synth.data.targets.data().begin(), synth.data.targets.data().end());
      const auto em = em_fit_linear(synth.data.features, y, noise_sd * noise_sd, gsm,
                                    cfg.em_iters, EmOptions{NoiseSpec::beta(0.5, 0.5)});
      double min_active = std::numeric_limits<double>::infinity();
      double max_inactive = 0.0;
      for (std::size_t j = 0; j < em.lambda_sq.size(); ++j) {
        if (std::find(active.begin(), active.end(), j) != active.end())
          min_active = std::min(min_active, em.lambda_sq[j]);
        else
          max_inactive = std::max(max_inactive, em.lambda_sq[j]);
      }
      const double ratio = min_active / max_inactive;
      return std::vector<CheckResult>{{"em_recovery_ratio", 10.0, ratio, 0.0, cfg.em_iters, 10.0,
                                       ratio >= 10.0 ? CheckStatus::pass : CheckStatus::fail}};
    });
  }

  std::vector<std::future<std::vector<CheckResult>>> futures;
  futures.reserve(tasks.size());
  for (auto& t : tasks) futures.push_back(std::async(std::launch::async, t));
  std::vector<CheckResult> results;
  for (auto& f : futures) {
    auto part = f.get();
    results.insert(results.end(), part.begin(), part.end());
  }
  return results;
}

void write_verification_csv(const std::vector<CheckResult>& results,
                            const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("check_name,closed_form,monte_carlo,rel_err,n_draws,tolerance,status\n");
  for (const auto& r : results)
    out.print("{},{},{},{},{},{},{}\n", r.name, r.closed_form, r.monte_carlo, r.rel_err,
              r.n_draws, r.tolerance, to_string(r.status));
}

}  // namespace gsmn
