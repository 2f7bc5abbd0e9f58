#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gsmn/gsm.hpp"

namespace gsmn {

struct VerifyConfig {
  std::size_t problems = 10;
  std::size_t mc_draws = 100000;
  std::size_t sampler_draws = 1000000;
  std::size_t identity_sets = 100;
  std::size_t em_iters = 100;
  // Test hook: scales the closed-form linear penalty; anything but 1 must fail.
  double corrupt_penalty_scale = 1.0;
};

enum class CheckStatus { pass, fail, report };

struct CheckResult {
  std::string name;
  double closed_form;
  double monte_carlo;
  double rel_err;
  std::size_t n_draws;
  double tolerance;
  CheckStatus status;
};

std::string to_string(CheckStatus s);

// Closed form vs Monte Carlo for the linear and logistic penalties, product vs
// hierarchical mixture sampling, the penalty identity at v = E[v], and EM
// recovery on synthetic sparse regression. Checks run in parallel on
// independent generator streams, so results depend only on the seed.
std::vector<CheckResult> run_verification(const VerifyConfig& cfg, const GsmConfig& gsm,
                                          std::uint64_t seed);

// Columns: check_name,closed_form,monte_carlo,rel_err,n_draws,tolerance,status
void write_verification_csv(const std::vector<CheckResult>& results,
                            const std::filesystem::path& path);

}  // namespace gsmn
