#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "gsmn/config.hpp"

namespace gsmn {

// Each command reads only its config and input files and writes into
// cfg.output_dir, so reruns with the same seed produce identical bytes.

// network.bin and train_log.csv (epoch,train_loss,validation_metric). The
// validation metric falls back to the test split when no validation split is
// configured.
Network cmd_train(const ExperimentConfig& cfg, std::ostream& log);

// SGLD started from the expectation-corrected network. Writes moments.bin and
// moment_scatter.csv (layer,row,col,abs_mean,sd).
PosteriorMoments cmd_sample(const ExperimentConfig& cfg, const std::filesystem::path& net_path,
                            std::ostream& log);

struct SweepSummary {
  std::vector<PruneCurve> curves;
  double baseline_metric;
  std::vector<double> breakdowns;  // one per curve
};

// prune_<rule>.csv per rule plus prune_curves.csv; breakdown fractions go to `log`.
SweepSummary cmd_prune_sweep(const ExperimentConfig& cfg, const std::filesystem::path& net_path,
                             const std::filesystem::path& moments_path, std::ostream& log);

// verify_report.csv; throws VerificationError listing failed checks.
std::vector<CheckResult> cmd_verify(const ExperimentConfig& cfg, std::ostream& log);

// distill.csv, and the rule="distill" rows of prune_curves.csv are replaced.
PruneCurve cmd_distill(const ExperimentConfig& cfg, const std::filesystem::path& teacher_path,
                       std::ostream& log);

}  // namespace gsmn
