#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsmn/dataset.hpp"
#include "gsmn/network.hpp"
#include "gsmn/noise.hpp"
#include "gsmn/posterior.hpp"

namespace gsmn {

enum class PruneRuleKind { snr, spr, magnitude };

std::string to_string(PruneRuleKind k);
PruneRuleKind parse_prune_rule(const std::string& name);

struct PruneRule {
  PruneRuleKind kind = PruneRuleKind::spr;
  double snr_sigma_floor = 1e-8;
};

// Per-weight scores, lower = pruned earlier.
//   SNR: |mu| / max(sigma, floor)   SPR: |mu| + sigma   Magnitude: |mu|
std::vector<Matrix> score_weights(const PosteriorMoments& moments, const PruneRule& rule);

struct PruneOptions {
  bool exempt_biases = false;
};

// Masks (and zeroes) the floor(fraction * W) lowest-scoring weights, ties
// broken by (layer, row, col). W counts biases unless they are exempt.
Network prune_to_fraction(const Network& net, std::span<const Matrix> scores, double fraction,
                          const PruneOptions& options = {});

enum class Metric { error_rate, rmse };
std::string to_string(Metric m);
double evaluate(const Network& net, const Dataset& data, Metric metric);

struct CurvePoint {
  double fraction_pruned;
  double metric_value;
  std::size_t n_weights_pruned;
};

struct PruneCurve {
  std::string rule;
  std::string metric_name;
  std::size_t n_weights_total = 0;
  std::vector<CurvePoint> points;
};

struct SweepOptions {
  PruneOptions prune{};
  // Test-time correction applied to every pruned copy (MN-trained networks).
  std::optional<NoiseSpec> correction;
  std::optional<double> correction_factor;
};

// Each fraction prunes a fresh copy of `net`, never the previous point's result.
PruneCurve sweep(const Network& net, const PosteriorMoments& moments, const PruneRule& rule,
                 std::span<const double> fractions, const Dataset& eval_data, Metric metric,
                 const SweepOptions& options = {});

// Last recorded fraction before the metric first exceeds
// tolerance_multiplier * baseline_metric; 0 when the first point already does.
double breakdown_fraction(const PruneCurve& curve, double baseline_metric,
                          double tolerance_multiplier);

// Columns: rule,fraction_pruned,metric_name,metric_value,n_weights_total,n_weights_pruned
std::string curve_csv_header();
std::string curve_csv_rows(const PruneCurve& curve);
void write_curves_csv(std::span<const PruneCurve> curves, const std::filesystem::path& path);

}  // namespace gsmn
