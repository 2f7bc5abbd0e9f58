#include "gsmn/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <fmt/format.h>
#include <fmt/os.h>

#include "gsmn/error.hpp"

namespace gsmn {

std::string to_string(PruneRuleKind k) {
  switch (k) {
    case PruneRuleKind::snr: return "snr";
    case PruneRuleKind::spr: return "spr";
    case PruneRuleKind::magnitude: return "magnitude";
  }
  return "unknown";
}

PruneRuleKind parse_prune_rule(const std::string& name) {
  for (auto k : {PruneRuleKind::snr, PruneRuleKind::spr, PruneRuleKind::magnitude})
    if (to_string(k) == name) return k;
  throw ConfigError(fmt::format("unknown prune rule \"{}\"", name));
}

std::string to_string(Metric m) { return m == Metric::error_rate ? "error_rate" : "rmse"; }

std::vector<Matrix> score_weights(const PosteriorMoments& moments, const PruneRule& rule) {
  if (!(rule.snr_sigma_floor > 0.0)) throw ParameterError("snr_sigma_floor must be positive");
  std::vector<Matrix> scores;
  for (std::size_t l = 0; l < moments.depth(); ++l) {
    const Matrix& mu = moments.mean(l);
    const Matrix sigma = moments.stddev(l);
    Matrix s(mu.rows(), mu.cols());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double m = std::abs(mu.data()[i]);
      const double sd = sigma.data()[i];
      switch (rule.kind) {
        case PruneRuleKind::snr: s.data()[i] = m / std::max(sd, rule.snr_sigma_floor); break;
        case PruneRuleKind::spr: s.data()[i] = m + sd; break;
        case PruneRuleKind::magnitude: s.data()[i] = m; break;
      }
    }
    scores.push_back(std::move(s));
  }
  return scores;
}

Network prune_to_fraction(const Network& net, std::span<const Matrix> scores, double fraction,
                          const PruneOptions& options) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ParameterError(fmt::format("prune fraction must lie in [0, 1], got {}", fraction));
  if (scores.size() != net.depth()) throw ShapeError("prune: score layers do not match network");

  struct Entry {
    double score;
    std::size_t layer, row, col;
  };
  std::vector<Entry> entries;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Layer& layer = net.layer(l);
    require_same_shape(layer.weights, scores[l], "prune scores");
    const std::size_t rows = options.exempt_biases ? layer.spec.in_dim : layer.weights.rows();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < layer.weights.cols(); ++c)
        entries.push_back({scores[l](r, c), l, r, c});
  }
  const auto count = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(entries.size())));

  Network out = net;
  if (count == 0) return out;
  auto key = [](const Entry& e) { return std::tie(e.score, e.layer, e.row, e.col); };
  std::nth_element(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(count - 1),
                   entries.end(), [&](const Entry& a, const Entry& b) { return key(a) < key(b); });
  const Entry pivot = entries[count - 1];
  for (const Entry& e : entries) {
    if (key(e) <= key(pivot)) {
      Layer& layer = out.layer(e.layer);
      layer.mask(e.row, e.col) = 0.0;
      layer.weights(e.row, e.col) = 0.0;
    }
  }
  return out;
}

double evaluate(const Network& net, const Dataset& data, Metric metric) {
  return metric == Metric::error_rate ? classification_error(net, data.features, data.targets)
                                      : rmse(net, data.features, data.targets);
}

PruneCurve sweep(const Network& net, const PosteriorMoments& moments, const PruneRule& rule,
                 std::span<const double> fractions, const Dataset& eval_data, Metric metric,
                 const SweepOptions& options) {
  moments.require_matches(net);
  if (!std::is_sorted(fractions.begin(), fractions.end()))
    throw ParameterError("sweep fractions must be sorted ascending");
  const auto scores = score_weights(moments, rule);

  std::size_t total = 0;
  for (const auto& layer : net.layers())
    total += options.prune.exempt_biases ? layer.spec.in_dim * layer.spec.out_dim
                                         : layer.weights.size();

  PruneCurve curve{to_string(rule.kind), to_string(metric), total, {}};
  for (double f : fractions) {
    Network pruned = prune_to_fraction(net, scores, f, options.prune);
    if (options.correction)
      pruned = expectation_correction(pruned, *options.correction, options.correction_factor);
    const double value = evaluate(pruned, eval_data, metric);
    if (!std::isfinite(value))
      throw NumericError(fmt::format("sweep: non-finite {} at fraction {}", to_string(metric), f));
    const auto n_pruned =
        static_cast<std::size_t>(std::floor(f * static_cast<double>(total)));
    curve.points.push_back({f, value, n_pruned});
  }
  return curve;
}

double breakdown_fraction(const PruneCurve& curve, double baseline_metric,
                          double tolerance_multiplier) {
  if (curve.points.empty()) throw ParameterError("breakdown_fraction: empty curve");
  const double limit = tolerance_multiplier * baseline_metric;
  double last_ok = 0.0;
  for (const auto& p : curve.points) {
    if (p.metric_value > limit) break;
    last_ok = p.fraction_pruned;
  }
  return last_ok;
}

std::string curve_csv_header() {
  return "rule,fraction_pruned,metric_name,metric_value,n_weights_total,n_weights_pruned\n";
}

std::string curve_csv_rows(const PruneCurve& curve) {
  std::string out;
  for (const auto& p : curve.points)
    out += fmt::format("{},{},{},{},{},{}\n", curve.rule, p.fraction_pruned, curve.metric_name,
                       p.metric_value, curve.n_weights_total, p.n_weights_pruned);
  return out;
}

void write_curves_csv(std::span<const PruneCurve> curves, const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("{}", curve_csv_header());
  for (const auto& c : curves) out.print("{}", curve_csv_rows(c));
}

}  // namespace gsmn
