#include "gsmn/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "gsmn/error.hpp"

namespace gsmn {
namespace {

// Generator streams per command, so commands never share draws.
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kDistillStream = 3;

std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
  return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw FormatError(fmt::format("failed writing {}", path.string()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  close_output(out, path);
}

void ensure_output_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw FormatError(fmt::format("cannot create {}: {}", cfg.output_dir.string(), ec.message()));
}

const Dataset& eval_split(const ExperimentData& data) {
  return data.validation ? *data.validation : data.test;
}

Network corrected(const ExperimentConfig& cfg, const Network& net) {
  return expectation_correction(net, cfg.noise, cfg.noise_correction_factor);
}

}  // namespace

Network cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  ensure_output_dir(cfg);
  const ExperimentData data = load_experiment_data(cfg);
  const Metric metric = metric_for(data.train.task);
  const auto dims = network_dims(cfg, data);
  Rng rng(cfg.seed, kTrainStream);
  Network net = Network::from_dims(dims, cfg.network.hidden_activation,
                                   output_activation(cfg, data.train.task), rng);
  TrainOptions options = cfg.training;
  options.loss = cfg.network.loss;

  std::string csv = "epoch,train_loss,validation_metric\n";
  const Dataset& held_out = eval_split(data);
  auto on_epoch = [&](const Network& current, const EpochReport& r) {
    const double m = evaluate(corrected(cfg, current), held_out, metric);
    csv += fmt::format("{},{},{}\n", r.epoch, r.train_loss, m);
    log << fmt::format("epoch {} loss {:.6f} {} {:.6f}\n", r.epoch, r.train_loss,
                       to_string(metric), m);
  };
  Rng train_rng = rng.split();
  net = train_mn(std::move(net), data.train, cfg.noise, options, train_rng, on_epoch);

  save_network(net, cfg.output_dir / "network.bin");
  write_text(cfg.output_dir / "train_log.csv", csv);
  return net;
}

PosteriorMoments cmd_sample(const ExperimentConfig& cfg, const std::filesystem::path& net_path,
                            std::ostream& log) {
  ensure_output_dir(cfg);
  const Network net = load_network(net_path);
  const ExperimentData data = load_experiment_data(cfg);
  if (net.input_dim() != data.train.features.cols() ||
      net.output_dim() != data.train.targets.cols())
    throw ShapeError(fmt::format("network {}->{} does not fit data with {} features, {} targets",
                                 net.input_dim(), net.output_dim(), data.train.features.cols(),
                                 data.train.targets.cols()));
  Rng rng(cfg.seed, kSampleStream);
  const auto run = collect_moments(corrected(cfg, net), data.train, cfg.sgld, rng, {},
                                   cfg.network.loss);
  save_moments(run.moments, cfg.output_dir / "moments.bin");

  std::string csv = "layer,row,col,abs_mean,sd\n";
  for (std::size_t l = 0; l < run.moments.depth(); ++l) {
    const Matrix& mu = run.moments.mean(l);
    const Matrix sd = run.moments.stddev(l);
    for (std::size_t r = 0; r < mu.rows(); ++r)
      for (std::size_t c = 0; c < mu.cols(); ++c)
        csv += fmt::format("{},{},{},{},{}\n", l, r, c, std::abs(mu(r, c)), sd(r, c));
  }
  write_text(cfg.output_dir / "moment_scatter.csv", csv);
  log << fmt::format("collected {} samples\n", run.moments.count());
  return run.moments;
}

SweepSummary cmd_prune_sweep(const ExperimentConfig& cfg, const std::filesystem::path& net_path,
                             const std::filesystem::path& moments_path, std::ostream& log) {
  ensure_output_dir(cfg);
  const Network raw = load_network(net_path);
  const PosteriorMoments moments = load_moments(moments_path);
  moments.require_matches(raw);
  const ExperimentData data = load_experiment_data(cfg);
  const Metric metric = metric_for(data.test.task);
  Network net = corrected(cfg, raw);
  if (cfg.pruning.weights == "posterior_mean")
    for (std::size_t l = 0; l < net.depth(); ++l) {
      net.layer(l).weights = moments.mean(l);
      net.apply_masks();
    }

  std::vector<double> fractions = cfg.pruning.fractions;
  if (fractions.empty())
    for (int i = 0; i <= 19; ++i) fractions.push_back(0.05 * i);
  std::sort(fractions.begin(), fractions.end());

  SweepSummary summary;
  summary.baseline_metric = evaluate(net, data.test, metric);
  SweepOptions options;
  options.prune.exempt_biases = cfg.pruning.exempt_biases;
  for (PruneRuleKind kind : cfg.pruning.rules) {
    const PruneRule rule{kind, cfg.pruning.snr_sigma_floor};
    PruneCurve curve = sweep(net, moments, rule, fractions, data.test, metric, options);
    const double b =
        breakdown_fraction(curve, summary.baseline_metric, cfg.pruning.breakdown_multiplier);
    write_curves_csv(std::span<const PruneCurve>(&curve, 1),
                     cfg.output_dir / fmt::format("prune_{}.csv", curve.rule));
    log << fmt::format("breakdown {} {}\n", curve.rule, b);
    summary.breakdowns.push_back(b);
    summary.curves.push_back(std::move(curve));
  }
  write_curves_csv(summary.curves, cfg.output_dir / "prune_curves.csv");
  log << fmt::format("baseline {} {}\n", to_string(metric), summary.baseline_metric);
  return summary;
}

std::vector<CheckResult> cmd_verify(const ExperimentConfig& cfg, std::ostream& log) {
  ensure_output_dir(cfg);
  auto results = run_verification(cfg.verify, cfg.gsm, cfg.seed);
  write_verification_csv(results, cfg.output_dir / "verify_report.csv");
  std::vector<std::string> failed;
  for (const auto& r : results)
    if (r.status == CheckStatus::fail) failed.push_back(r.name);
  log << fmt::format("{} checks, {} failed\n", results.size(), failed.size());
  if (!failed.empty()) {
    std::string msg = "verification failed:";
    for (const auto& n : failed) msg += " " + n;
    throw VerificationError(msg);
  }
  return results;
}

PruneCurve cmd_distill(const ExperimentConfig& cfg, const std::filesystem::path& teacher_path,
                       std::ostream& log) {
  ensure_output_dir(cfg);
  const Network teacher = load_network(teacher_path);
  PruneCurve curve{"distill", to_string(Metric::error_rate), 0, {}};
  if (cfg.distill.budgets.empty()) {
    log << "warning: distill.budgets is empty, nothing to do\n";
    return curve;
  }
  const ExperimentData data = load_experiment_data(cfg);
  if (data.train.task != Task::classification)
    throw UnsupportedTaskError("distillation needs a classification teacher");

  std::vector<std::size_t> teacher_dims{teacher.input_dim()};
  for (const auto& layer : teacher.layers()) teacher_dims.push_back(layer.spec.out_dim);
  const std::size_t teacher_count = parameter_count(teacher_dims);
  curve.n_weights_total = teacher_count;

  const Matrix soft = soft_targets(teacher, data.train.features, cfg.distill.temperature,
                                   cfg.noise, cfg.noise_correction_factor);
  Rng rng(cfg.seed, kDistillStream);
  for (double budget : cfg.distill.budgets) {
    DistillConfig dc{student_dims_for_budget(teacher, budget), cfg.network.hidden_activation,
                     cfg.distill.temperature, cfg.distill.train};
    Rng student_rng = rng.split();
    const Network student = retrain_student(dc, data.train.features, soft, student_rng);
    const std::size_t count = parameter_count(dc.student_dims);
    const double err = evaluate(student, data.test, Metric::error_rate);
    curve.points.push_back(
        {1.0 - budget, err, teacher_count > count ? teacher_count - count : 0});
    log << fmt::format("distill budget {} params {} error {}\n", budget, count, err);
  }
  write_curves_csv(std::span<const PruneCurve>(&curve, 1), cfg.output_dir / "distill.csv");

  // Replace earlier distill rows in the combined file so reruns stay idempotent.
  const auto combined = cfg.output_dir / "prune_curves.csv";
  std::string text = curve_csv_header();
  if (std::ifstream in(combined); in) {
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
      if (!line.starts_with("distill,")) text += line + "\n";
  }
  text += curve_csv_rows(curve);
  write_text(combined, text);
  return curve;
}

}  // namespace gsmn
