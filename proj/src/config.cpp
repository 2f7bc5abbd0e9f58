#include "gsmn/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "gsmn/error.hpp"

namespace gsmn {
namespace {

using nlohmann::json;

// Reads fields from one JSON object and rejects any key nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("\"{}\" must be an object", name_));
  }
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  void read(const char* key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", name_, key, e.what()));
    }
  }

  template <class T>
  void read(const char* key, std::optional<T>& out) {
    if (!has(key)) return;
    T v{};
    read(key, v);
    out = v;
  }

  const json& sub(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string child(const char* key) const { return name_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) throw ConfigError(fmt::format("unknown key \"{}.{}\"", name_, key));
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_schedule(Section& parent, const char* key, PolyDecay& out) {
  if (!parent.has(key)) return;
  Section s(parent.sub(key), parent.child(key));
  s.read("scale", out.scale);
  s.read("offset", out.offset);
  s.read("decay", out.decay);
  s.finish();
  out.validate();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

Activation read_activation(Section& s, const char* key, Activation fallback) {
  std::string name;
  s.read(key, name);
  return name.empty() ? fallback : parse_activation(name);
}

void parse_dataset(Section& root, DatasetConfig& d, const std::filesystem::path& base) {
  if (!root.has("dataset")) return;
  Section s(root.sub("dataset"), "dataset");
  s.read("kind", d.kind);
  std::string p;
  auto path = [&](const char* key, std::filesystem::path& out) {
    p.clear();
    s.read(key, p);
    if (!p.empty()) out = resolve(base, p);
  };
  path("train_images", d.train_images);
  path("train_labels", d.train_labels);
  path("test_images", d.test_images);
  path("test_labels", d.test_labels);
  s.read("train_limit", d.train_limit);
  s.read("validation_limit", d.validation_limit);
  s.read("test_limit", d.test_limit);
  path("train_path", d.train_path);
  path("test_path", d.test_path);
  s.read("target_column", d.target_column);
  std::string task;
  s.read("task", task);
  if (!task.empty()) d.task = parse_task(task);
  s.read("num_classes", d.num_classes);
  s.read("validation_count", d.validation_count);
  s.read("standardize_targets", d.standardize_targets);
  s.read("n_train", d.n_train);
  s.read("n_validation", d.n_validation);
  s.read("n_test", d.n_test);
  s.read("separation", d.separation);
  s.read("features", d.features);
  s.read("active", d.active);
  s.read("w_scale", d.w_scale);
  s.read("noise_sd", d.noise_sd);
  s.finish();

  if (d.kind == "mnist") {
    if (d.train_images.empty() || d.train_labels.empty() || d.test_images.empty() ||
        d.test_labels.empty())
      throw ConfigError("mnist dataset needs train/test image and label paths");
  } else if (d.kind == "csv") {
    if (d.train_path.empty() || d.test_path.empty() || d.target_column.empty())
      throw ConfigError("csv dataset needs train_path, test_path and target_column");
  } else if (d.kind == "two_blobs") {
    d.task = Task::classification;
  } else if (d.kind == "sparse_regression") {
    d.task = Task::regression;
  } else {
    throw ConfigError(fmt::format("unknown dataset kind \"{}\"", d.kind));
  }
  if (d.kind == "mnist") d.task = Task::classification;
}

}  // namespace

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  Section root(j, "config");
  if (!root.has("seed")) throw ConfigError("config is missing the mandatory \"seed\"");
  root.read("seed", cfg.seed);
  std::string out;
  root.read("output_dir", out);
  if (!out.empty()) cfg.output_dir = resolve(base_dir, out);

  parse_dataset(root, cfg.dataset, base_dir);

  if (root.has("network")) {
    Section s(root.sub("network"), "network");
    s.read("hidden", cfg.network.hidden);
    cfg.network.hidden_activation = read_activation(s, "hidden_activation", Activation::relu);
    std::string out_act;
    s.read("output_activation", out_act);
    if (!out_act.empty()) cfg.network.output_activation = parse_activation(out_act);
    std::string loss;
    s.read("loss", loss);
    if (!loss.empty()) cfg.network.loss = parse_loss(loss);
    s.finish();
  }

  if (root.has("noise")) {
    json spec = root.sub("noise");
    if (!spec.is_object()) throw ConfigError("\"noise\" must be an object");
    if (spec.contains("correction_factor")) {
      cfg.noise_correction_factor = spec.at("correction_factor").get<double>();
      spec.erase("correction_factor");
    }
    cfg.noise = spec.get<NoiseSpec>();
  }

  if (root.has("training")) {
    Section s(root.sub("training"), "training");
    s.read("epochs", cfg.training.epochs);
    s.read("batch_size", cfg.training.batch_size);
    read_schedule(s, "lr", cfg.training.lr);
    s.read("prior_sigma0", cfg.training.prior_sigma0);
    s.finish();
  }

  if (root.has("sgld")) {
    Section s(root.sub("sgld"), "sgld");
    read_schedule(s, "lr", cfg.sgld.lr);
    s.read("noise_variance_scale", cfg.sgld.noise_variance_scale);
    s.read("prior_sigma0", cfg.sgld.prior_sigma0);
    s.read("burn_in", cfg.sgld.burn_in);
    s.read("thin", cfg.sgld.thin);
    s.read("n_samples", cfg.sgld.n_samples);
    s.read("batch_size", cfg.sgld.batch_size);
    s.finish();
    cfg.sgld.validate();
  }

  if (root.has("gsm")) {
    Section s(root.sub("gsm"), "gsm");
    s.read("sigma0", cfg.gsm.sigma0);
    s.read("lambda_floor", cfg.gsm.lambda_floor);
    s.finish();
    cfg.gsm.validate();
  }

  if (root.has("pruning")) {
    Section s(root.sub("pruning"), "pruning");
    s.read("fractions", cfg.pruning.fractions);
    if (s.has("rules")) {
      cfg.pruning.rules.clear();
      std::vector<std::string> names;
      s.read("rules", names);
      for (const auto& n : names) cfg.pruning.rules.push_back(parse_prune_rule(n));
    }
    s.read("snr_sigma_floor", cfg.pruning.snr_sigma_floor);
    s.read("exempt_biases", cfg.pruning.exempt_biases);
    s.read("breakdown_multiplier", cfg.pruning.breakdown_multiplier);
    s.read("weights", cfg.pruning.weights);
    s.finish();
    if (cfg.pruning.weights != "network" && cfg.pruning.weights != "posterior_mean")
      throw ConfigError("pruning.weights must be \"network\" or \"posterior_mean\"");
    for (double f : cfg.pruning.fractions)
      if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("pruning fractions must lie in [0, 1]");
  }

  if (root.has("distill")) {
    Section s(root.sub("distill"), "distill");
    s.read("budgets", cfg.distill.budgets);
    s.read("temperature", cfg.distill.temperature);
    s.read("epochs", cfg.distill.train.epochs);
    s.read("batch_size", cfg.distill.train.batch_size);
    read_schedule(s, "lr", cfg.distill.train.lr);
    s.finish();
    if (!(cfg.distill.temperature > 0.0)) throw ParameterError("distill temperature must be positive");
  }

  if (root.has("verify")) {
    Section s(root.sub("verify"), "verify");
    s.read("problems", cfg.verify.problems);
    s.read("mc_draws", cfg.verify.mc_draws);
    s.read("sampler_draws", cfg.verify.sampler_draws);
    s.read("identity_sets", cfg.verify.identity_sets);
    s.read("em_iters", cfg.verify.em_iters);
    s.read("corrupt_penalty_scale", cfg.verify.corrupt_penalty_scale);
    s.finish();
  }

  root.finish();
  cfg.training.lr.validate();
  if (cfg.training.batch_size == 0) throw ConfigError("training.batch_size must be positive");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config {}", path.string()));
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_config(j, path.parent_path());
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  const DatasetConfig& d = cfg.dataset;
  if (d.kind.empty()) throw ConfigError("this command needs a \"dataset\" section");
  ExperimentData out;
  if (d.kind == "mnist") {
    out.train = load_idx(d.train_images, d.train_labels, 0, d.train_limit);
    if (d.validation_limit > 0) {
      out.validation = load_idx(d.train_images, d.train_labels, d.train_limit, d.validation_limit);
      out.validation->split = Split::validation;
    }
    out.test = load_idx(d.test_images, d.test_labels, 0, d.test_limit);
    out.test.split = Split::test;
  } else if (d.kind == "csv") {
    CsvOptions opts{d.target_column, d.task, d.num_classes};
    Dataset full = load_csv(d.train_path, opts);
    if (d.task == Task::classification && opts.num_classes == 0)
      opts.num_classes = full.targets.cols();
    Dataset test = load_csv(d.test_path, opts);
    if (d.validation_count >= full.size())
      throw ConfigError("validation_count leaves no training rows");
    const std::size_t n_train = full.size() - d.validation_count;
    out.train = take_rows(full, 0, n_train, Split::train);
    if (d.validation_count > 0)
      out.validation = take_rows(full, n_train, full.size(), Split::validation);
    out.test = std::move(test);
    out.test.split = Split::test;

    const auto fs = Standardizer::fit(out.train.features);
    out.train.features = fs.transform(out.train.features);
    if (out.validation) out.validation->features = fs.transform(out.validation->features);
    out.test.features = fs.transform(out.test.features);
    if (d.standardize_targets && d.task == Task::regression) {
      const auto ts = Standardizer::fit(out.train.targets);
      out.train.targets = ts.transform(out.train.targets);
      if (out.validation) out.validation->targets = ts.transform(out.validation->targets);
      out.test.targets = ts.transform(out.test.targets);
    }
  } else {
    Rng rng(cfg.seed, 0xDA7A);
    // The blob direction and sparse weights must agree across splits, so each
    // split is a block of one generated set.
    Rng local = rng.split();
    const std::size_t total = d.n_train + d.n_validation + d.n_test;
    Dataset all = d.kind == "two_blobs"
                      ? synth_two_blobs(total, d.separation, local)
                      : synth_sparse_regression(total, d.features, d.active, d.w_scale,
                                                d.noise_sd, local)
                            .data;
    out.train = take_rows(all, 0, d.n_train, Split::train);
    if (d.n_validation > 0)
      out.validation = take_rows(all, d.n_train, d.n_train + d.n_validation, Split::validation);
    out.test = take_rows(all, d.n_train + d.n_validation, total, Split::test);
  }
  out.train.validate();
  out.test.validate();
  if (out.validation) out.validation->validate();
  return out;
}

Activation output_activation(const ExperimentConfig& cfg, Task task) {
  if (cfg.network.output_activation) return *cfg.network.output_activation;
  return task == Task::classification ? Activation::softmax : Activation::identity;
}

std::vector<std::size_t> network_dims(const ExperimentConfig& cfg, const ExperimentData& data) {
  std::vector<std::size_t> dims{data.train.features.cols()};
  dims.insert(dims.end(), cfg.network.hidden.begin(), cfg.network.hidden.end());
  dims.push_back(data.train.targets.cols());
  return dims;
}

Metric metric_for(Task task) {
  return task == Task::classification ? Metric::error_rate : Metric::rmse;
}

}  // namespace gsmn
