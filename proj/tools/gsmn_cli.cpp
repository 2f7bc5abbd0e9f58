#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <system_error>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gsmn/commands.hpp"
#include "gsmn/error.hpp"

namespace {

struct Flags {
  std::string config;
  std::string net;
  std::string moments;
  std::string out;
  std::optional<std::uint64_t> seed;
};

gsmn::ExperimentConfig load(const Flags& f) {
  auto cfg = gsmn::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output_dir = f.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian scale mixture noise: training, posterior sampling, pruning"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "experiment config (JSON)")->required();
    sub->add_option("--out", flags.out, "output directory (overrides config)");
    sub->add_option("--seed", flags.seed, "seed (overrides config)");
  };

  auto* train = app.add_subcommand("train", "train with multiplicative noise");
  add_common(train);
  auto* sample = app.add_subcommand("sample", "collect posterior moments with SGLD");
  add_common(sample);
  sample->add_option("--net", flags.net, "trained network")->required();
  auto* prune = app.add_subcommand("prune-sweep", "pruning curves per rule");
  add_common(prune);
  prune->add_option("--net", flags.net, "trained network")->required();
  prune->add_option("--moments", flags.moments, "posterior moments")->required();
  auto* verify = app.add_subcommand("verify", "closed-form and sampler checks");
  add_common(verify);
  auto* distill = app.add_subcommand("distill", "soft-target students at parameter budgets");
  add_common(distill);
  distill->add_option("--net", flags.net, "teacher network")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const auto cfg = load(flags);
    if (*train) {
      gsmn::cmd_train(cfg, std::cout);
    } else if (*sample) {
      gsmn::cmd_sample(cfg, flags.net, std::cout);
    } else if (*prune) {
      gsmn::cmd_prune_sweep(cfg, flags.net, flags.moments, std::cout);
    } else if (*verify) {
      gsmn::cmd_verify(cfg, std::cout);
    } else if (*distill) {
      gsmn::cmd_distill(cfg, flags.net, std::cout);
    }
  } catch (const gsmn::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return e.exit_code();
  } catch (const std::system_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
