#include "gsmn/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "gsmn/error.hpp"

namespace gsmn {

void DistillConfig::validate() const {
  if (student_dims.size() < 2) throw ConfigError("student needs at least input and output dims");
  if (!(temperature > 0.0))
    throw ParameterError(fmt::format("distillation temperature must be positive, got {}",
                                     temperature));
}

Matrix soft_targets(const Network& teacher, const Matrix& x, double temperature,
                    const std::optional<NoiseSpec>& correction,
                    std::optional<double> correction_factor) {
  if (teacher.layers().back().spec.activation != Activation::softmax)
    throw UnsupportedTaskError("soft targets need a softmax classification teacher");
  if (!(temperature > 0.0))
    throw ParameterError(fmt::format("temperature must be positive, got {}", temperature));
  const Network net =
      correction ? expectation_correction(teacher, *correction, correction_factor) : teacher;
  Matrix z = output_logits(net, x);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    for (double& v : r) v /= temperature;
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : r) v /= sum;
  }
  return z;
}

Network retrain_student(const DistillConfig& cfg, const Matrix& x, const Matrix& soft, Rng& rng) {
  cfg.validate();
  if (x.cols() != cfg.student_dims.front() || soft.cols() != cfg.student_dims.back())
    throw ShapeError(fmt::format("student dims {}..{} incompatible with data {} / targets {}",
                                 cfg.student_dims.front(), cfg.student_dims.back(),
                                 x.shape_string(), soft.shape_string()));
  Network student =
      Network::from_dims(cfg.student_dims, cfg.hidden_activation, Activation::softmax, rng);
  TrainOptions opts = cfg.train;
  opts.loss = LossKind::cross_entropy;
  return train_plain(std::move(student), x, soft, opts, rng);
}

std::size_t parameter_count(std::span<const std::size_t> dims) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) n += (dims[i] + 1) * dims[i + 1];
  return n;
}

std::vector<std::size_t> student_dims_for_budget(const Network& teacher, double budget) {
  if (!(budget > 0.0)) throw ParameterError(fmt::format("budget must be positive, got {}", budget));
  std::vector<std::size_t> base{teacher.input_dim()};
  for (const auto& l : teacher.layers()) base.push_back(l.spec.out_dim);

  auto scaled = [&base](double c) {
    std::vector<std::size_t> dims = base;
    for (std::size_t i = 1; i + 1 < dims.size(); ++i)
      dims[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c * base[i])));
    return dims;
  };
  if (base.size() == 2) return base;

  const double target = budget * static_cast<double>(parameter_count(base));
  double lo = 0.0, hi = 1.0;
  while (static_cast<double>(parameter_count(scaled(hi))) < target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (static_cast<double>(parameter_count(scaled(mid))) < target) lo = mid;
    else hi = mid;
  }
  const auto above = scaled(hi);
  const auto below = scaled(lo);
  const double da = std::abs(static_cast<double>(parameter_count(above)) - target);
  const double db = std::abs(static_cast<double>(parameter_count(below)) - target);
  return db < da ? below : above;
}

}  // namespace gsmn
