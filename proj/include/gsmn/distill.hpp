#pragma once

#include <optional>
#include <vector>

#include "gsmn/matrix.hpp"
#include "gsmn/network.hpp"
#include "gsmn/noise.hpp"
#include "gsmn/rng.hpp"
#include "gsmn/training.hpp"

namespace gsmn {

struct DistillConfig {
  // Full layer dims of the student, input through output; same depth as the teacher.
  std::vector<std::size_t> student_dims;
  Activation hidden_activation = Activation::relu;
  double temperature = 1.0;
  TrainOptions train{};

  void validate() const;
};

// Temperature-scaled softmax of the (optionally expectation-corrected) teacher.
// Only softmax classifiers are supported.
Matrix soft_targets(const Network& teacher, const Matrix& x, double temperature,
                    const std::optional<NoiseSpec>& correction = std::nullopt,
                    std::optional<double> correction_factor = std::nullopt);

// Fresh student trained with cross entropy against `soft`, without noise.
Network retrain_student(const DistillConfig& cfg, const Matrix& x, const Matrix& soft, Rng& rng);

std::size_t parameter_count(std::span<const std::size_t> dims);

// Student dims of the teacher's depth whose hidden widths are the teacher's
// scaled by one common multiplier (rounded, at least 1), chosen so the
// parameter count (biases included) is closest to budget * teacher count.
std::vector<std::size_t> student_dims_for_budget(const Network& teacher, double budget);

}  // namespace gsmn
