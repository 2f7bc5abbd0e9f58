#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsmn/matrix.hpp"
#include "gsmn/rng.hpp"

namespace gsmn {

enum class Task { classification, regression };
enum class Split { train, validation, test };

std::string to_string(Task t);
Task parse_task(const std::string& name);

// Targets are one-hot for classification, raw values for regression.
struct Dataset {
  Matrix features;
  Matrix targets;
  Task task = Task::classification;
  Split split = Split::train;

  std::size_t size() const noexcept { return features.rows(); }
  // Throws FormatError when the invariants do not hold.
  void validate() const;
};

Dataset take_rows(const Dataset& ds, std::size_t begin, std::size_t end, Split split);

// MNIST-style IDX pair; pixels scaled to [0, 1], labels one-hot over 10 classes.
// `offset`/`limit` select a contiguous block of rows in file order.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t offset = 0, std::optional<std::size_t> limit = std::nullopt);

struct CsvOptions {
  std::string target_column;
  Task task = Task::regression;
  // Classification only: 0 infers max label + 1.
  std::size_t num_classes = 0;
};

// Raw load: header row, numeric cells. Classification labels are integer class ids.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options);
// Inverse of load_csv: features f0..f{d-1} followed by a "target" column.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

// Per-column affine standardization fitted on a training split only.
class Standardizer {
 public:
  static constexpr double kVarianceFloor = 1e-12;

  static Standardizer fit(const Matrix& train);
  Matrix transform(const Matrix& m) const;

  std::span<const double> means() const noexcept { return means_; }
  std::span<const double> scales() const noexcept { return scales_; }

 private:
  std::vector<double> means_;
  std::vector<double> scales_;
};

struct SparseRegression {
  Dataset data;
  std::vector<double> true_weights;
};

// X ~ N(0, 1); y = X w* + eps with w* = +-w_scale on active_set (0-based), 0 elsewhere.
SparseRegression synth_sparse_regression(std::size_t n, std::size_t d,
                                         std::span<const std::size_t> active_set, double w_scale,
                                         double noise_sd, Rng& rng);

// Two Gaussian blobs in 2-D separated along a random direction; one-hot targets
// over two classes. Linearly separable with overwhelming probability.
Dataset synth_two_blobs(std::size_t n, double separation, Rng& rng);

}  // namespace gsmn
