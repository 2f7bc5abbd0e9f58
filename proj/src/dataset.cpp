#include "gsmn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>

#include "gsmn/error.hpp"

namespace gsmn {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size())
    throw FormatError(fmt::format("{}: truncated header at offset {}", path.string(), offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value))
    throw FormatError(fmt::format("csv: non-numeric cell \"{}\" at row {}, column {}", cell, row,
                                  col));
  return value;
}

}  // namespace

std::string to_string(Task t) { return t == Task::classification ? "classification" : "regression"; }

Task parse_task(const std::string& name) {
  if (name == "classification") return Task::classification;
  if (name == "regression") return Task::regression;
  throw ConfigError(fmt::format("unknown task \"{}\"", name));
}

void Dataset::validate() const {
  if (features.rows() != targets.rows())
    throw FormatError(fmt::format("dataset has {} feature rows but {} target rows",
                                  features.rows(), targets.rows()));
  if (!features.all_finite() || !targets.all_finite())
    throw FormatError("dataset contains non-finite values");
  if (task == Task::classification) {
    for (std::size_t i = 0; i < targets.rows(); ++i) {
      double sum = 0.0;
      for (double v : targets.row(i)) {
        if (v != 0.0 && v != 1.0) throw FormatError(fmt::format("row {} is not one-hot", i));
        sum += v;
      }
      if (sum != 1.0) throw FormatError(fmt::format("row {} is not one-hot", i));
    }
  }
}

Dataset take_rows(const Dataset& ds, std::size_t begin, std::size_t end, Split split) {
  return Dataset{slice_rows(ds.features, begin, end), slice_rows(ds.targets, begin, end), ds.task,
                 split};
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t offset, std::optional<std::size_t> limit) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);

  const auto img_magic = read_be32(img, 0, images);
  if (img_magic != 0x00000803u)
    throw FormatError(fmt::format("{}: bad image magic 0x{:08x} at offset 0", images.string(),
                                  img_magic));
  const auto lab_magic = read_be32(lab, 0, labels);
  if (lab_magic != 0x00000801u)
    throw FormatError(fmt::format("{}: bad label magic 0x{:08x} at offset 0", labels.string(),
                                  lab_magic));

  const std::size_t n_images = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t n_labels = read_be32(lab, 4, labels);
  if (n_images != n_labels)
    throw FormatError(fmt::format("{}: {} images but {} labels (count at offset 4)",
                                  images.string(), n_images, n_labels));
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + n_images * pixels)
    throw FormatError(fmt::format("{}: truncated pixel data at offset {}", images.string(),
                                  img.size()));
  if (lab.size() < 8 + n_labels)
    throw FormatError(fmt::format("{}: truncated label data at offset {}", labels.string(),
                                  lab.size()));
  if (offset > n_images)
    throw ConfigError(fmt::format("idx offset {} beyond {} rows", offset, n_images));

  const std::size_t count = std::min(n_images - offset, limit.value_or(n_images));
  Dataset ds{Matrix(count, pixels), Matrix(count, 10), Task::classification, Split::train};
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = offset + i;
    auto row = ds.features.row(i);
    for (std::size_t p = 0; p < pixels; ++p) row[p] = img[16 + src * pixels + p] / 255.0;
    const std::uint8_t label = lab[8 + src];
    if (label > 9)
      throw FormatError(fmt::format("{}: label {} out of range at offset {}", labels.string(),
                                    label, 8 + src));
    ds.targets(i, label) = 1.0;
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw FormatError(fmt::format("{}: missing header", path.string()));
  const auto header = split_csv_line(line);
  const auto it = std::find(header.begin(), header.end(), options.target_column);
  if (it == header.end())
    throw ConfigError(fmt::format("{}: target column \"{}\" not found", path.string(),
                                  options.target_column));
  const auto target_col = static_cast<std::size_t>(std::distance(header.begin(), it));

  std::vector<double> features;
  std::vector<double> targets;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw FormatError(fmt::format("{}: row {} has {} cells, header has {}", path.string(), row,
                                    cells.size(), header.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = parse_cell(cells[c], row, c);
      (c == target_col ? targets : features).push_back(v);
    }
  }
  const std::size_t n = targets.size();
  const std::size_t d = header.size() - 1;

  Dataset ds;
  ds.task = options.task;
  ds.features = Matrix(n, d, std::move(features));
  if (options.task == Task::regression) {
    ds.targets = Matrix(n, 1, std::move(targets));
  } else {
    std::size_t classes = options.num_classes;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = targets[i];
      if (v < 0.0 || v != std::floor(v))
        throw FormatError(fmt::format("{}: label {} at row {} is not a class id", path.string(),
                                      v, i + 1));
      if (options.num_classes == 0) classes = std::max(classes, static_cast<std::size_t>(v) + 1);
      else if (static_cast<std::size_t>(v) >= classes)
        throw FormatError(fmt::format("{}: label {} at row {} exceeds {} classes", path.string(),
                                      v, i + 1, classes));
    }
    ds.targets = Matrix(n, classes);
    for (std::size_t i = 0; i < n; ++i) ds.targets(i, static_cast<std::size_t>(targets[i])) = 1.0;
  }
  return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  if (ds.task == Task::regression && ds.targets.cols() != 1)
    throw FormatError("write_csv supports a single regression target");
  auto out = fmt::output_file(path.string());
  for (std::size_t j = 0; j < ds.features.cols(); ++j) out.print("f{},", j);
  out.print("target\n");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.features.row(i)) out.print("{},", v);
    if (ds.task == Task::regression) {
      out.print("{}\n", ds.targets(i, 0));
    } else {
      auto t = ds.targets.row(i);
      out.print("{}\n", std::distance(t.begin(), std::max_element(t.begin(), t.end())));
    }
  }
}

Standardizer Standardizer::fit(const Matrix& train) {
  Standardizer s;
  s.means_.assign(train.cols(), 0.0);
  s.scales_.assign(train.cols(), 1.0);
  if (train.rows() == 0) return s;
  const double n = static_cast<double>(train.rows());
  for (std::size_t j = 0; j < train.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < train.rows(); ++i) mean += train(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < train.rows(); ++i) var += (train(i, j) - mean) * (train(i, j) - mean);
    var /= n;
    s.means_[j] = mean;
    // Constant columns map to zero rather than dividing by ~0.
    s.scales_[j] = var > kVarianceFloor ? 1.0 / std::sqrt(var) : 0.0;
  }
  return s;
}

Matrix Standardizer::transform(const Matrix& m) const {
  if (m.cols() != means_.size())
    throw ShapeError(fmt::format("standardizer fitted on {} columns applied to {}", means_.size(),
                                 m.shape_string()));
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - means_[j]) * scales_[j];
  }
  return out;
}

SparseRegression synth_sparse_regression(std::size_t n, std::size_t d,
                                         std::span<const std::size_t> active_set, double w_scale,
                                         double noise_sd, Rng& rng) {
  std::vector<double> w(d, 0.0);
  for (std::size_t j : active_set) {
    if (j >= d) throw ParameterError(fmt::format("active index {} outside {} features", j, d));
    w[j] = rng.bernoulli(0.5) ? w_scale : -w_scale;
  }
  SparseRegression out{Dataset{Matrix(n, d), Matrix(n, 1), Task::regression, Split::train}, w};
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = rng.normal();
      out.data.features(i, j) = x;
      y += x * w[j];
    }
    out.data.targets(i, 0) = y + noise_sd * rng.normal();
  }
  return out;
}

Dataset synth_two_blobs(std::size_t n, double separation, Rng& rng) {
  const double angle = 2.0 * 3.14159265358979323846 * rng.uniform();
  const double dx = std::cos(angle) * separation / 2.0;
  const double dy = std::sin(angle) * separation / 2.0;
  Dataset ds{Matrix(n, 2), Matrix(n, 2), Task::classification, Split::train};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    const double sign = label == 0 ? -1.0 : 1.0;
    ds.features(i, 0) = sign * dx + rng.normal();
    ds.features(i, 1) = sign * dy + rng.normal();
    ds.targets(i, label) = 1.0;
  }
  return ds;
}

}  // namespace gsmn
