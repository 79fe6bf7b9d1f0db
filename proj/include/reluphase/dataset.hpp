#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace reluphase {

// Training set with the bias absorbed as a fixed last input coordinate.
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> x;  // row-major n x d, x[i*d + d-1] == 1
  std::vector<double> y;  // length n

  const double* row(std::size_t i) const { return x.data() + i * d; }
};

// 1-d inputs with distinct abscissae; rows become (input, 1).
Dataset synthetic_1d(const std::vector<std::pair<double, double>>& points);

// The 4-point set used as the built-in training problem.
Dataset default_dataset();

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

// Report-only check of the Dataset invariants; theory_mode additionally
// requires coordinates and targets in [0,1] and max target >= 1/2.
ValidationReport validate(const Dataset& ds, bool theory_mode);

// IDX image/label pair -> Dataset: pixels / 255 with a bias coordinate
// appended, y = label * label_scale. count = 0 loads every sample.
Dataset from_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::size_t count = 0,
                 double label_scale = 1.0 / 9.0);

std::string dataset_to_csv(const Dataset& ds);
Dataset dataset_from_csv(const std::string& text);

std::uint64_t dataset_fingerprint(const Dataset& ds);

}  // namespace reluphase
