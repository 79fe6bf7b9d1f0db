#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "reluphase/network.hpp"

namespace reluphase {

// Per-neuron amplitude A_k = |a_k| |w_k|_2 and unit orientation w_k/|w_k|_2.
// Zero-norm rows are flagged inactive and keep a zero orientation row.
struct FeatureCloud {
  std::size_t m = 0;
  std::size_t d = 0;
  std::vector<double> amplitude;        // length m
  std::vector<double> orientation;      // row-major m x d
  std::vector<unsigned char> inactive;  // length m, 1 = zero-norm row

  const double* row(std::size_t k) const { return orientation.data() + k * d; }
};

struct CondensationSummary {
  std::size_t active_count = 0;
  std::size_t cluster_count = 0;
  double angular_entropy = 0.0;  // nats
  double amplitude_threshold = 0.0;
  double cosine_tolerance = 0.0;
};

FeatureCloud extract_features(const NetworkParams& params);

// Angle of a unit 2-vector to the x-axis in [-pi, pi); (-1, 0) maps to -pi.
double angle_1d(const double* orientation, std::size_t d);

// All-ones direction scaled to unit length.
std::vector<double> default_reference(std::size_t d);

// (A_k, orientation_k . reference) per neuron; inactive rows project to 0.
std::vector<std::pair<double, double>> project(const FeatureCloud& cloud,
                                               const std::vector<double>& reference);

// Active set = {k : A_k >= amplitude_fraction * max_j A_j}. Active neurons
// are processed by decreasing amplitude; a neuron joins the cluster whose
// centroid has the highest cosine similarity if that similarity reaches
// 1 - cosine_tolerance, otherwise it opens a new cluster. Centroids are
// amplitude-weighted means, renormalized after every join. Entropy is over
// amplitude mass in a fixed 64-bin angle histogram for d = 2, and over
// cluster masses for d > 2.
CondensationSummary condensation_summary(const FeatureCloud& cloud,
                                         double amplitude_fraction = 0.1,
                                         double cosine_tolerance = 0.05);

// Rows "tag,amplitude,coord" where coord is the 1-d angle when d = 2 and the
// projection onto the default reference direction otherwise.
std::string scatter_csv(const FeatureCloud& cloud, const std::string& tag);

inline constexpr std::size_t kAngleBins = 64;

}  // namespace reluphase
