#include "reluphase/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "reluphase/io_util.hpp"

namespace reluphase {

namespace {

constexpr double kPi = 3.14159265358979323846;

double dot(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += a[j] * b[j];
  return s;
}

double entropy_nats(const std::vector<double>& mass) {
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (double v : mass) {
    if (v > 0.0) {
      const double p = v / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

FeatureCloud extract_features(const NetworkParams& params) {
  FeatureCloud cloud;
  cloud.m = params.m;
  cloud.d = params.d;
  cloud.amplitude.resize(params.m);
  cloud.orientation.assign(params.m * params.d, 0.0);
  cloud.inactive.assign(params.m, 0);
  for (std::size_t k = 0; k < params.m; ++k) {
    const double* wk = params.row(k);
    const double norm = std::sqrt(dot(wk, wk, params.d));
    if (norm == 0.0) {
      cloud.inactive[k] = 1;
      cloud.amplitude[k] = 0.0;
      continue;
    }
    cloud.amplitude[k] = std::fabs(params.a[k]) * norm;
    double* ok = cloud.orientation.data() + k * params.d;
    for (std::size_t j = 0; j < params.d; ++j) ok[j] = wk[j] / norm;
  }
  return cloud;
}

double angle_1d(const double* orientation, std::size_t d) {
  if (d != 2) throw std::invalid_argument("angle_1d needs d = 2");
  double angle = std::atan2(orientation[1], orientation[0]);
  if (angle == kPi) angle = -kPi;
  return angle;
}

std::vector<double> default_reference(std::size_t d) {
  if (d < 1) throw std::invalid_argument("default_reference needs d >= 1");
  return std::vector<double>(d, 1.0 / std::sqrt(static_cast<double>(d)));
}

std::vector<std::pair<double, double>> project(const FeatureCloud& cloud,
                                               const std::vector<double>& reference) {
  if (reference.size() != cloud.d) throw std::invalid_argument("project: dimension mismatch");
  const double norm = std::sqrt(dot(reference.data(), reference.data(), cloud.d));
  if (std::fabs(norm - 1.0) > 1e-8) {
    throw std::invalid_argument("project: reference must be unit length");
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(cloud.m);
  for (std::size_t k = 0; k < cloud.m; ++k) {
    out.emplace_back(cloud.amplitude[k], dot(cloud.row(k), reference.data(), cloud.d));
  }
  return out;
}

CondensationSummary condensation_summary(const FeatureCloud& cloud, double amplitude_fraction,
                                         double cosine_tolerance) {
  if (cloud.m == 0) throw std::invalid_argument("condensation_summary: empty cloud");
  if (!(amplitude_fraction > 0.0) || !(amplitude_fraction < 1.0)) {
    throw std::invalid_argument("amplitude_fraction must be in (0,1)");
  }
  if (!(cosine_tolerance > 0.0) || !(cosine_tolerance < 1.0)) {
    throw std::invalid_argument("cosine_tolerance must be in (0,1)");
  }
  const double max_a = *std::max_element(cloud.amplitude.begin(), cloud.amplitude.end());
  if (!(max_a > 0.0)) {
    throw std::runtime_error("condensation_summary: all amplitudes are zero");
  }
  const double threshold = amplitude_fraction * max_a;

  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < cloud.m; ++k) {
    if (!cloud.inactive[k] && cloud.amplitude[k] >= threshold) active.push_back(k);
  }
  std::stable_sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
    return cloud.amplitude[a] > cloud.amplitude[b];
  });

  struct Cluster {
    std::vector<double> centroid;      // unit length
    std::vector<double> weighted_sum;  // sum of A_k * orientation_k
    double mass = 0.0;
  };
  std::vector<Cluster> clusters;
  const double join_cos = 1.0 - cosine_tolerance;
  for (std::size_t k : active) {
    const double* ok = cloud.row(k);
    double best_cos = -2.0;
    std::size_t best = 0;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const double cs = dot(clusters[c].centroid.data(), ok, cloud.d);
      if (cs > best_cos) {
        best_cos = cs;
        best = c;
      }
    }
    if (clusters.empty() || best_cos < join_cos) {
      Cluster fresh;
      fresh.centroid.assign(ok, ok + cloud.d);
      fresh.weighted_sum.resize(cloud.d);
      for (std::size_t j = 0; j < cloud.d; ++j) {
        fresh.weighted_sum[j] = cloud.amplitude[k] * ok[j];
      }
      fresh.mass = cloud.amplitude[k];
      clusters.push_back(std::move(fresh));
    } else {
      Cluster& cl = clusters[best];
      for (std::size_t j = 0; j < cloud.d; ++j) cl.weighted_sum[j] += cloud.amplitude[k] * ok[j];
      cl.mass += cloud.amplitude[k];
      const double norm = std::sqrt(dot(cl.weighted_sum.data(), cl.weighted_sum.data(), cloud.d));
      if (norm > 1e-12) {
        for (std::size_t j = 0; j < cloud.d; ++j) cl.centroid[j] = cl.weighted_sum[j] / norm;
      }
    }
  }

  CondensationSummary summary;
  summary.active_count = active.size();
  summary.cluster_count = clusters.size();
  summary.amplitude_threshold = threshold;
  summary.cosine_tolerance = cosine_tolerance;
  if (cloud.d == 2) {
    std::vector<double> bins(kAngleBins, 0.0);
    for (std::size_t k : active) {
      const double angle = angle_1d(cloud.row(k), 2);
      auto bin = static_cast<std::size_t>((angle + kPi) / (2.0 * kPi) * kAngleBins);
      if (bin >= kAngleBins) bin = kAngleBins - 1;
      bins[bin] += cloud.amplitude[k];
    }
    summary.angular_entropy = entropy_nats(bins);
  } else {
    std::vector<double> mass;
    mass.reserve(clusters.size());
    for (const Cluster& cl : clusters) mass.push_back(cl.mass);
    summary.angular_entropy = entropy_nats(mass);
  }
  return summary;
}

std::string scatter_csv(const FeatureCloud& cloud, const std::string& tag) {
  std::string out;
  if (cloud.d == 2) {
    for (std::size_t k = 0; k < cloud.m; ++k) {
      if (cloud.inactive[k]) continue;
      out += tag;
      out += ',';
      out += g17(cloud.amplitude[k]);
      out += ',';
      out += g17(angle_1d(cloud.row(k), 2));
      out += '\n';
    }
  } else {
    const std::vector<double> ref = default_reference(cloud.d);
    for (std::size_t k = 0; k < cloud.m; ++k) {
      if (cloud.inactive[k]) continue;
      out += tag;
      out += ',';
      out += g17(cloud.amplitude[k]);
      out += ',';
      out += g17(dot(cloud.row(k), ref.data(), cloud.d));
      out += '\n';
    }
  }
  return out;
}

}  // namespace reluphase
