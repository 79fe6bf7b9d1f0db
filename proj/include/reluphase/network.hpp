#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reluphase/dataset.hpp"
#include "reluphase/scaling.hpp"

namespace reluphase {

struct NetworkParams {
  std::size_t m = 0;
  std::size_t d = 0;
  std::vector<double> a;  // length m
  std::vector<double> w;  // row-major m x d

  const double* row(std::size_t k) const { return w.data() + k * d; }
  double* row(std::size_t k) { return w.data() + k * d; }
};

struct InitConfig {
  std::size_t m = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  bool use_asi = false;
};

struct GradientPair {
  std::vector<double> da;  // length m
  std::vector<double> dw;  // row-major m x d
};

inline double relu(double z) { return z > 0.0 ? z : 0.0; }
inline double relu_prime(double z) { return z > 0.0 ? 1.0 : 0.0; }

// Standard-normal entries, drawn a[0..m) first and then W row by row, all
// from one stream seeded by config.seed. use_asi doubles the width by
// appending mirrored neurons, so ask for m/2 when exact width matters.
NetworkParams init_params(const InitConfig& config);

// Appends (-a_k, w_k) for every neuron; the doubled network outputs exactly
// zero everywhere because mirrored summation subtrees cancel bitwise.
NetworkParams apply_asi(const NetworkParams& params);

// kappa * sum_k a_k relu(w_k . x)
double forward(const NetworkParams& params, double kappa, const double* x, std::size_t d);
double forward(const NetworkParams& params, double kappa, const std::vector<double>& x);

// Original-model output (1/alpha(m)) sum_k a_k relu(w_k . x) for raw
// parameters drawn at scales beta1/beta2.
double forward_original(const ScalingSpec& spec, std::size_t m, const NetworkParams& raw_params,
                        const double* x, std::size_t d);

// Per-sample outputs over a dataset; deterministic for any thread count.
std::vector<double> outputs(const NetworkParams& params, double kappa, const Dataset& ds);

// e_i = forward(x_i) - y_i
std::vector<double> residuals(const NetworkParams& params, double kappa, const Dataset& ds);

double risk_from_residuals(const std::vector<double>& e);
double empirical_risk(const NetworkParams& params, double kappa, const Dataset& ds);

// da_k = -(kappa/(kappa_prime n)) sum_i e_i relu(w_k.x_i)
// dW_k = -(kappa kappa_prime/n) sum_i e_i a_k relu'(w_k.x_i) x_i
GradientPair gradient(const NetworkParams& params, double kappa, double kappa_prime,
                      const Dataset& ds);
void gradient_into(const NetworkParams& params, double kappa, double kappa_prime,
                   const Dataset& ds, const std::vector<double>& e, GradientPair& out);

namespace serial_ref {
// Naive single-thread reference implementations used to cross-check the
// parallel kernels in tests and benchmarks.
std::vector<double> outputs(const NetworkParams& params, double kappa, const Dataset& ds);
GradientPair gradient(const NetworkParams& params, double kappa, double kappa_prime,
                      const Dataset& ds);
}  // namespace serial_ref

struct Snapshot {
  NetworkParams params;
  std::uint64_t seed = 0;
  double kappa = 0.0;
  double kappa_prime = 0.0;
};

// Binary layout: magic "RPSNAP01", then little-endian u64 m, d, seed,
// f64 kappa, kappa_prime, then a and row-major W as f64.
void save_snapshot(const std::filesystem::path& path, const NetworkParams& params,
                   std::uint64_t seed, double kappa, double kappa_prime);
Snapshot load_snapshot(const std::filesystem::path& path);

std::string params_to_csv(const NetworkParams& params);

}  // namespace reluphase
