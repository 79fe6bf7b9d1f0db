#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reluphase/dataset.hpp"
#include "reluphase/network.hpp"

namespace reluphase {

struct SymMatrix {
  std::size_t n = 0;
  std::vector<double> v;  // row-major n x n

  SymMatrix() = default;
  explicit SymMatrix(std::size_t n_) : n(n_), v(n_ * n_, 0.0) {}
  double& at(std::size_t i, std::size_t j) { return v[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return v[i * n + j]; }
};

// Width-limit kernels of the two gradient-flow blocks and their spectra.
struct GramPair {
  SymMatrix k_a;
  SymMatrix k_w;
  double lambda_a = 0.0;
  double lambda_w = 0.0;
  double lambda = 0.0;  // min(lambda_a, lambda_w)
};

struct McGramPair : GramPair {
  SymMatrix se_a;  // per-entry standard errors
  SymMatrix se_w;
  std::size_t sample_count = 0;
};

struct FiniteGram {
  SymMatrix g_a;
  SymMatrix g_w;
  SymMatrix g;  // g_a + g_w
  double kappa = 0.0;
  double kappa_prime = 0.0;
  std::size_t m = 0;
};

// Monte Carlo estimates of
//   K_a[i][j] = E_w  relu(w.x_i) relu(w.x_j)
//   K_w[i][j] = E_aw a^2 relu'(w.x_i) relu'(w.x_j) (x_i . x_j)
// over standard normals, with per-entry standard errors. Sampling is chunked
// with per-chunk seeds, so results are identical for any thread count.
McGramPair gram_limit_mc(const Dataset& ds, std::size_t sample_count, std::uint64_t seed);

// Closed arc-cosine forms of the same expectations:
//   K_a[i][j] = (|x_i||x_j| / 2pi) (sin t + (pi - t) cos t)
//   K_w[i][j] = ((x_i . x_j) / 2pi) (pi - t),  t = angle(x_i, x_j)
GramPair gram_limit_closed(const Dataset& ds);

// Exact finite-width sums
//   G_a[i][j] = (kappa^2/(kappa' m)) sum_k relu(w_k.x_i) relu(w_k.x_j)
//   G_w[i][j] = (kappa^2 kappa'/m)  sum_k a_k^2 relu'(w_k.x_i) relu'(w_k.x_j) (x_i.x_j)
FiniteGram gram_finite(const NetworkParams& params, double kappa, double kappa_prime,
                       const Dataset& ds);

// Smallest eigenvalue by cyclic Jacobi sweeps to relative tolerance 1e-10.
// Rejects matrices whose asymmetry exceeds 1e-12 relative to the norm.
double min_eigenvalue(const SymMatrix& a);

// (m kappa^2 / n) (lambda_a/kappa' + kappa' lambda_w)
double decay_rate(std::size_t m, double kappa, double kappa_prime, std::size_t n,
                  double lambda_a, double lambda_w);

// 2 m kappa^2 lambda / n
double decay_rate_min(std::size_t m, double kappa, std::size_t n, double lambda);

double frobenius_norm(const SymMatrix& a);
double frobenius_distance(const SymMatrix& a, const SymMatrix& b);

std::string gram_to_csv(const SymMatrix& a);

}  // namespace reluphase
