#include "reluphase/gram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reluphase/io_util.hpp"
#include "reluphase/reduction.hpp"
#include "reluphase/rng.hpp"

namespace reluphase {

namespace {

constexpr std::size_t kMcChunk = 65536;
constexpr double kPi = 3.14159265358979323846;

double dot(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += a[j] * b[j];
  return s;
}

std::size_t upper_count(std::size_t n) { return n * (n + 1) / 2; }

// Upper-triangle entry order: (0,0),(0,1),...,(0,n-1),(1,1),...
std::size_t upper_index(std::size_t n, std::size_t i, std::size_t j) {
  return i * n - i * (i + 1) / 2 + j;
}

void fill_symmetric(SymMatrix& m, const std::vector<double>& upper) {
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = i; j < m.n; ++j) {
      const double v = upper[upper_index(m.n, i, j)];
      m.at(i, j) = v;
      m.at(j, i) = v;
    }
  }
}

void set_spectrum(GramPair& pair) {
  pair.lambda_a = min_eigenvalue(pair.k_a);
  pair.lambda_w = min_eigenvalue(pair.k_w);
  pair.lambda = std::min(pair.lambda_a, pair.lambda_w);
}

}  // namespace

McGramPair gram_limit_mc(const Dataset& ds, std::size_t sample_count, std::uint64_t seed) {
  if (sample_count < 1) throw std::invalid_argument("gram_limit_mc needs sample_count >= 1");
  const std::size_t n = ds.n;
  const std::size_t d = ds.d;
  const std::size_t u = upper_count(n);
  const std::size_t chunks = (sample_count + kMcChunk - 1) / kMcChunk;
  // Per chunk: sums and sums of squares for both kernels' upper triangles.
  const std::size_t width = 4 * u;
  std::vector<double> partials(chunks * width, 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t cs = 0; cs < static_cast<std::ptrdiff_t>(chunks); ++cs) {
    const std::size_t c = static_cast<std::size_t>(cs);
    const std::size_t begin = c * kMcChunk;
    const std::size_t end = std::min(begin + kMcChunk, sample_count);
    Rng rng(mix_seed(seed, {c}));
    std::vector<double> w(d);
    std::vector<double> act(n);   // relu(w.x_i)
    std::vector<double> gate(n);  // relu'(w.x_i)
    double* part = partials.data() + c * width;
    double* sum_a = part;
    double* sq_a = part + u;
    double* sum_w = part + 2 * u;
    double* sq_w = part + 3 * u;
    for (std::size_t s = begin; s < end; ++s) {
      for (std::size_t j = 0; j < d; ++j) w[j] = rng.normal();
      const double a = rng.normal();
      const double a2 = a * a;
      for (std::size_t i = 0; i < n; ++i) {
        const double z = dot(w.data(), ds.row(i), d);
        act[i] = relu(z);
        gate[i] = relu_prime(z);
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          const std::size_t idx = upper_index(n, i, j);
          const double va = act[i] * act[j];
          const double vw = a2 * gate[i] * gate[j] * dot(ds.row(i), ds.row(j), d);
          sum_a[idx] += va;
          sq_a[idx] += va * va;
          sum_w[idx] += vw;
          sq_w[idx] += vw * vw;
        }
      }
    }
  }

  const std::vector<double> total = combine_leaf_partials(partials, chunks, width);
  const double count = static_cast<double>(sample_count);

  McGramPair out;
  out.sample_count = sample_count;
  out.k_a = SymMatrix(n);
  out.k_w = SymMatrix(n);
  out.se_a = SymMatrix(n);
  out.se_w = SymMatrix(n);
  std::vector<double> mean_a(u), mean_w(u), err_a(u), err_w(u);
  for (std::size_t idx = 0; idx < u; ++idx) {
    const double sa = total[idx];
    const double qa = total[u + idx];
    const double sw = total[2 * u + idx];
    const double qw = total[3 * u + idx];
    mean_a[idx] = sa / count;
    mean_w[idx] = sw / count;
    if (sample_count > 1) {
      const double var_a = std::max(0.0, (qa - sa * sa / count) / (count - 1.0));
      const double var_w = std::max(0.0, (qw - sw * sw / count) / (count - 1.0));
      err_a[idx] = std::sqrt(var_a / count);
      err_w[idx] = std::sqrt(var_w / count);
    }
  }
  fill_symmetric(out.k_a, mean_a);
  fill_symmetric(out.k_w, mean_w);
  fill_symmetric(out.se_a, err_a);
  fill_symmetric(out.se_w, err_w);
  set_spectrum(out);
  return out;
}

GramPair gram_limit_closed(const Dataset& ds) {
  const std::size_t n = ds.n;
  GramPair out;
  out.k_a = SymMatrix(n);
  out.k_w = SymMatrix(n);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = std::sqrt(dot(ds.row(i), ds.row(i), ds.d));
    if (norms[i] == 0.0) {
      throw std::invalid_argument("gram_limit_closed: zero-norm input row " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double ip = dot(ds.row(i), ds.row(j), ds.d);
      const double c = std::clamp(ip / (norms[i] * norms[j]), -1.0, 1.0);
      const double theta = std::acos(c);
      const double ka =
          (norms[i] * norms[j] / (2.0 * kPi)) * (std::sin(theta) + (kPi - theta) * c);
      const double kw = (ip / (2.0 * kPi)) * (kPi - theta);
      out.k_a.at(i, j) = ka;
      out.k_a.at(j, i) = ka;
      out.k_w.at(i, j) = kw;
      out.k_w.at(j, i) = kw;
    }
  }
  set_spectrum(out);
  return out;
}

FiniteGram gram_finite(const NetworkParams& params, double kappa, double kappa_prime,
                       const Dataset& ds) {
  if (params.d != ds.d) throw std::invalid_argument("gram_finite: dimension mismatch");
  if (!(kappa > 0.0) || !(kappa_prime > 0.0)) {
    throw std::invalid_argument("gram_finite needs kappa, kappa_prime > 0");
  }
  const std::size_t n = ds.n;
  const std::size_t u = upper_count(n);
  const std::size_t width = 2 * u;
  const auto leaves = leaf_ranges(params.m, kReductionLeaf);
  std::vector<double> partials(leaves.size() * width, 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t li = 0; li < static_cast<std::ptrdiff_t>(leaves.size()); ++li) {
    const auto [lo, hi] = leaves[static_cast<std::size_t>(li)];
    double* part = partials.data() + static_cast<std::size_t>(li) * width;
    std::vector<double> act(n);
    std::vector<double> gate(n);
    for (std::size_t k = lo; k < hi; ++k) {
      const double* wk = params.row(k);
      const double ak2 = params.a[k] * params.a[k];
      for (std::size_t i = 0; i < n; ++i) {
        const double z = dot(wk, ds.row(i), ds.d);
        act[i] = relu(z);
        gate[i] = relu_prime(z);
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          const std::size_t idx = upper_index(n, i, j);
          part[idx] += act[i] * act[j];
          part[u + idx] += ak2 * gate[i] * gate[j];
        }
      }
    }
  }

  const std::vector<double> total = combine_leaf_partials(partials, leaves.size(), width);
  const double md = static_cast<double>(params.m);
  const double ca = kappa * kappa / (kappa_prime * md);
  const double cw = kappa * kappa * kappa_prime / md;

  FiniteGram out;
  out.kappa = kappa;
  out.kappa_prime = kappa_prime;
  out.m = params.m;
  out.g_a = SymMatrix(n);
  out.g_w = SymMatrix(n);
  out.g = SymMatrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const std::size_t idx = upper_index(n, i, j);
      const double ga = ca * total[idx];
      const double gw = cw * total[u + idx] * dot(ds.row(i), ds.row(j), ds.d);
      out.g_a.at(i, j) = ga;
      out.g_a.at(j, i) = ga;
      out.g_w.at(i, j) = gw;
      out.g_w.at(j, i) = gw;
      out.g.at(i, j) = ga + gw;
      out.g.at(j, i) = ga + gw;
    }
  }
  return out;
}

double min_eigenvalue(const SymMatrix& a) {
  const std::size_t n = a.n;
  if (n == 0) throw std::invalid_argument("min_eigenvalue: empty matrix");
  if (a.v.size() != n * n) throw std::invalid_argument("min_eigenvalue: size mismatch");

  const double fro = frobenius_norm(a);
  const double sym_tol = 1e-12 * std::max(1.0, fro);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::fabs(a.at(i, j) - a.at(j, i)) > sym_tol) {
        throw std::invalid_argument("min_eigenvalue: matrix not symmetric");
      }
    }
  }
  if (n == 1) return a.at(0, 0);
  if (fro == 0.0) return 0.0;

  SymMatrix work = a;
  const double stop = 1e-10 * fro;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * work.at(i, j) * work.at(i, j);
    }
    if (std::sqrt(off) <= stop) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = work.at(p, q);
        if (apq == 0.0) continue;
        const double tau = (work.at(q, q) - work.at(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(tau * tau + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = work.at(k, p);
          const double akq = work.at(k, q);
          work.at(k, p) = c * akp - s * akq;
          work.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = work.at(p, k);
          const double aqk = work.at(q, k);
          work.at(p, k) = c * apk - s * aqk;
          work.at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  double min_diag = work.at(0, 0);
  for (std::size_t i = 1; i < n; ++i) min_diag = std::min(min_diag, work.at(i, i));
  return min_diag;
}

double decay_rate(std::size_t m, double kappa, double kappa_prime, std::size_t n,
                  double lambda_a, double lambda_w) {
  if (m < 1 || n < 1 || !(kappa > 0.0) || !(kappa_prime > 0.0)) {
    throw std::invalid_argument("decay_rate needs positive inputs");
  }
  return (static_cast<double>(m) * kappa * kappa / static_cast<double>(n)) *
         (lambda_a / kappa_prime + kappa_prime * lambda_w);
}

double decay_rate_min(std::size_t m, double kappa, std::size_t n, double lambda) {
  if (m < 1 || n < 1 || !(kappa > 0.0)) {
    throw std::invalid_argument("decay_rate_min needs positive inputs");
  }
  return 2.0 * static_cast<double>(m) * kappa * kappa * lambda / static_cast<double>(n);
}

double frobenius_norm(const SymMatrix& a) {
  double s = 0.0;
  for (double v : a.v) s += v * v;
  return std::sqrt(s);
}

double frobenius_distance(const SymMatrix& a, const SymMatrix& b) {
  if (a.n != b.n) throw std::invalid_argument("frobenius_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const double diff = a.v[i] - b.v[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

std::string gram_to_csv(const SymMatrix& a) {
  std::string out;
  for (std::size_t i = 0; i < a.n; ++i) {
    for (std::size_t j = 0; j < a.n; ++j) {
      if (j) out += ',';
      out += g17(a.at(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace reluphase
