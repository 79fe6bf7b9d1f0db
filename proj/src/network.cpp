#include "reluphase/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "reluphase/io_util.hpp"
#include "reluphase/reduction.hpp"
#include "reluphase/rng.hpp"

namespace reluphase {

namespace {

double dot(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += a[j] * b[j];
  return s;
}

void check_dims(const NetworkParams& params, std::size_t d, const char* what) {
  if (params.d != d) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  if (params.a.size() != params.m || params.w.size() != params.m * params.d) {
    throw std::invalid_argument(std::string(what) + ": inconsistent parameter sizes");
  }
}

}  // namespace

NetworkParams init_params(const InitConfig& config) {
  if (config.m < 1 || config.d < 2) throw std::invalid_argument("init_params needs m >= 1, d >= 2");
  NetworkParams params;
  params.m = config.m;
  params.d = config.d;
  params.a.resize(config.m);
  params.w.resize(config.m * config.d);
  Rng rng(config.seed);
  for (std::size_t k = 0; k < config.m; ++k) params.a[k] = rng.normal();
  for (std::size_t i = 0; i < config.m * config.d; ++i) params.w[i] = rng.normal();
  if (config.use_asi) return apply_asi(params);
  return params;
}

NetworkParams apply_asi(const NetworkParams& params) {
  check_dims(params, params.d, "apply_asi");
  NetworkParams out;
  out.m = 2 * params.m;
  out.d = params.d;
  out.a = params.a;
  out.a.reserve(out.m);
  for (double ak : params.a) out.a.push_back(-ak);
  out.w = params.w;
  out.w.reserve(out.m * out.d);
  out.w.insert(out.w.end(), params.w.begin(), params.w.end());
  return out;
}

double forward(const NetworkParams& params, double kappa, const double* x, std::size_t d) {
  check_dims(params, d, "forward");
  const double total = pairwise_sum(params.m, kReductionLeaf, [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t k = lo; k < hi; ++k) s += params.a[k] * relu(dot(params.row(k), x, d));
    return s;
  });
  return kappa * total;
}

double forward(const NetworkParams& params, double kappa, const std::vector<double>& x) {
  return forward(params, kappa, x.data(), x.size());
}

double forward_original(const ScalingSpec& spec, std::size_t m, const NetworkParams& raw_params,
                        const double* x, std::size_t d) {
  return forward(raw_params, 1.0 / spec.alpha.value(m), x, d);
}

std::vector<double> outputs(const NetworkParams& params, double kappa, const Dataset& ds) {
  check_dims(params, ds.d, "outputs");
  const auto leaves = leaf_ranges(params.m, kReductionLeaf);
  const std::size_t n = ds.n;
  std::vector<double> partials(leaves.size() * n, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t li = 0; li < static_cast<std::ptrdiff_t>(leaves.size()); ++li) {
    double* part = partials.data() + static_cast<std::size_t>(li) * n;
    const auto [lo, hi] = leaves[static_cast<std::size_t>(li)];
    for (std::size_t k = lo; k < hi; ++k) {
      const double* wk = params.row(k);
      const double ak = params.a[k];
      for (std::size_t i = 0; i < n; ++i) part[i] += ak * relu(dot(wk, ds.row(i), ds.d));
    }
  }
  std::vector<double> out = combine_leaf_partials(partials, leaves.size(), n);
  for (double& v : out) v *= kappa;
  return out;
}

std::vector<double> residuals(const NetworkParams& params, double kappa, const Dataset& ds) {
  std::vector<double> e = outputs(params, kappa, ds);
  for (std::size_t i = 0; i < ds.n; ++i) e[i] -= ds.y[i];
  return e;
}

double risk_from_residuals(const std::vector<double>& e) {
  if (e.empty()) throw std::invalid_argument("risk_from_residuals: empty residual vector");
  const double total = pairwise_sum(e.size(), kReductionLeaf, [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += e[i] * e[i];
    return s;
  });
  return total / (2.0 * static_cast<double>(e.size()));
}

double empirical_risk(const NetworkParams& params, double kappa, const Dataset& ds) {
  return risk_from_residuals(residuals(params, kappa, ds));
}

void gradient_into(const NetworkParams& params, double kappa, double kappa_prime,
                   const Dataset& ds, const std::vector<double>& e, GradientPair& out) {
  check_dims(params, ds.d, "gradient");
  if (!(kappa_prime > 0.0)) throw std::invalid_argument("gradient needs kappa_prime > 0");
  if (e.size() != ds.n) throw std::invalid_argument("gradient: residual size mismatch");
  const std::size_t n = ds.n;
  const std::size_t d = ds.d;
  const double ca = -kappa / (kappa_prime * static_cast<double>(n));
  const double cw = -kappa * kappa_prime / static_cast<double>(n);
  out.da.assign(params.m, 0.0);
  out.dw.assign(params.m * d, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ks = 0; ks < static_cast<std::ptrdiff_t>(params.m); ++ks) {
    const std::size_t k = static_cast<std::size_t>(ks);
    const double* wk = params.row(k);
    const double ak = params.a[k];
    double sa = 0.0;
    double* dwk = out.dw.data() + k * d;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dot(wk, ds.row(i), d);
      sa += e[i] * relu(z);
      const double g = e[i] * ak * relu_prime(z);
      if (g != 0.0) {
        const double* xi = ds.row(i);
        for (std::size_t j = 0; j < d; ++j) dwk[j] += g * xi[j];
      }
    }
    out.da[k] = ca * sa;
    for (std::size_t j = 0; j < d; ++j) dwk[j] *= cw;
  }
}

GradientPair gradient(const NetworkParams& params, double kappa, double kappa_prime,
                      const Dataset& ds) {
  GradientPair out;
  gradient_into(params, kappa, kappa_prime, ds, residuals(params, kappa, ds), out);
  return out;
}

namespace serial_ref {

std::vector<double> outputs(const NetworkParams& params, double kappa, const Dataset& ds) {
  std::vector<double> out(ds.n, 0.0);
  for (std::size_t i = 0; i < ds.n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < params.m; ++k) {
      s += params.a[k] * relu(dot(params.row(k), ds.row(i), ds.d));
    }
    out[i] = kappa * s;
  }
  return out;
}

GradientPair gradient(const NetworkParams& params, double kappa, double kappa_prime,
                      const Dataset& ds) {
  std::vector<double> e = serial_ref::outputs(params, kappa, ds);
  for (std::size_t i = 0; i < ds.n; ++i) e[i] -= ds.y[i];
  const double ca = -kappa / (kappa_prime * static_cast<double>(ds.n));
  const double cw = -kappa * kappa_prime / static_cast<double>(ds.n);
  GradientPair out;
  out.da.assign(params.m, 0.0);
  out.dw.assign(params.m * ds.d, 0.0);
  for (std::size_t k = 0; k < params.m; ++k) {
    const double* wk = params.row(k);
    double sa = 0.0;
    double* dwk = out.dw.data() + k * ds.d;
    for (std::size_t i = 0; i < ds.n; ++i) {
      const double z = dot(wk, ds.row(i), ds.d);
      sa += e[i] * relu(z);
      const double g = e[i] * params.a[k] * relu_prime(z);
      for (std::size_t j = 0; j < ds.d; ++j) dwk[j] += g * ds.row(i)[j];
    }
    out.da[k] = ca * sa;
    for (std::size_t j = 0; j < ds.d; ++j) dwk[j] *= cw;
  }
  return out;
}

}  // namespace serial_ref

namespace {

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(const std::string& buf, std::size_t& pos) {
  if (pos + 8 > buf.size()) throw std::runtime_error("truncated snapshot");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= std::uint64_t(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  pos += 8;
  return v;
}

double get_f64(const std::string& buf, std::size_t& pos) {
  return std::bit_cast<double>(get_u64(buf, pos));
}

constexpr char kSnapshotMagic[9] = "RPSNAP01";

}  // namespace

void save_snapshot(const std::filesystem::path& path, const NetworkParams& params,
                   std::uint64_t seed, double kappa, double kappa_prime) {
  check_dims(params, params.d, "save_snapshot");
  std::string buf;
  buf.reserve(40 + 8 * (params.a.size() + params.w.size()));
  buf.append(kSnapshotMagic, 8);
  put_u64(buf, params.m);
  put_u64(buf, params.d);
  put_u64(buf, seed);
  put_f64(buf, kappa);
  put_f64(buf, kappa_prime);
  for (double v : params.a) put_f64(buf, v);
  for (double v : params.w) put_f64(buf, v);
  write_file_atomic(path, buf);
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 8 || std::memcmp(buf.data(), kSnapshotMagic, 8) != 0) {
    throw std::runtime_error("bad snapshot magic in " + path.string());
  }
  std::size_t pos = 8;
  Snapshot snap;
  snap.params.m = get_u64(buf, pos);
  snap.params.d = get_u64(buf, pos);
  snap.seed = get_u64(buf, pos);
  snap.kappa = get_f64(buf, pos);
  snap.kappa_prime = get_f64(buf, pos);
  const std::size_t want = snap.params.m * (snap.params.d + 1);
  if (buf.size() != pos + 8 * want) {
    throw std::runtime_error("snapshot payload size mismatch in " + path.string());
  }
  snap.params.a.resize(snap.params.m);
  for (double& v : snap.params.a) v = get_f64(buf, pos);
  snap.params.w.resize(snap.params.m * snap.params.d);
  for (double& v : snap.params.w) v = get_f64(buf, pos);
  return snap;
}

std::string params_to_csv(const NetworkParams& params) {
  std::string out = "a";
  for (std::size_t j = 1; j <= params.d; ++j) out += ",w" + std::to_string(j);
  out += '\n';
  for (std::size_t k = 0; k < params.m; ++k) {
    out += g17(params.a[k]);
    for (std::size_t j = 0; j < params.d; ++j) {
      out += ',';
      out += g17(params.row(k)[j]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace reluphase
