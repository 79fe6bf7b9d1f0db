#include "reluphase/scan.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reluphase/io_util.hpp"
#include "reluphase/rng.hpp"

namespace reluphase {

namespace {

struct RunSpec {
  std::size_t cell_index = 0;
  std::size_t width_index = 0;
  std::size_t replicate = 0;
  std::size_t gamma_index = 0;
  std::size_t gamma_prime_index = 0;
  PhaseCoordinates coords;
};

std::size_t effective_width(const PhaseCoordinates& coords, std::size_t width) {
  const bool use_asi = coords.gamma <= 0.5;
  if (use_asi && width % 2 != 0) return width + 1;
  return width;
}

ReplicateResult run_single(const PhaseCoordinates& coords, const ScanGrid& grid,
                           std::size_t width, std::uint64_t seed, const Dataset& ds,
                           const FlowConfig& flow) {
  const bool use_asi = coords.gamma <= 0.5;
  const std::size_t m_eff = effective_width(coords, width);
  const Realized rz = realize(coords, m_eff, grid.kappa_coeff, grid.kappa_prime_coeff);
  InitConfig ic;
  ic.m = use_asi ? m_eff / 2 : m_eff;
  ic.d = ds.d;
  ic.seed = seed;
  ic.use_asi = use_asi;
  const NetworkParams params0 = init_params(ic);
  const RunResult run = integrate(params0, rz.kappa, rz.kappa_prime, ds, flow);

  ReplicateResult rep;
  rep.seed = seed;
  rep.sup_rd_w = run.sup_rd_w;
  rep.sup_rd_theta = run.sup_rd_theta;
  rep.sup_rd_a = run.sup_rd_a;
  rep.final_risk = run.final_risk;
  rep.accepted_steps = run.accepted_steps;
  rep.stop_reason = run.stop_reason;
  rep.diverged = run.stop_reason == StopReason::Diverged;
  return rep;
}

std::string replicate_to_kv(const ReplicateResult& rep, std::size_t eff_width) {
  std::string out;
  out += "seed=" + hex16(rep.seed) + "\n";
  out += "effective_width=" + std::to_string(eff_width) + "\n";
  out += "sup_rd_w=" + g17(rep.sup_rd_w) + "\n";
  out += "sup_rd_theta=" + g17(rep.sup_rd_theta) + "\n";
  out += "sup_rd_a=" + g17(rep.sup_rd_a) + "\n";
  out += "final_risk=" + g17(rep.final_risk) + "\n";
  out += "accepted_steps=" + std::to_string(rep.accepted_steps) + "\n";
  out += "stop_reason=" + stop_reason_name(rep.stop_reason) + "\n";
  return out;
}

bool replicate_from_kv(const std::string& text, ReplicateResult& rep) {
  bool have_w = false, have_t = false, have_a = false, have_r = false, have_s = false;
  for (const std::string& line : split(text, '\n')) {
    const std::string entry = trim(line);
    if (entry.empty()) continue;
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos) return false;
    const std::string key = trim(entry.substr(0, eq));
    const std::string value = trim(entry.substr(eq + 1));
    try {
      if (key == "seed") {
        rep.seed = std::stoull(value, nullptr, 16);
      } else if (key == "sup_rd_w") {
        rep.sup_rd_w = parse_double(value);
        have_w = true;
      } else if (key == "sup_rd_theta") {
        rep.sup_rd_theta = parse_double(value);
        have_t = true;
      } else if (key == "sup_rd_a") {
        rep.sup_rd_a = parse_double(value);
        have_a = true;
      } else if (key == "final_risk") {
        rep.final_risk = parse_double(value);
        have_r = true;
      } else if (key == "accepted_steps") {
        rep.accepted_steps = static_cast<std::uint64_t>(parse_int(value));
      } else if (key == "stop_reason") {
        have_s = true;
        if (value == "risk_tolerance") {
          rep.stop_reason = StopReason::RiskTolerance;
        } else if (value == "max_time") {
          rep.stop_reason = StopReason::MaxTime;
        } else if (value == "max_steps") {
          rep.stop_reason = StopReason::MaxSteps;
        } else if (value == "diverged") {
          rep.stop_reason = StopReason::Diverged;
        } else {
          return false;
        }
      }
    } catch (const std::exception&) {
      return false;
    }
  }
  rep.diverged = rep.stop_reason == StopReason::Diverged;
  return have_w && have_t && have_a && have_r && have_s;
}

std::filesystem::path cache_path(const std::filesystem::path& dir, std::uint64_t fingerprint,
                                 const RunSpec& spec, std::size_t width) {
  return dir / ("run_" + hex16(fingerprint) + "_g" + std::to_string(spec.gamma_index) + "_p" +
                std::to_string(spec.gamma_prime_index) + "_w" + std::to_string(width) + "_r" +
                std::to_string(spec.replicate) + ".kv");
}

void aggregate_width(WidthResult& wr) {
  double log_w = 0.0, log_t = 0.0, log_a = 0.0;
  std::size_t used = 0;
  bool zero_seen = false;
  wr.diverged_count = 0;
  for (const ReplicateResult& rep : wr.replicates) {
    if (rep.diverged) {
      ++wr.diverged_count;
      continue;
    }
    if (rep.sup_rd_w <= 0.0 || rep.sup_rd_theta <= 0.0 || rep.sup_rd_a <= 0.0) {
      zero_seen = true;
      continue;
    }
    log_w += std::log(rep.sup_rd_w);
    log_t += std::log(rep.sup_rd_theta);
    log_a += std::log(rep.sup_rd_a);
    ++used;
  }
  if (used == 0 || zero_seen) {
    wr.mean_sup_rd_w = 0.0;
    wr.mean_sup_rd_theta = 0.0;
    wr.mean_sup_rd_a = 0.0;
    return;
  }
  const double inv = 1.0 / static_cast<double>(used);
  wr.mean_sup_rd_w = std::exp(log_w * inv);
  wr.mean_sup_rd_theta = std::exp(log_t * inv);
  wr.mean_sup_rd_a = std::exp(log_a * inv);
}

void finalize_cell(CellResult& cell) {
  cell.regime = classify_regime(cell.coords);
  cell.boundary_dist = boundary_distance(cell.coords);
  cell.near_critical = cell.boundary_dist <= kNearCriticalDistance;
  cell.partial = false;
  std::vector<std::size_t> fit_widths;
  std::vector<double> vw, vt, va;
  for (WidthResult& wr : cell.per_width) {
    aggregate_width(wr);
    if (wr.diverged_count * 2 > wr.replicates.size()) cell.partial = true;
    if (wr.mean_sup_rd_w > 0.0 && wr.mean_sup_rd_theta > 0.0 && wr.mean_sup_rd_a > 0.0) {
      fit_widths.push_back(wr.effective_width);
      vw.push_back(wr.mean_sup_rd_w);
      vt.push_back(wr.mean_sup_rd_theta);
      va.push_back(wr.mean_sup_rd_a);
    }
  }
  cell.fits_valid = fit_widths.size() >= 2;
  if (cell.fits_valid) {
    cell.s_w = fit_slope(fit_widths, vw);
    cell.s_theta = fit_slope(fit_widths, vt);
    cell.s_a = fit_slope(fit_widths, va);
  } else {
    cell.s_w = cell.s_theta = cell.s_a = SlopeFit{};
  }
}

void validate_grid(const ScanGrid& grid) {
  if (grid.gamma_values.empty() || grid.gamma_prime_values.empty()) {
    throw std::invalid_argument("scan grid needs at least one gamma and gamma_prime value");
  }
  for (std::size_t i = 1; i < grid.gamma_values.size(); ++i) {
    if (!(grid.gamma_values[i] > grid.gamma_values[i - 1])) {
      throw std::invalid_argument("gamma_values must be strictly increasing");
    }
  }
  for (std::size_t i = 1; i < grid.gamma_prime_values.size(); ++i) {
    if (!(grid.gamma_prime_values[i] > grid.gamma_prime_values[i - 1])) {
      throw std::invalid_argument("gamma_prime_values must be strictly increasing");
    }
  }
  if (grid.widths.size() < 2) throw std::invalid_argument("scan needs at least 2 widths");
  for (std::size_t i = 1; i < grid.widths.size(); ++i) {
    if (!(grid.widths[i] > grid.widths[i - 1])) {
      throw std::invalid_argument("widths must be strictly increasing");
    }
  }
  if (grid.widths.front() < 1) throw std::invalid_argument("widths must be positive");
  if (grid.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (!(grid.kappa_coeff > 0.0) || !(grid.kappa_prime_coeff > 0.0)) {
    throw std::invalid_argument("realization coefficients must be positive");
  }
}

}  // namespace

SlopeFit fit_slope(const std::vector<std::size_t>& widths, const std::vector<double>& values) {
  if (widths.size() != values.size()) throw std::invalid_argument("fit_slope: length mismatch");
  if (widths.size() < 2) throw std::invalid_argument("fit_slope needs at least 2 points");
  const std::size_t n = widths.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (widths[i] < 1) throw std::invalid_argument("fit_slope: widths must be positive");
    if (!(values[i] > 0.0)) throw std::invalid_argument("fit_slope: values must be positive");
    lx[i] = std::log(static_cast<double>(widths[i]));
    ly[i] = std::log(values[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_slope: widths must differ");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.point_count = n;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / static_cast<double>(n));
  return fit;
}

std::uint64_t run_seed(std::uint64_t base_seed, std::size_t gamma_index,
                       std::size_t gamma_prime_index, std::size_t width, std::size_t replicate) {
  return mix_seed(base_seed, {static_cast<std::uint64_t>(gamma_index),
                              static_cast<std::uint64_t>(gamma_prime_index),
                              static_cast<std::uint64_t>(width),
                              static_cast<std::uint64_t>(replicate)});
}

std::uint64_t scan_fingerprint(const ScanGrid& grid, const Dataset& ds, const FlowConfig& flow) {
  std::string canon = "scan-v1";
  canon += "|gamma:";
  for (double g : grid.gamma_values) canon += g17(g) + ",";
  canon += "|gamma_prime:";
  for (double g : grid.gamma_prime_values) canon += g17(g) + ",";
  canon += "|widths:";
  for (std::size_t w : grid.widths) canon += std::to_string(w) + ",";
  canon += "|replicates:" + std::to_string(grid.replicates);
  canon += "|base_seed:" + hex16(grid.base_seed);
  canon += "|kappa_coeff:" + g17(grid.kappa_coeff);
  canon += "|kappa_prime_coeff:" + g17(grid.kappa_prime_coeff);
  canon += "|dataset:" + hex16(dataset_fingerprint(ds));
  canon += "|step:" + g17(flow.initial_step);
  canon += "|max_time:" + g17(flow.max_time);
  canon += "|tol:" + g17(flow.risk_tolerance);
  canon += "|stride:" + std::to_string(flow.record_stride);
  canon += "|max_steps:" + std::to_string(flow.max_steps);
  canon += "|adaptive:" + std::string(flow.adaptive ? "1" : "0");
  return fnv1a64(canon);
}

CellResult run_cell(const PhaseCoordinates& coords, const ScanGrid& grid, const Dataset& ds,
                    const FlowConfig& flow) {
  validate_grid(grid);
  CellResult cell;
  cell.coords = coords;
  for (std::size_t i = 0; i < grid.gamma_values.size(); ++i) {
    if (grid.gamma_values[i] == coords.gamma) cell.gamma_index = i;
  }
  for (std::size_t i = 0; i < grid.gamma_prime_values.size(); ++i) {
    if (grid.gamma_prime_values[i] == coords.gamma_prime) cell.gamma_prime_index = i;
  }
  cell.per_width.resize(grid.widths.size());
  for (std::size_t wi = 0; wi < grid.widths.size(); ++wi) {
    WidthResult& wr = cell.per_width[wi];
    wr.width = grid.widths[wi];
    wr.effective_width = effective_width(coords, wr.width);
    wr.replicates.resize(grid.replicates);
    for (std::size_t rep = 0; rep < grid.replicates; ++rep) {
      const std::uint64_t seed =
          run_seed(grid.base_seed, cell.gamma_index, cell.gamma_prime_index, wr.width, rep);
      wr.replicates[rep] = run_single(coords, grid, wr.width, seed, ds, flow);
    }
  }
  finalize_cell(cell);
  return cell;
}

PhaseMap scan(const ScanGrid& grid, const Dataset& ds, const FlowConfig& flow, int jobs,
              const std::filesystem::path& cache_dir) {
  validate_grid(grid);
  PhaseMap map;
  map.grid = grid;
  if (grid.widths.back() < 10 * grid.widths.front()) {
    map.warnings.push_back("width span is below one decade; slope fits may be unreliable");
  }

  const std::size_t n_gamma = grid.gamma_values.size();
  const std::size_t n_gp = grid.gamma_prime_values.size();
  map.cells.resize(n_gamma * n_gp);
  for (std::size_t gpi = 0; gpi < n_gp; ++gpi) {
    for (std::size_t gi = 0; gi < n_gamma; ++gi) {
      CellResult& cell = map.cells[gpi * n_gamma + gi];
      cell.coords = {grid.gamma_values[gi], grid.gamma_prime_values[gpi]};
      cell.gamma_index = gi;
      cell.gamma_prime_index = gpi;
      cell.per_width.resize(grid.widths.size());
      for (std::size_t wi = 0; wi < grid.widths.size(); ++wi) {
        cell.per_width[wi].width = grid.widths[wi];
        cell.per_width[wi].effective_width = effective_width(cell.coords, grid.widths[wi]);
        cell.per_width[wi].replicates.resize(grid.replicates);
      }
    }
  }

  std::vector<RunSpec> work;
  work.reserve(map.cells.size() * grid.widths.size() * grid.replicates);
  for (std::size_t ci = 0; ci < map.cells.size(); ++ci) {
    for (std::size_t wi = 0; wi < grid.widths.size(); ++wi) {
      for (std::size_t rep = 0; rep < grid.replicates; ++rep) {
        RunSpec spec;
        spec.cell_index = ci;
        spec.width_index = wi;
        spec.replicate = rep;
        spec.gamma_index = map.cells[ci].gamma_index;
        spec.gamma_prime_index = map.cells[ci].gamma_prime_index;
        spec.coords = map.cells[ci].coords;
        work.push_back(spec);
      }
    }
  }

  const bool use_cache = !cache_dir.empty();
  std::uint64_t fingerprint = 0;
  if (use_cache) {
    fingerprint = scan_fingerprint(grid, ds, flow);
    std::filesystem::create_directories(cache_dir);
  }

  std::vector<std::string> errors(work.size());
  auto run_item = [&](std::size_t idx) {
    const RunSpec& spec = work[idx];
    const std::size_t width = grid.widths[spec.width_index];
    WidthResult& wr = map.cells[spec.cell_index].per_width[spec.width_index];
    const std::uint64_t seed =
        run_seed(grid.base_seed, spec.gamma_index, spec.gamma_prime_index, width, spec.replicate);
    try {
      if (use_cache) {
        const std::filesystem::path path = cache_path(cache_dir, fingerprint, spec, width);
        if (std::filesystem::exists(path)) {
          ReplicateResult cached;
          if (replicate_from_kv(read_file(path), cached) && cached.seed == seed) {
            wr.replicates[spec.replicate] = cached;
            return;
          }
        }
        const ReplicateResult rep = run_single(spec.coords, grid, width, seed, ds, flow);
        wr.replicates[spec.replicate] = rep;
        write_file_atomic(path, replicate_to_kv(rep, wr.effective_width));
        return;
      }
      wr.replicates[spec.replicate] = run_single(spec.coords, grid, width, seed, ds, flow);
    } catch (const std::exception& ex) {
      errors[idx] = ex.what();
    }
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < work.size(); ++i) run_item(i);
  } else {
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(work.size()); ++i) {
      run_item(static_cast<std::size_t>(i));
    }
  }
  for (const std::string& err : errors) {
    if (!err.empty()) throw std::runtime_error("scan run failed: " + err);
  }

  for (CellResult& cell : map.cells) finalize_cell(cell);
  return map;
}

std::vector<BoundaryZero> boundary_zeros(const PhaseMap& map) {
  std::vector<BoundaryZero> zeros;
  const std::size_t n_gamma = map.grid.gamma_values.size();
  const std::size_t n_gp = map.grid.gamma_prime_values.size();
  for (std::size_t gpi = 0; gpi < n_gp; ++gpi) {
    for (std::size_t gi = 0; gi + 1 < n_gamma; ++gi) {
      const CellResult& left = map.cells[gpi * n_gamma + gi];
      const CellResult& right = map.cells[gpi * n_gamma + gi + 1];
      if (!left.fits_valid || !right.fits_valid) continue;
      const double s1 = left.s_w.slope;
      const double s2 = right.s_w.slope;
      if (s1 * s2 >= 0.0) continue;
      const double g1 = left.coords.gamma;
      const double g2 = right.coords.gamma;
      zeros.push_back({map.grid.gamma_prime_values[gpi], g1 - s1 * (g2 - g1) / (s2 - s1)});
    }
  }
  return zeros;
}

std::string map_csv(const PhaseMap& map) {
  std::string out =
      "gamma,gamma_prime,regime,near_critical,width,effective_width,replicates,diverged,"
      "mean_sup_rd_w,mean_sup_rd_theta,mean_sup_rd_a\n";
  for (const CellResult& cell : map.cells) {
    for (const WidthResult& wr : cell.per_width) {
      out += g17(cell.coords.gamma) + "," + g17(cell.coords.gamma_prime) + "," +
             regime_name(cell.regime) + "," + (cell.near_critical ? "1" : "0") + "," +
             std::to_string(wr.width) + "," + std::to_string(wr.effective_width) + "," +
             std::to_string(wr.replicates.size()) + "," + std::to_string(wr.diverged_count) +
             "," + g17(wr.mean_sup_rd_w) + "," + g17(wr.mean_sup_rd_theta) + "," +
             g17(wr.mean_sup_rd_a) + "\n";
    }
  }
  return out;
}

std::string summary_csv(const PhaseMap& map) {
  std::string out =
      "gamma,gamma_prime,regime,near_critical,partial,fits_valid,fit_points,"
      "s_w,s_w_intercept,s_w_rms,s_theta,s_theta_intercept,s_theta_rms,"
      "s_a,s_a_intercept,s_a_rms\n";
  for (const CellResult& cell : map.cells) {
    out += g17(cell.coords.gamma) + "," + g17(cell.coords.gamma_prime) + "," +
           regime_name(cell.regime) + "," + (cell.near_critical ? "1" : "0") + "," +
           (cell.partial ? "1" : "0") + "," + (cell.fits_valid ? "1" : "0") + "," +
           std::to_string(cell.s_w.point_count) + "," + g17(cell.s_w.slope) + "," +
           g17(cell.s_w.intercept) + "," + g17(cell.s_w.residual_rms) + "," +
           g17(cell.s_theta.slope) + "," + g17(cell.s_theta.intercept) + "," +
           g17(cell.s_theta.residual_rms) + "," + g17(cell.s_a.slope) + "," +
           g17(cell.s_a.intercept) + "," + g17(cell.s_a.residual_rms) + "\n";
  }
  return out;
}

std::string zeros_csv(const std::vector<BoundaryZero>& zeros) {
  std::string out = "gamma_prime,gamma_at_zero\n";
  for (const BoundaryZero& z : zeros) {
    out += g17(z.gamma_prime) + "," + g17(z.gamma_at_zero) + "\n";
  }
  return out;
}

}  // namespace reluphase
