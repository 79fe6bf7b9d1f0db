#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reluphase/dataset.hpp"
#include "reluphase/dynamics.hpp"
#include "reluphase/scaling.hpp"

namespace reluphase {

struct ScanGrid {
  std::vector<double> gamma_values;        // strictly increasing
  std::vector<double> gamma_prime_values;  // strictly increasing
  std::vector<std::size_t> widths;         // strictly increasing, >= 2 entries
  std::size_t replicates = 3;
  std::uint64_t base_seed = 0;
  double kappa_coeff = 1.0;
  double kappa_prime_coeff = 1.0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
  std::size_t point_count = 0;
};

// Ordinary least squares of log(value) on log(width).
SlopeFit fit_slope(const std::vector<std::size_t>& widths, const std::vector<double>& values);

struct ReplicateResult {
  std::uint64_t seed = 0;
  double sup_rd_w = 0.0;
  double sup_rd_theta = 0.0;
  double sup_rd_a = 0.0;
  double final_risk = 0.0;
  std::uint64_t accepted_steps = 0;
  StopReason stop_reason = StopReason::MaxSteps;
  bool diverged = false;
};

struct WidthResult {
  std::size_t width = 0;
  std::size_t effective_width = 0;  // width actually trained (ASI evens it)
  std::vector<ReplicateResult> replicates;
  // Geometric means of sup-RD over non-diverged replicates; 0 when none.
  double mean_sup_rd_w = 0.0;
  double mean_sup_rd_theta = 0.0;
  double mean_sup_rd_a = 0.0;
  std::size_t diverged_count = 0;
};

struct CellResult {
  PhaseCoordinates coords;
  std::size_t gamma_index = 0;
  std::size_t gamma_prime_index = 0;
  RegimeLabel regime = RegimeLabel::Linear;
  double boundary_dist = 0.0;
  bool near_critical = false;  // within 0.15 of the critical set
  bool partial = false;        // more than half the replicates diverged somewhere
  bool fits_valid = false;     // at least 2 widths had a usable mean
  std::vector<WidthResult> per_width;
  SlopeFit s_w;
  SlopeFit s_theta;
  SlopeFit s_a;
};

struct PhaseMap {
  ScanGrid grid;
  std::vector<CellResult> cells;  // row-major: gpi * n_gamma + gi
  std::vector<std::string> warnings;
};

struct BoundaryZero {
  double gamma_prime = 0.0;
  double gamma_at_zero = 0.0;
};

inline constexpr double kNearCriticalDistance = 0.15;

// Seed for one run: mix_seed(base_seed, {gamma_index, gamma_prime_index,
// width, replicate}).
std::uint64_t run_seed(std::uint64_t base_seed, std::size_t gamma_index,
                       std::size_t gamma_prime_index, std::size_t width, std::size_t replicate);

// Trains every (width, replicate) of one phase-diagram cell on the
// normalized model with (kappa, kappa_prime) realized from coords, using
// mirrored-pair initialization when gamma <= 1/2 (odd widths round up), and
// fits all three log-log slopes on the replicate geometric means.
CellResult run_cell(const PhaseCoordinates& coords, const ScanGrid& grid, const Dataset& ds,
                    const FlowConfig& flow);

// Full grid scan. jobs > 1 parallelizes independent runs; results do not
// depend on jobs or scheduling. cache_dir, when nonempty, holds one
// key-value file per completed run keyed on the scan fingerprint, so a
// repeated scan resumes instead of recomputing.
PhaseMap scan(const ScanGrid& grid, const Dataset& ds, const FlowConfig& flow, int jobs = 1,
              const std::filesystem::path& cache_dir = {});

// Linear interpolation of gamma where s_w crosses zero, per gamma_prime row,
// between adjacent cells with opposite-signed fitted s_w.
std::vector<BoundaryZero> boundary_zeros(const PhaseMap& map);

// Fingerprint of everything that determines scan results: grid, dataset,
// flow settings and the result-format version.
std::uint64_t scan_fingerprint(const ScanGrid& grid, const Dataset& ds, const FlowConfig& flow);

std::string map_csv(const PhaseMap& map);
std::string summary_csv(const PhaseMap& map);
std::string zeros_csv(const std::vector<BoundaryZero>& zeros);

}  // namespace reluphase
