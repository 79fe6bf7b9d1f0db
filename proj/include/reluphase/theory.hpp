#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "reluphase/dynamics.hpp"
#include "reluphase/network.hpp"
#include "reluphase/scaling.hpp"

namespace reluphase {

struct BoundContext {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t d = 0;
  double kappa = 0.0;
  double kappa_prime = 0.0;
  std::uint64_t seed = 0;
};

struct BoundReport {
  std::string bound_name;
  double theoretical_lower = -std::numeric_limits<double>::infinity();
  double theoretical_value = 0.0;
  double empirical_value = 0.0;
  bool satisfied = false;
  BoundContext context;
};

BoundReport check_initial_param_bound(const NetworkParams& params0, double delta,
                                      std::uint64_t seed = 0);

std::vector<BoundReport> check_initial_norms(const NetworkParams& params0, std::uint64_t seed = 0);

BoundReport check_decay_bound(const RunResult& run, double rate, double tol = 0.05);

BoundReport check_rd_bounds(const RunResult& run, std::size_t m, double kappa, double kappa_prime,
                            const PhaseCoordinates& coords, double bound_constant = 10.0);

BoundReport check_rd_width_decrease(const BoundReport& small_width, const BoundReport& large_width);

BoundReport check_neuron_bound(const RunResult& run, double kappa_prime);

std::string reports_to_csv(const std::vector<BoundReport>& reports);

}  // namespace reluphase
