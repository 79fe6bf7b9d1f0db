#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reluphase/dataset.hpp"
#include "reluphase/network.hpp"
#include "reluphase/scaling.hpp"

namespace reluphase {

enum class Block { W, A, Theta };

enum class StopReason { RiskTolerance, MaxTime, MaxSteps, Diverged };

std::string stop_reason_name(StopReason reason);

// All times are normalized flow time. initial_step = 0 resolves to
// 0.1 n / (m kappa^2 (la/kappa' + kappa' lw)) with la/lw estimated from the
// finite Gram spectrum at the start state; risk_tolerance < 0 resolves to
// max(initial_risk * 1e-6, 1/(32 n)). adaptive = false accepts every step
// and never rescales it.
struct FlowConfig {
  double initial_step = 0.0;
  double max_time = 1e12;
  double risk_tolerance = -1.0;
  std::size_t record_stride = 1;
  std::size_t max_steps = 500000;
  std::size_t snapshot_limit = 0;
  bool adaptive = true;
};

struct ParamSnapshot {
  double time = 0.0;
  std::uint64_t step = 0;
  NetworkParams params;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<double> losses;
  std::vector<double> rd_w;
  std::vector<double> rd_theta;
  std::vector<double> rd_a;
  std::vector<double> alpha_max;  // running max over accepted states of |a_k|
  std::vector<double> omega_max;  // running max over accepted states of |w_kj|
  std::vector<ParamSnapshot> snapshots;  // first entry is the start state
};

struct RunResult {
  NetworkParams final_params;
  Trajectory trajectory;
  double sup_rd_w = 0.0;
  double sup_rd_theta = 0.0;
  double sup_rd_a = 0.0;
  StopReason stop_reason = StopReason::MaxSteps;
  double resolved_initial_step = 0.0;
  double resolved_risk_tolerance = 0.0;
  double final_time = 0.0;
  double final_risk = 0.0;
  std::uint64_t accepted_steps = 0;
};

// || block(current) - block(initial) ||_2 / || block(initial) ||_2
double relative_deviation(const NetworkParams& current, const NetworkParams& initial,
                          Block block);

// max_k | kappa'^2 (a_k^2 - a0_k^2) - (|w_k|^2 - |w0_k|^2) |
double balancedness_residual(const NetworkParams& current, const NetworkParams& initial,
                             double kappa_prime);

double default_initial_step(const NetworkParams& params0, double kappa, double kappa_prime,
                            const Dataset& ds);
double default_risk_tolerance(double initial_risk, std::size_t n);

// Explicit Euler on the normalized flow
//   da_k/dt = -(kappa/(kappa' n)) sum_i e_i relu(w_k.x_i)
//   dw_k/dt = -(kappa kappa'/n)  sum_i e_i a_k relu'(w_k.x_i) x_i
// with monotone acceptance: a step is kept only if the loss did not
// increase; on increase the step halves and retries; after 10 consecutive
// accepts it doubles, capped at initial_step * 2^10. Diverged when the step
// falls below initial_step * 2^-40 or a loss/gradient turns non-finite.
RunResult integrate(const NetworkParams& params0, double kappa, double kappa_prime,
                    const Dataset& ds, const FlowConfig& config);

// Original-model flow (output prefactor 1/alpha, init scales beta1/beta2,
// plain gradient descent flow) driven by the same seed and the same
// normalized-time step sequence, reported in normalized variables
// a/beta1, w/beta2, t_original/(beta1 beta2).
RunResult simulate_original(const ScalingSpec& spec, std::size_t m, const Dataset& ds,
                            const FlowConfig& config, std::uint64_t seed, bool use_asi = false);

// Columns: t,loss,rd_w,rd_theta,rd_a,alpha_max,omega_max
std::string trajectory_to_csv(const Trajectory& trajectory);

}  // namespace reluphase
