#include "reluphase/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reluphase/io_util.hpp"

namespace reluphase {

namespace {

double norm2(const double* v, std::size_t len) {
  double s = 0.0;
  for (std::size_t j = 0; j < len; ++j) s += v[j] * v[j];
  return std::sqrt(s);
}

BoundContext init_context(const NetworkParams& p, std::uint64_t seed) {
  BoundContext ctx;
  ctx.m = p.m;
  ctx.d = p.d;
  ctx.seed = seed;
  return ctx;
}

}  // namespace

BoundReport check_initial_param_bound(const NetworkParams& params0, double delta,
                                      std::uint64_t seed) {
  if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("delta must be in (0,1)");
  BoundReport rep;
  rep.bound_name = "initial_param_sup";
  rep.context = init_context(params0, seed);
  const double dof = static_cast<double>(params0.m) * static_cast<double>(params0.d + 1);
  rep.theoretical_value = std::sqrt(2.0 * std::log(2.0 * dof / delta));
  double sup = 0.0;
  for (double v : params0.a) sup = std::max(sup, std::abs(v));
  for (double v : params0.w) sup = std::max(sup, std::abs(v));
  rep.empirical_value = sup;
  rep.satisfied = sup <= rep.theoretical_value;
  return rep;
}

std::vector<BoundReport> check_initial_norms(const NetworkParams& params0, std::uint64_t seed) {
  const double na = norm2(params0.a.data(), params0.a.size());
  const double nw = norm2(params0.w.data(), params0.w.size());
  const double nt = std::sqrt(na * na + nw * nw);

  auto sandwich = [&](const std::string& name, double dof, double value) {
    BoundReport rep;
    rep.bound_name = name;
    rep.context = init_context(params0, seed);
    rep.theoretical_lower = std::sqrt(dof / 2.0);
    rep.theoretical_value = std::sqrt(3.0 * dof / 2.0);
    rep.empirical_value = value;
    rep.satisfied = rep.theoretical_lower <= value && value <= rep.theoretical_value;
    return rep;
  };

  const double m = static_cast<double>(params0.m);
  const double d = static_cast<double>(params0.d);
  std::vector<BoundReport> out;
  out.push_back(sandwich("initial_norm_theta", m * (d + 1.0), nt));
  out.push_back(sandwich("initial_norm_theta_w", m * d, nw));
  out.push_back(sandwich("initial_norm_theta_a", m, na));
  return out;
}

BoundReport check_decay_bound(const RunResult& run, double rate, double tol) {
  if (run.trajectory.times.size() != run.trajectory.losses.size() ||
      run.trajectory.times.empty()) {
    throw std::invalid_argument("run has no recorded trajectory");
  }
  BoundReport rep;
  rep.bound_name = "loss_decay_rate";
  rep.context.m = run.final_params.m;
  rep.context.d = run.final_params.d;
  rep.theoretical_value = 1.0 + tol;
  const double loss0 = run.trajectory.losses.front();
  if (loss0 == 0.0) {
    rep.empirical_value = 0.0;
    rep.satisfied = true;
    for (double l : run.trajectory.losses) {
      if (l > 0.0) rep.satisfied = false;
    }
    return rep;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < run.trajectory.times.size(); ++i) {
    const double envelope = std::exp(-rate * run.trajectory.times[i]) * loss0;
    const double ratio = run.trajectory.losses[i] / envelope;
    worst = std::max(worst, ratio);
  }
  rep.empirical_value = worst;
  rep.satisfied = worst <= rep.theoretical_value;
  return rep;
}

BoundReport check_rd_bounds(const RunResult& run, std::size_t m, double kappa, double kappa_prime,
                            const PhaseCoordinates& coords, double bound_constant) {
  if (classify_regime(coords) != RegimeLabel::Linear) {
    throw std::invalid_argument("relative-deviation bound applies to linear-regime runs only");
  }
  if (m < 2 || !(kappa > 0.0) || !(kappa_prime > 0.0)) {
    throw std::invalid_argument("need m >= 2 and positive kappa, kappa_prime");
  }
  BoundReport rep;
  rep.context.m = m;
  rep.context.d = run.final_params.d;
  rep.context.kappa = kappa;
  rep.context.kappa_prime = kappa_prime;
  const double base = std::log(static_cast<double>(m)) / (static_cast<double>(m) * kappa);
  const double predicted = coords.gamma < 1.0 ? base : kappa_prime * base;
  rep.bound_name = coords.gamma < 1.0 ? "rd_w_small_gamma" : "rd_w_small_gamma_prime";
  rep.theoretical_value = bound_constant;
  rep.empirical_value = run.sup_rd_w / predicted;
  rep.satisfied = rep.empirical_value <= bound_constant;
  return rep;
}

BoundReport check_rd_width_decrease(const BoundReport& small_width,
                                    const BoundReport& large_width) {
  if (large_width.context.m <= small_width.context.m) {
    throw std::invalid_argument("reports must be ordered by increasing width");
  }
  BoundReport rep;
  rep.bound_name = "rd_ratio_width_decrease";
  rep.context = large_width.context;
  rep.theoretical_value = small_width.empirical_value;
  rep.empirical_value = large_width.empirical_value;
  rep.satisfied = rep.empirical_value <= rep.theoretical_value;
  return rep;
}

BoundReport check_neuron_bound(const RunResult& run, double kappa_prime) {
  const auto& snaps = run.trajectory.snapshots;
  if (snaps.empty()) throw std::invalid_argument("run has no snapshots");
  if (!(kappa_prime > 0.0)) throw std::invalid_argument("kappa_prime must be positive");
  const NetworkParams& p0 = snaps.front().params;
  BoundReport rep;
  rep.bound_name = "neuron_amplitude";
  rep.context.m = p0.m;
  rep.context.d = p0.d;
  rep.context.kappa_prime = kappa_prime;
  rep.theoretical_value = 0.0;
  double worst = -std::numeric_limits<double>::infinity();
  for (const ParamSnapshot& snap : snaps) {
    const NetworkParams& p = snap.params;
    if (p.m != p0.m || p.d != p0.d) throw std::invalid_argument("snapshot shape mismatch");
    const double slack = std::sqrt(balancedness_residual(p, p0, kappa_prime)) / kappa_prime;
    for (std::size_t k = 0; k < p.m; ++k) {
      const double wk = norm2(p.row(k), p.d);
      const double margin = std::abs(p.a[k]) - (wk / kappa_prime + std::abs(p0.a[k]) + slack);
      worst = std::max(worst, margin);
    }
  }
  rep.empirical_value = worst;
  rep.satisfied = worst <= 0.0;
  return rep;
}

std::string reports_to_csv(const std::vector<BoundReport>& reports) {
  std::string out =
      "bound,theoretical_lower,theoretical_value,empirical_value,satisfied,"
      "m,n,d,kappa,kappa_prime,seed\n";
  for (const BoundReport& rep : reports) {
    out += rep.bound_name + "," + g17(rep.theoretical_lower) + "," +
           g17(rep.theoretical_value) + "," + g17(rep.empirical_value) + "," +
           (rep.satisfied ? "1" : "0") + "," + std::to_string(rep.context.m) + "," +
           std::to_string(rep.context.n) + "," + std::to_string(rep.context.d) + "," +
           g17(rep.context.kappa) + "," + g17(rep.context.kappa_prime) + "," +
           std::to_string(rep.context.seed) + "\n";
  }
  return out;
}

}  // namespace reluphase
