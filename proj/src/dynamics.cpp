#include "reluphase/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reluphase/gram.hpp"
#include "reluphase/io_util.hpp"

namespace reluphase {

namespace {

// Internal representation of which model the Euler core is stepping. The
// normalized flow uses forward/grad kappa = kappa and flow_scale 1; the
// original model uses 1/alpha with flow_scale beta1*beta2, and out_scale_*
// map its raw parameters back to normalized ones for all reported values.
struct Drive {
  double forward_kappa;
  double grad_kappa;
  double grad_kappa_prime;
  double flow_scale;
  double out_scale_a;
  double out_scale_w;
};

NetworkParams mapped_params(const NetworkParams& p, const Drive& dv) {
  NetworkParams out = p;
  if (dv.out_scale_a != 1.0) {
    for (double& v : out.a) v *= dv.out_scale_a;
  }
  if (dv.out_scale_w != 1.0) {
    for (double& v : out.w) v *= dv.out_scale_w;
  }
  return out;
}

RunResult run_flow(const NetworkParams& start, const Drive& dv, const Dataset& ds, double h0,
                   double tol, const FlowConfig& cfg) {
  const std::size_t m = start.m;
  const std::size_t wn = start.w.size();

  RunResult res;
  res.resolved_initial_step = h0;
  res.resolved_risk_tolerance = tol;
  Trajectory& tr = res.trajectory;

  NetworkParams cur = start;
  NetworkParams trial = start;
  GradientPair grad;
  std::vector<double> e = residuals(cur, dv.forward_kappa, ds);
  double loss = risk_from_residuals(e);
  if (!std::isfinite(loss)) throw std::invalid_argument("integrate: non-finite initial loss");

  const double sa = dv.out_scale_a;
  const double sw = dv.out_scale_w;
  double a0sq = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double v = sa * start.a[k];
    a0sq += v * v;
  }
  double w0sq = 0.0;
  for (std::size_t i = 0; i < wn; ++i) {
    const double v = sw * start.w[i];
    w0sq += v * v;
  }
  if (a0sq == 0.0 || w0sq == 0.0) {
    throw std::invalid_argument("integrate: zero initial block norm, RD undefined");
  }

  double alpha_raw = 0.0;
  double omega_raw = 0.0;
  auto track_maxima = [&]() {
    for (std::size_t k = 0; k < m; ++k) alpha_raw = std::max(alpha_raw, std::fabs(cur.a[k]));
    for (std::size_t i = 0; i < wn; ++i) omega_raw = std::max(omega_raw, std::fabs(cur.w[i]));
  };
  track_maxima();

  auto push_record = [&](double tt, double ll) {
    double da2 = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double v = sa * (cur.a[k] - start.a[k]);
      da2 += v * v;
    }
    double dw2 = 0.0;
    for (std::size_t i = 0; i < wn; ++i) {
      const double v = sw * (cur.w[i] - start.w[i]);
      dw2 += v * v;
    }
    tr.times.push_back(tt);
    tr.losses.push_back(ll);
    tr.rd_a.push_back(std::sqrt(da2 / a0sq));
    tr.rd_w.push_back(std::sqrt(dw2 / w0sq));
    tr.rd_theta.push_back(std::sqrt((da2 + dw2) / (a0sq + w0sq)));
    tr.alpha_max.push_back(std::fabs(sa) * alpha_raw);
    tr.omega_max.push_back(std::fabs(sw) * omega_raw);
  };

  std::uint64_t snap_stride = 1;
  auto push_snapshot = [&](double tt, std::uint64_t step) {
    tr.snapshots.push_back({tt, step, mapped_params(cur, dv)});
  };
  push_snapshot(0.0, 0);
  push_record(0.0, loss);

  const double h_min = h0 * 0x1p-40;
  const double h_max = h0 * 1024.0;
  double h = h0;
  double t = 0.0;
  std::uint64_t accepted = 0;
  int consec = 0;
  StopReason reason = StopReason::MaxSteps;

  if (loss <= tol) {
    reason = StopReason::RiskTolerance;
  } else {
    bool need_grad = true;
    while (true) {
      if (accepted >= cfg.max_steps) {
        reason = StopReason::MaxSteps;
        break;
      }
      if (t >= cfg.max_time) {
        reason = StopReason::MaxTime;
        break;
      }
      if (need_grad) {
        gradient_into(cur, dv.grad_kappa, dv.grad_kappa_prime, ds, e, grad);
        need_grad = false;
      }
      const double hs = h * dv.flow_scale;
      int bad = 0;
#pragma omp parallel for schedule(static) reduction(| : bad)
      for (std::ptrdiff_t ks = 0; ks < static_cast<std::ptrdiff_t>(m); ++ks) {
        const std::size_t k = static_cast<std::size_t>(ks);
        const double na = cur.a[k] + hs * grad.da[k];
        trial.a[k] = na;
        bad |= !std::isfinite(na);
        const double* wk = cur.row(k);
        const double* gk = grad.dw.data() + k * cur.d;
        double* ok = trial.row(k);
        for (std::size_t j = 0; j < cur.d; ++j) {
          const double nw = wk[j] + hs * gk[j];
          ok[j] = nw;
          bad |= !std::isfinite(nw);
        }
      }
      if (bad) {
        reason = StopReason::Diverged;
        break;
      }
      std::vector<double> e_trial = residuals(trial, dv.forward_kappa, ds);
      const double loss_trial = risk_from_residuals(e_trial);
      if (!std::isfinite(loss_trial)) {
        reason = StopReason::Diverged;
        break;
      }
      if (cfg.adaptive && loss_trial > loss) {
        h *= 0.5;
        consec = 0;
        if (h < h_min) {
          reason = StopReason::Diverged;
          break;
        }
        continue;
      }
      std::swap(cur, trial);
      e = std::move(e_trial);
      loss = loss_trial;
      need_grad = true;
      t += h;
      ++accepted;
      track_maxima();
      if (cfg.adaptive && ++consec >= 10) {
        h = std::min(h * 2.0, h_max);
        consec = 0;
      }
      if (accepted % cfg.record_stride == 0) push_record(t, loss);
      if (cfg.snapshot_limit > 0 && accepted % snap_stride == 0) {
        if (tr.snapshots.size() - 1 >= cfg.snapshot_limit) {
          snap_stride *= 2;
          std::erase_if(tr.snapshots, [&](const ParamSnapshot& s) {
            return s.step != 0 && s.step % snap_stride != 0;
          });
        }
        if (accepted % snap_stride == 0) push_snapshot(t, accepted);
      }
      if (loss <= tol) {
        reason = StopReason::RiskTolerance;
        break;
      }
    }
  }

  if (tr.times.back() != t) push_record(t, loss);
  if (tr.snapshots.back().time != t) push_snapshot(t, accepted);

  res.final_params = mapped_params(cur, dv);
  res.final_time = t;
  res.final_risk = loss;
  res.accepted_steps = accepted;
  res.stop_reason = reason;
  res.sup_rd_w = *std::max_element(tr.rd_w.begin(), tr.rd_w.end());
  res.sup_rd_theta = *std::max_element(tr.rd_theta.begin(), tr.rd_theta.end());
  res.sup_rd_a = *std::max_element(tr.rd_a.begin(), tr.rd_a.end());
  return res;
}

void check_config(const FlowConfig& cfg) {
  if (cfg.record_stride < 1) throw std::invalid_argument("record_stride must be >= 1");
  if (cfg.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (!(cfg.max_time > 0.0)) throw std::invalid_argument("max_time must be positive");
}

double resolve_step(const FlowConfig& cfg, const NetworkParams& params0, double kappa,
                    double kappa_prime, const Dataset& ds) {
  double h0 = cfg.initial_step;
  if (h0 == 0.0) h0 = default_initial_step(params0, kappa, kappa_prime, ds);
  if (!(h0 > 0.0) || !std::isfinite(h0)) {
    throw std::invalid_argument("initial_step must be positive and finite");
  }
  if (!(h0 < cfg.max_time)) {
    throw std::invalid_argument("initial_step must be smaller than max_time");
  }
  return h0;
}

double resolve_tolerance(const FlowConfig& cfg, double initial_risk, std::size_t n) {
  if (cfg.risk_tolerance >= 0.0) return cfg.risk_tolerance;
  return default_risk_tolerance(initial_risk, n);
}

}  // namespace

std::string stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::RiskTolerance: return "risk_tolerance";
    case StopReason::MaxTime: return "max_time";
    case StopReason::MaxSteps: return "max_steps";
    case StopReason::Diverged: return "diverged";
  }
  throw std::logic_error("unknown StopReason");
}

double relative_deviation(const NetworkParams& current, const NetworkParams& initial,
                          Block block) {
  if (current.m != initial.m || current.d != initial.d) {
    throw std::invalid_argument("relative_deviation: shape mismatch");
  }
  double num = 0.0;
  double den = 0.0;
  if (block == Block::A || block == Block::Theta) {
    for (std::size_t k = 0; k < current.m; ++k) {
      const double diff = current.a[k] - initial.a[k];
      num += diff * diff;
      den += initial.a[k] * initial.a[k];
    }
  }
  if (block == Block::W || block == Block::Theta) {
    for (std::size_t i = 0; i < current.w.size(); ++i) {
      const double diff = current.w[i] - initial.w[i];
      num += diff * diff;
      den += initial.w[i] * initial.w[i];
    }
  }
  if (den == 0.0) throw std::invalid_argument("relative_deviation: zero initial block norm");
  return std::sqrt(num / den);
}

double balancedness_residual(const NetworkParams& current, const NetworkParams& initial,
                             double kappa_prime) {
  if (current.m != initial.m || current.d != initial.d) {
    throw std::invalid_argument("balancedness_residual: shape mismatch");
  }
  const double kp2 = kappa_prime * kappa_prime;
  double worst = 0.0;
  for (std::size_t k = 0; k < current.m; ++k) {
    const double da2 = current.a[k] * current.a[k] - initial.a[k] * initial.a[k];
    double dw2 = 0.0;
    const double* wc = current.row(k);
    const double* wi = initial.row(k);
    for (std::size_t j = 0; j < current.d; ++j) dw2 += wc[j] * wc[j] - wi[j] * wi[j];
    worst = std::max(worst, std::fabs(kp2 * da2 - dw2));
  }
  return worst;
}

double default_initial_step(const NetworkParams& params0, double kappa, double kappa_prime,
                            const Dataset& ds) {
  const FiniteGram fg = gram_finite(params0, kappa, kappa_prime, ds);
  const double k2 = kappa * kappa;
  const double la_hat = (kappa_prime / k2) * min_eigenvalue(fg.g_a);
  const double lw_hat = min_eigenvalue(fg.g_w) / (k2 * kappa_prime);
  const double denom = static_cast<double>(params0.m) * k2 *
                       (la_hat / kappa_prime + kappa_prime * lw_hat);
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    throw std::invalid_argument(
        "default_initial_step: start Gram spectrum is degenerate, pass initial_step explicitly");
  }
  return 0.1 * static_cast<double>(ds.n) / denom;
}

double default_risk_tolerance(double initial_risk, std::size_t n) {
  if (n < 1) throw std::invalid_argument("default_risk_tolerance needs n >= 1");
  return std::max(initial_risk * 1e-6, 1.0 / (32.0 * static_cast<double>(n)));
}

RunResult integrate(const NetworkParams& params0, double kappa, double kappa_prime,
                    const Dataset& ds, const FlowConfig& config) {
  if (!(kappa > 0.0) || !(kappa_prime > 0.0)) {
    throw std::invalid_argument("integrate needs kappa, kappa_prime > 0");
  }
  if (params0.d != ds.d) throw std::invalid_argument("integrate: dimension mismatch");
  check_config(config);
  const double h0 = resolve_step(config, params0, kappa, kappa_prime, ds);
  const double r0 = empirical_risk(params0, kappa, ds);
  const double tol = resolve_tolerance(config, r0, ds.n);
  const Drive dv{kappa, kappa, kappa_prime, 1.0, 1.0, 1.0};
  return run_flow(params0, dv, ds, h0, tol, config);
}

RunResult simulate_original(const ScalingSpec& spec, std::size_t m, const Dataset& ds,
                            const FlowConfig& config, std::uint64_t seed, bool use_asi) {
  if (use_asi && m % 2 != 0) {
    throw std::invalid_argument("simulate_original: use_asi needs an even width");
  }
  check_config(config);
  InitConfig ic;
  ic.m = use_asi ? m / 2 : m;
  ic.d = ds.d;
  ic.seed = seed;
  ic.use_asi = use_asi;
  const NetworkParams norm0 = init_params(ic);

  const double b1 = spec.beta1.value(m);
  const double b2 = spec.beta2.value(m);
  const double al = spec.alpha.value(m);
  const double kap = b1 * b2 / al;
  const double kp = b1 / b2;

  // Step and tolerance come from the normalized twin so both code paths
  // share one normalized-time step sequence.
  const double h0 = resolve_step(config, norm0, kap, kp, ds);
  const double r0 = empirical_risk(norm0, kap, ds);
  const double tol = resolve_tolerance(config, r0, ds.n);

  NetworkParams raw = norm0;
  for (double& v : raw.a) v *= b1;
  for (double& v : raw.w) v *= b2;

  const Drive dv{1.0 / al, 1.0 / al, 1.0, b1 * b2, 1.0 / b1, 1.0 / b2};
  return run_flow(raw, dv, ds, h0, tol, config);
}

std::string trajectory_to_csv(const Trajectory& trajectory) {
  std::string out = "t,loss,rd_w,rd_theta,rd_a,alpha_max,omega_max\n";
  for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
    out += g17(trajectory.times[i]);
    out += ',';
    out += g17(trajectory.losses[i]);
    out += ',';
    out += g17(trajectory.rd_w[i]);
    out += ',';
    out += g17(trajectory.rd_theta[i]);
    out += ',';
    out += g17(trajectory.rd_a[i]);
    out += ',';
    out += g17(trajectory.alpha_max[i]);
    out += ',';
    out += g17(trajectory.omega_max[i]);
    out += '\n';
  }
  return out;
}

}  // namespace reluphase
