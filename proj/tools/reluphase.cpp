// Command-line front end over the library: preset tables, single trainings,
// phase-diagram scans, kernel spectra, condensation summaries, and bound
// verification reports. Every invocation that writes files also writes one
// manifest; CSV outputs carry the manifest id on their first line.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "reluphase/dataset.hpp"
#include "reluphase/dynamics.hpp"
#include "reluphase/features.hpp"
#include "reluphase/gram.hpp"
#include "reluphase/io_util.hpp"
#include "reluphase/network.hpp"
#include "reluphase/scaling.hpp"
#include "reluphase/scan.hpp"
#include "reluphase/theory.hpp"
#include "reluphase/version.hpp"

namespace fs = std::filesystem;
using namespace reluphase;

namespace {

struct Manifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;  // hashed into the id
  std::vector<std::pair<std::string, std::string>> info;    // context only
  std::vector<std::string> outputs;

  void set(const std::string& key, const std::string& value) { config.emplace_back(key, value); }
  void set(const std::string& key, double value) { config.emplace_back(key, g17(value)); }
  void set(const std::string& key, std::size_t value) {
    config.emplace_back(key, std::to_string(value));
  }
  void set(const std::string& key, bool value) {
    config.emplace_back(key, value ? "true" : "false");
  }
  void note(const std::string& key, const std::string& value) { info.emplace_back(key, value); }

  std::string id_hex() const {
    std::string canon = command;
    for (const auto& [k, v] : config) {
      canon += '\n';
      canon += k;
      canon += '=';
      canon += v;
    }
    return hex16(fnv1a64(canon));
  }
};

void emit_csv(Manifest& mf, const fs::path& out_dir, const std::string& name,
              const std::string& body) {
  write_file_atomic(out_dir / name, "# manifest " + mf.id_hex() + "\n" + body);
  mf.outputs.push_back(name);
}

void write_manifest(const Manifest& mf, const fs::path& out_dir, const std::string& started) {
  std::string text;
  text += "manifest=" + mf.id_hex() + "\n";
  text += "command=" + mf.command + "\n";
  text += "version=" + std::string(kVersion) + "\n";
  text += "started=" + started + "\n";
  text += "finished=" + iso8601_utc_now() + "\n";
  for (const auto& [k, v] : mf.config) text += k + "=" + v + "\n";
  for (const auto& [k, v] : mf.info) text += k + "=" + v + "\n";
  for (const auto& name : mf.outputs) text += "output=" + name + "\n";
  write_file_atomic(out_dir / ("manifest_" + mf.id_hex() + ".kv"), text);
}

Dataset resolve_dataset(const std::string& text) {
  if (text == "builtin:default") return default_dataset();
  if (text.rfind("idx:", 0) == 0) {
    const std::vector<std::string> parts = split(text.substr(4), ':');
    if (parts.size() < 2 || parts.size() > 3)
      throw std::runtime_error("idx dataset needs idx:<images>:<labels>[:<count>]");
    const std::size_t count = parts.size() == 3 ? static_cast<std::size_t>(parse_int(parts[2])) : 0;
    return from_idx(parts[0], parts[1], count);
  }
  return dataset_from_csv(read_file(text));
}

Dataset load_and_validate(const std::string& text, bool theory_mode) {
  Dataset ds = resolve_dataset(text);
  const ValidationReport report = validate(ds, theory_mode);
  if (!report.ok) {
    std::string msg = "dataset validation failed:";
    for (const auto& v : report.violations) msg += " " + v + ";";
    throw std::runtime_error(msg);
  }
  return ds;
}

using KvList = std::vector<std::pair<std::string, std::string>>;

void print_kv(const KvList& entries) {
  for (const auto& [k, v] : entries) std::printf("%s=%s\n", k.c_str(), v.c_str());
}

std::string join_g17(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + g17(values[i]);
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

std::string flag_name(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

// Turns config-file lines into flag tokens placed before the command-line
// ones; keys already given as flags are dropped so flags override the file.
std::vector<std::string> inject_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::vector<std::string> out;
  out.push_back(args[0]);
  for (const std::string& raw : split(read_file(path), '\n')) {
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t pos = line.find('=');
    if (pos == std::string::npos) throw std::runtime_error("config line without '=': " + line);
    const std::string key = trim(line.substr(0, pos));
    const std::string value = trim(line.substr(pos + 1));
    if (key.empty() || key == "config" || value.empty()) continue;
    const std::string flag = flag_name(key);
    bool overridden = false;
    for (std::size_t i = 1; i < args.size() && !overridden; ++i) {
      overridden = args[i] == flag || args[i].rfind(flag + "=", 0) == 0;
    }
    if (!overridden) out.push_back(flag + "=" + value);
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

// Step config shared by train and verify.
struct FlowFlags {
  double initial_step = 0.0;
  double max_time = 1e12;
  double risk_tolerance = -1.0;
  std::size_t record_stride = 1;
  std::size_t max_steps = 500000;
  std::size_t snapshot_limit = 0;
  bool fixed_step = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--initial-step", initial_step,
                    "Euler step; 0 resolves from the initial Gram spectrum");
    cmd->add_option("--max-time", max_time, "normalized-time budget");
    cmd->add_option("--risk-tolerance", risk_tolerance,
                    "stop threshold; negative resolves to max(risk0*1e-6, 1/(32n))");
    cmd->add_option("--record-stride", record_stride, "record every k-th accepted step");
    cmd->add_option("--max-steps", max_steps, "accepted-step budget");
    cmd->add_option("--snapshot-limit", snapshot_limit,
                    "retained parameter snapshots beyond the endpoints");
    cmd->add_flag("--fixed-step", fixed_step, "accept every step and never rescale it");
  }

  FlowConfig config() const {
    FlowConfig fc;
    fc.initial_step = initial_step;
    fc.max_time = max_time;
    fc.risk_tolerance = risk_tolerance;
    fc.record_stride = record_stride;
    fc.max_steps = max_steps;
    fc.snapshot_limit = snapshot_limit;
    fc.adaptive = !fixed_step;
    return fc;
  }

  void describe(Manifest& mf) const {
    mf.set("initial_step", initial_step);
    mf.set("max_time", max_time);
    mf.set("risk_tolerance", risk_tolerance);
    mf.set("record_stride", record_stride);
    mf.set("max_steps", max_steps);
    mf.set("snapshot_limit", snapshot_limit);
    mf.set("fixed_step", fixed_step);
  }

  void effective(KvList& out) const {
    out.emplace_back("initial_step", g17(initial_step));
    out.emplace_back("max_time", g17(max_time));
    out.emplace_back("risk_tolerance", g17(risk_tolerance));
    out.emplace_back("record_stride", std::to_string(record_stride));
    out.emplace_back("max_steps", std::to_string(max_steps));
    out.emplace_back("snapshot_limit", std::to_string(snapshot_limit));
    out.emplace_back("fixed_step", fixed_step ? "true" : "false");
  }
};

// Phase-point selection: explicit coordinates with optional prefactors, or a
// named preset whose power laws fix both coefficients.
struct CellFlags {
  std::optional<double> gamma;
  std::optional<double> gamma_prime;
  std::string preset_text;
  std::optional<double> beta_exponent;
  double kappa_coeff = 1.0;
  double kappa_prime_coeff = 1.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--gamma", gamma, "first phase coordinate, -log_m kappa");
    cmd->add_option("--gamma-prime", gamma_prime, "second phase coordinate, -log_m kappa'");
    cmd->add_option("--preset", preset_text,
                    "named initialization scaling (lecun, he, xavier, ntk, mean-field, "
                    "beta-power)");
    cmd->add_option("--beta-exponent", beta_exponent, "exponent b for the beta-power preset");
    cmd->add_option("--kappa-coeff", kappa_coeff, "prefactor of kappa = coeff * m^-gamma");
    cmd->add_option("--kappa-prime-coeff", kappa_prime_coeff,
                    "prefactor of kappa' = coeff * m^-gamma'");
  }

  struct Cell {
    PhaseCoordinates coords;
    double kappa = 0.0;
    double kappa_prime = 0.0;
    std::string preset_name;
  };

  Cell resolve(std::size_t m, std::size_t d) const {
    Cell cell;
    if (!preset_text.empty()) {
      if (gamma || gamma_prime)
        throw std::runtime_error("--preset conflicts with --gamma/--gamma-prime");
      const PresetName name = preset_from_string(preset_text);
      const ScalingSpec spec = preset(name, d, beta_exponent);
      cell.coords = phase_coordinates(spec);
      cell.kappa = kappa(spec).value(m);
      cell.kappa_prime = kappa_prime(spec).value(m);
      cell.preset_name = preset_label(name);
      return cell;
    }
    if (!gamma || !gamma_prime)
      throw std::runtime_error("need either --preset or both --gamma and --gamma-prime");
    cell.coords = {*gamma, *gamma_prime};
    const Realized rz = realize(cell.coords, m, kappa_coeff, kappa_prime_coeff);
    cell.kappa = rz.kappa;
    cell.kappa_prime = rz.kappa_prime;
    return cell;
  }

  void describe(Manifest& mf, const Cell& cell) const {
    mf.set("gamma", cell.coords.gamma);
    mf.set("gamma_prime", cell.coords.gamma_prime);
    mf.set("kappa", cell.kappa);
    mf.set("kappa_prime", cell.kappa_prime);
    if (!cell.preset_name.empty()) mf.set("preset", cell.preset_name);
  }

  void effective(KvList& out) const {
    if (gamma) out.emplace_back("gamma", g17(*gamma));
    if (gamma_prime) out.emplace_back("gamma_prime", g17(*gamma_prime));
    if (!preset_text.empty()) out.emplace_back("preset", preset_text);
    if (beta_exponent) out.emplace_back("beta_exponent", g17(*beta_exponent));
    out.emplace_back("kappa_coeff", g17(kappa_coeff));
    out.emplace_back("kappa_prime_coeff", g17(kappa_prime_coeff));
  }
};

bool resolve_asi(const std::string& mode, double gamma) {
  if (mode == "on") return true;
  if (mode == "off") return false;
  if (mode == "auto") return gamma <= 0.5;
  throw std::runtime_error("--asi must be auto, on or off");
}

// Width actually trained: mirrored pairs need an even neuron count.
std::size_t resolve_effective_width(std::size_t m, bool use_asi) {
  return use_asi && m % 2 == 1 ? m + 1 : m;
}

NetworkParams build_initial_params(std::size_t m_eff, std::size_t d, std::uint64_t seed,
                                   bool use_asi) {
  InitConfig ic;
  ic.m = use_asi ? m_eff / 2 : m_eff;
  ic.d = d;
  ic.seed = seed;
  ic.use_asi = use_asi;
  return init_params(ic);
}

int cmd_presets(std::size_t d, std::size_t m, std::optional<double> beta_exponent) {
  std::vector<PresetName> names = {PresetName::LeCun, PresetName::He, PresetName::Xavier,
                                   PresetName::Ntk, PresetName::MeanField};
  if (beta_exponent) names.push_back(PresetName::BetaPower);
  std::string table = "preset,alpha,beta1,beta2,kappa,kappa_prime,gamma,gamma_prime";
  if (m > 0) table += ",kappa_at_m,kappa_prime_at_m";
  table += "\n";
  for (const PresetName name : names) {
    const ScalingSpec spec = preset(name, d, beta_exponent);
    const PowerLaw ka = kappa(spec);
    const PowerLaw kp = kappa_prime(spec);
    const PhaseCoordinates coords = phase_coordinates(spec);
    table += preset_label(name) + "," + spec.alpha.str() + "," + spec.beta1.str() + "," +
             spec.beta2.str() + "," + ka.str() + "," + kp.str() + "," + g17(coords.gamma) + "," +
             g17(coords.gamma_prime);
    if (m > 0) table += "," + g17(ka.value(m)) + "," + g17(kp.value(m));
    table += "\n";
  }
  std::fputs(table.c_str(), stdout);
  return 0;
}

struct TrainOpts {
  CellFlags cell;
  FlowFlags flow;
  std::size_t m = 0;
  std::string dataset_text = "builtin:default";
  std::uint64_t seed = 0;
  std::string asi_mode = "auto";
  std::string out_dir = "out";
  bool theory_mode = false;
  bool print_config = false;
  std::string config_path;
  CLI::App* cmd = nullptr;

  void attach(CLI::App* sub) {
    cmd = sub;
    cell.attach(sub);
    flow.attach(sub);
    sub->add_option("--m", m, "network width")->required();
    sub->add_option("--dataset", dataset_text, "builtin:default, a CSV path, or idx:<imgs>:<lbls>[:<count>]");
    sub->add_option("--seed", seed, "initialization seed");
    sub->add_option("--asi", asi_mode, "mirrored-pair init: auto (gamma <= 1/2), on, off");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_flag("--theory-mode", theory_mode, "enforce the strict dataset conditions");
    sub->add_flag("--print-config", print_config, "print the effective config and exit");
    sub->add_option("--config", config_path, "flat key=value config file; flags override it");
  }

  int run() const {
    if (print_config) {
      KvList kv;
      cell.effective(kv);
      kv.emplace_back("m", std::to_string(m));
      kv.emplace_back("dataset", dataset_text);
      kv.emplace_back("seed", std::to_string(seed));
      kv.emplace_back("asi", asi_mode);
      kv.emplace_back("out_dir", out_dir);
      kv.emplace_back("theory_mode", theory_mode ? "true" : "false");
      flow.effective(kv);
      print_kv(kv);
      return 0;
    }
    const std::string started = iso8601_utc_now();
    const Dataset ds = load_and_validate(dataset_text, theory_mode);
    const CellFlags::Cell cl = cell.resolve(m, ds.d);
    const bool use_asi = resolve_asi(asi_mode, cl.coords.gamma);
    const std::size_t m_eff = resolve_effective_width(m, use_asi);
    const NetworkParams p0 = build_initial_params(m_eff, ds.d, seed, use_asi);
    const FlowConfig fc = flow.config();
    const RunResult run = integrate(p0, cl.kappa, cl.kappa_prime, ds, fc);

    Manifest mf;
    mf.command = "train";
    mf.set("dataset", dataset_text);
    mf.set("dataset_fingerprint", hex16(dataset_fingerprint(ds)));
    cell.describe(mf, cl);
    mf.set("m", m);
    mf.set("effective_width", m_eff);
    mf.set("asi", use_asi);
    mf.set("seed", std::to_string(seed));
    mf.set("theory_mode", theory_mode);
    flow.describe(mf);
    mf.note("resolved_initial_step", g17(run.resolved_initial_step));
    mf.note("resolved_risk_tolerance", g17(run.resolved_risk_tolerance));
    mf.note("stop_reason", stop_reason_name(run.stop_reason));
    mf.note("accepted_steps", std::to_string(run.accepted_steps));
    mf.note("final_risk", g17(run.final_risk));
    mf.note("sup_rd_w", g17(run.sup_rd_w));
    mf.note("sup_rd_theta", g17(run.sup_rd_theta));
    mf.note("sup_rd_a", g17(run.sup_rd_a));

    fs::create_directories(out_dir);
    emit_csv(mf, out_dir, "trajectory.csv", trajectory_to_csv(run.trajectory));
    emit_csv(mf, out_dir, "final_params.csv", params_to_csv(run.final_params));
    emit_csv(mf, out_dir, "features_init.csv", scatter_csv(extract_features(p0), "init"));
    emit_csv(mf, out_dir, "features_final.csv",
             scatter_csv(extract_features(run.final_params), "final"));
    save_snapshot(fs::path(out_dir) / "final.snap", run.final_params, seed, cl.kappa,
                  cl.kappa_prime);
    mf.outputs.push_back("final.snap");
    write_manifest(mf, out_dir, started);

    std::printf("stop=%s steps=%llu time=%s risk=%s\n", stop_reason_name(run.stop_reason).c_str(),
                static_cast<unsigned long long>(run.accepted_steps), g17(run.final_time).c_str(),
                g17(run.final_risk).c_str());
    std::printf("sup_rd_w=%s sup_rd_theta=%s sup_rd_a=%s\n", g17(run.sup_rd_w).c_str(),
                g17(run.sup_rd_theta).c_str(), g17(run.sup_rd_a).c_str());
    return 0;
  }
};

struct ScanOpts {
  FlowFlags flow;
  std::vector<double> gammas;
  std::vector<double> gamma_primes;
  std::vector<std::size_t> widths;
  std::size_t replicates = 3;
  std::uint64_t seed = 0;
  double kappa_coeff = 1.0;
  double kappa_prime_coeff = 1.0;
  int jobs = 1;
  std::string dataset_text = "builtin:default";
  std::string out_dir = "out";
  bool no_cache = false;
  bool print_config = false;
  std::string config_path;
  CLI::App* cmd = nullptr;

  void attach(CLI::App* sub) {
    cmd = sub;
    flow.attach(sub);
    sub->add_option("--gammas", gammas, "grid of gamma values")->delimiter(',')->required();
    sub->add_option("--gamma-primes", gamma_primes, "grid of gamma' values")
        ->delimiter(',')
        ->required();
    sub->add_option("--widths", widths, "widths per cell, at least two")
        ->delimiter(',')
        ->required();
    sub->add_option("--replicates", replicates, "independent replicates per width");
    sub->add_option("--seed", seed, "base seed; every run seed derives from it");
    sub->add_option("--kappa-coeff", kappa_coeff, "prefactor of kappa");
    sub->add_option("--kappa-prime-coeff", kappa_prime_coeff, "prefactor of kappa'");
    sub->add_option("--jobs", jobs, "parallel runs; results do not depend on it");
    sub->add_option("--dataset", dataset_text, "builtin:default, a CSV path, or idx:<imgs>:<lbls>[:<count>]");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_flag("--no-cache", no_cache, "recompute everything instead of resuming");
    sub->add_flag("--print-config", print_config, "print the effective config and exit");
    sub->add_option("--config", config_path, "flat key=value config file; flags override it");
  }

  int run() const {
    if (print_config) {
      KvList kv;
      kv.emplace_back("gammas", join_g17(gammas));
      kv.emplace_back("gamma_primes", join_g17(gamma_primes));
      kv.emplace_back("widths", join_sizes(widths));
      kv.emplace_back("replicates", std::to_string(replicates));
      kv.emplace_back("seed", std::to_string(seed));
      kv.emplace_back("kappa_coeff", g17(kappa_coeff));
      kv.emplace_back("kappa_prime_coeff", g17(kappa_prime_coeff));
      kv.emplace_back("jobs", std::to_string(jobs));
      kv.emplace_back("dataset", dataset_text);
      kv.emplace_back("out_dir", out_dir);
      kv.emplace_back("no_cache", no_cache ? "true" : "false");
      flow.effective(kv);
      print_kv(kv);
      return 0;
    }
    const std::string started = iso8601_utc_now();
    const Dataset ds = load_and_validate(dataset_text, false);
    ScanGrid grid;
    grid.gamma_values = gammas;
    grid.gamma_prime_values = gamma_primes;
    grid.widths = widths;
    grid.replicates = replicates;
    grid.base_seed = seed;
    grid.kappa_coeff = kappa_coeff;
    grid.kappa_prime_coeff = kappa_prime_coeff;
    const FlowConfig fc = flow.config();

    fs::create_directories(out_dir);
    const fs::path cache_dir = no_cache ? fs::path{} : fs::path(out_dir) / "cache";
    const PhaseMap map = scan(grid, ds, fc, jobs, cache_dir);
    for (const auto& warning : map.warnings) std::fprintf(stderr, "warning: %s\n", warning.c_str());
    const std::vector<BoundaryZero> zeros = boundary_zeros(map);

    Manifest mf;
    mf.command = "scan";
    mf.set("dataset", dataset_text);
    mf.set("dataset_fingerprint", hex16(dataset_fingerprint(ds)));
    mf.set("scan_fingerprint", hex16(scan_fingerprint(grid, ds, fc)));
    mf.set("replicates", replicates);
    mf.set("base_seed", std::to_string(seed));
    mf.set("kappa_coeff", kappa_coeff);
    mf.set("kappa_prime_coeff", kappa_prime_coeff);
    flow.describe(mf);
    mf.note("jobs", std::to_string(jobs));
    mf.note("cache", no_cache ? "off" : (fs::path(out_dir) / "cache").string());

    emit_csv(mf, out_dir, "map.csv", map_csv(map));
    emit_csv(mf, out_dir, "summary.csv", summary_csv(map));
    emit_csv(mf, out_dir, "zeros.csv", zeros_csv(zeros));
    write_manifest(mf, out_dir, started);

    std::size_t partial = 0;
    for (const auto& cell : map.cells) partial += cell.partial ? 1 : 0;
    std::printf("cells=%zu partial=%zu zeros=%zu\n", map.cells.size(), partial, zeros.size());
    for (const auto& z : zeros)
      std::printf("zero gamma_prime=%s gamma=%s\n", g17(z.gamma_prime).c_str(),
                  g17(z.gamma_at_zero).c_str());
    return 0;
  }
};

struct SpectrumOpts {
  CellFlags cell;
  std::string dataset_text = "builtin:default";
  std::size_t mc_samples = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  bool print_config = false;
  std::string config_path;
  CLI::App* cmd = nullptr;

  void attach(CLI::App* sub) {
    cmd = sub;
    cell.attach(sub);
    sub->add_option("--dataset", dataset_text, "builtin:default, a CSV path, or idx:<imgs>:<lbls>[:<count>]");
    sub->add_option("--mc-samples", mc_samples, "Monte Carlo cross-check sample count (0 = off)");
    sub->add_option("--m", m, "finite width for the empirical Gram matrices (0 = off)");
    sub->add_option("--seed", seed, "seed for sampling and the finite-width draw");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_flag("--print-config", print_config, "print the effective config and exit");
    sub->add_option("--config", config_path, "flat key=value config file; flags override it");
  }

  int run() const {
    if (print_config) {
      KvList kv;
      cell.effective(kv);
      kv.emplace_back("dataset", dataset_text);
      kv.emplace_back("mc_samples", std::to_string(mc_samples));
      kv.emplace_back("m", std::to_string(m));
      kv.emplace_back("seed", std::to_string(seed));
      kv.emplace_back("out_dir", out_dir);
      print_kv(kv);
      return 0;
    }
    const std::string started = iso8601_utc_now();
    const Dataset ds = load_and_validate(dataset_text, false);
    const GramPair closed = gram_limit_closed(ds);

    Manifest mf;
    mf.command = "spectrum";
    mf.set("dataset", dataset_text);
    mf.set("dataset_fingerprint", hex16(dataset_fingerprint(ds)));
    mf.set("mc_samples", mc_samples);
    mf.set("m", m);
    mf.set("seed", std::to_string(seed));

    std::string table = "source,lambda_a,lambda_w,lambda\n";
    table += "closed," + g17(closed.lambda_a) + "," + g17(closed.lambda_w) + "," +
             g17(closed.lambda) + "\n";

    fs::create_directories(out_dir);
    emit_csv(mf, out_dir, "kernel_a_closed.csv", gram_to_csv(closed.k_a));
    emit_csv(mf, out_dir, "kernel_w_closed.csv", gram_to_csv(closed.k_w));

    if (mc_samples > 0) {
      const McGramPair mc = gram_limit_mc(ds, mc_samples, seed);
      table += "mc," + g17(mc.lambda_a) + "," + g17(mc.lambda_w) + "," + g17(mc.lambda) + "\n";
      emit_csv(mf, out_dir, "kernel_a_mc.csv", gram_to_csv(mc.k_a));
      emit_csv(mf, out_dir, "kernel_w_mc.csv", gram_to_csv(mc.k_w));
      emit_csv(mf, out_dir, "kernel_a_mc_se.csv", gram_to_csv(mc.se_a));
      emit_csv(mf, out_dir, "kernel_w_mc_se.csv", gram_to_csv(mc.se_w));
      double worst_z = 0.0;
      for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.n; ++j) {
          if (mc.se_a.at(i, j) > 0.0)
            worst_z = std::max(worst_z,
                               std::abs(mc.k_a.at(i, j) - closed.k_a.at(i, j)) / mc.se_a.at(i, j));
          if (mc.se_w.at(i, j) > 0.0)
            worst_z = std::max(worst_z,
                               std::abs(mc.k_w.at(i, j) - closed.k_w.at(i, j)) / mc.se_w.at(i, j));
        }
      }
      mf.note("mc_worst_z", g17(worst_z));
      std::printf("mc_worst_z=%s\n", g17(worst_z).c_str());
    }

    if (m > 0) {
      const CellFlags::Cell cl = cell.resolve(m, ds.d);
      const NetworkParams p0 = build_initial_params(m, ds.d, seed, false);
      const FiniteGram fg = gram_finite(p0, cl.kappa, cl.kappa_prime, ds);
      cell.describe(mf, cl);
      table += "finite," + g17(min_eigenvalue(fg.g_a)) + "," + g17(min_eigenvalue(fg.g_w)) + "," +
               g17(min_eigenvalue(fg.g)) + "\n";
      emit_csv(mf, out_dir, "gram_a.csv", gram_to_csv(fg.g_a));
      emit_csv(mf, out_dir, "gram_w.csv", gram_to_csv(fg.g_w));
    }

    emit_csv(mf, out_dir, "spectrum.csv", table);
    write_manifest(mf, out_dir, started);
    std::fputs(table.c_str(), stdout);
    return 0;
  }
};

struct CondenseOpts {
  std::string input;
  double fraction = 0.1;
  double tolerance = 0.05;
  std::string out_dir = "out";
  bool print_config = false;
  std::string config_path;
  CLI::App* cmd = nullptr;

  void attach(CLI::App* sub) {
    cmd = sub;
    sub->add_option("--input", input, "parameter snapshot written by train")->required();
    sub->add_option("--fraction", fraction, "active-set amplitude fraction");
    sub->add_option("--tolerance", tolerance, "cluster cosine tolerance");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_flag("--print-config", print_config, "print the effective config and exit");
    sub->add_option("--config", config_path, "flat key=value config file; flags override it");
  }

  int run() const {
    if (print_config) {
      KvList kv;
      kv.emplace_back("input", input);
      kv.emplace_back("fraction", g17(fraction));
      kv.emplace_back("tolerance", g17(tolerance));
      kv.emplace_back("out_dir", out_dir);
      print_kv(kv);
      return 0;
    }
    const std::string started = iso8601_utc_now();
    const Snapshot snap = load_snapshot(input);
    const FeatureCloud cloud = extract_features(snap.params);
    const CondensationSummary summary = condensation_summary(cloud, fraction, tolerance);

    Manifest mf;
    mf.command = "condense";
    mf.set("input_fingerprint", hex16(fnv1a64(read_file(input))));
    mf.set("fraction", fraction);
    mf.set("tolerance", tolerance);
    mf.note("input", input);
    mf.note("m", std::to_string(snap.params.m));
    mf.note("d", std::to_string(snap.params.d));
    mf.note("seed", std::to_string(snap.seed));
    mf.note("kappa", g17(snap.kappa));
    mf.note("kappa_prime", g17(snap.kappa_prime));

    std::string table =
        "active_count,cluster_count,angular_entropy,amplitude_threshold,cosine_tolerance\n";
    table += std::to_string(summary.active_count) + "," + std::to_string(summary.cluster_count) +
             "," + g17(summary.angular_entropy) + "," + g17(summary.amplitude_threshold) + "," +
             g17(summary.cosine_tolerance) + "\n";

    fs::create_directories(out_dir);
    emit_csv(mf, out_dir, "features.csv", scatter_csv(cloud, "snapshot"));
    emit_csv(mf, out_dir, "condensation.csv", table);
    write_manifest(mf, out_dir, started);

    std::printf("active=%zu clusters=%zu entropy=%s\n", summary.active_count,
                summary.cluster_count, g17(summary.angular_entropy).c_str());
    return 0;
  }
};

struct VerifyOpts {
  CellFlags cell;
  FlowFlags flow;
  std::size_t m = 0;
  std::string dataset_text = "builtin:default";
  std::uint64_t seed = 0;
  std::string asi_mode = "auto";
  double delta = 0.05;
  double bound_constant = 10.0;
  std::string out_dir = "out";
  bool print_config = false;
  std::string config_path;
  CLI::App* cmd = nullptr;

  void attach(CLI::App* sub) {
    cmd = sub;
    cell.attach(sub);
    flow.snapshot_limit = 32;
    flow.attach(sub);
    sub->add_option("--m", m, "network width")->required();
    sub->add_option("--dataset", dataset_text, "builtin:default, a CSV path, or idx:<imgs>:<lbls>[:<count>]");
    sub->add_option("--seed", seed, "initialization seed");
    sub->add_option("--asi", asi_mode, "mirrored-pair init: auto (gamma <= 1/2), on, off");
    sub->add_option("--delta", delta, "failure probability for the initial sup bound");
    sub->add_option("--bound-constant", bound_constant,
                    "slack multiple allowed on the deviation bounds");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_flag("--print-config", print_config, "print the effective config and exit");
    sub->add_option("--config", config_path, "flat key=value config file; flags override it");
  }

  int run() const {
    if (print_config) {
      KvList kv;
      cell.effective(kv);
      kv.emplace_back("m", std::to_string(m));
      kv.emplace_back("dataset", dataset_text);
      kv.emplace_back("seed", std::to_string(seed));
      kv.emplace_back("asi", asi_mode);
      kv.emplace_back("delta", g17(delta));
      kv.emplace_back("bound_constant", g17(bound_constant));
      kv.emplace_back("out_dir", out_dir);
      flow.effective(kv);
      print_kv(kv);
      return 0;
    }
    const std::string started = iso8601_utc_now();
    const Dataset ds = load_and_validate(dataset_text, true);
    const CellFlags::Cell cl = cell.resolve(m, ds.d);
    const bool use_asi = resolve_asi(asi_mode, cl.coords.gamma);
    const std::size_t m_eff = resolve_effective_width(m, use_asi);
    const NetworkParams p0 = build_initial_params(m_eff, ds.d, seed, use_asi);
    const FiniteGram fg = gram_finite(p0, cl.kappa, cl.kappa_prime, ds);
    const double lambda0 = min_eigenvalue(fg.g) / (cl.kappa * cl.kappa);
    const FlowConfig fc = flow.config();
    const RunResult run = integrate(p0, cl.kappa, cl.kappa_prime, ds, fc);

    std::vector<BoundReport> reports;
    reports.push_back(check_initial_param_bound(p0, delta, seed));
    for (auto& rep : check_initial_norms(p0, seed)) reports.push_back(rep);
    reports.push_back(check_decay_bound(run, decay_rate_min(p0.m, cl.kappa, ds.n, lambda0)));
    if (classify_regime(cl.coords) == RegimeLabel::Linear && p0.m >= 2) {
      reports.push_back(
          check_rd_bounds(run, p0.m, cl.kappa, cl.kappa_prime, cl.coords, bound_constant));
    } else {
      std::fprintf(stderr, "note: deviation bound skipped, cell is not in the linear regime\n");
    }
    reports.push_back(check_neuron_bound(run, cl.kappa_prime));
    for (auto& rep : reports) {
      rep.context.m = p0.m;
      rep.context.n = ds.n;
      rep.context.d = ds.d;
      rep.context.kappa = cl.kappa;
      rep.context.kappa_prime = cl.kappa_prime;
      rep.context.seed = seed;
    }

    Manifest mf;
    mf.command = "verify";
    mf.set("dataset", dataset_text);
    mf.set("dataset_fingerprint", hex16(dataset_fingerprint(ds)));
    cell.describe(mf, cl);
    mf.set("m", m);
    mf.set("effective_width", m_eff);
    mf.set("asi", use_asi);
    mf.set("seed", std::to_string(seed));
    mf.set("delta", delta);
    mf.set("bound_constant", bound_constant);
    flow.describe(mf);

    std::string human;
    std::size_t failed = 0;
    for (const auto& rep : reports) {
      char line[160];
      std::snprintf(line, sizeof line, "%-24s bound=%-14.6g empirical=%-14.6g %s\n",
                    rep.bound_name.c_str(), rep.theoretical_value, rep.empirical_value,
                    rep.satisfied ? "ok" : "VIOLATED");
      human += line;
      failed += rep.satisfied ? 0 : 1;
    }

    fs::create_directories(out_dir);
    emit_csv(mf, out_dir, "bounds.csv", reports_to_csv(reports));
    write_file_atomic(fs::path(out_dir) / "bounds.txt", "manifest " + mf.id_hex() + "\n" + human);
    mf.outputs.push_back("bounds.txt");
    mf.note("stop_reason", stop_reason_name(run.stop_reason));
    mf.note("final_risk", g17(run.final_risk));
    mf.note("violations", std::to_string(failed));
    write_manifest(mf, out_dir, started);

    std::fputs(human.c_str(), stdout);
    std::printf("%s\n", failed == 0 ? "all bounds satisfied" : "bound violations present");
    return failed == 0 ? 0 : 1;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Phase-diagram toolkit for wide two-layer ReLU networks: single trainings, width "
      "scans, kernel spectra, condensation summaries and bound verification."};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CLI::App* presets_cmd =
      app.add_subcommand("presets", "print the built-in initialization scalings");
  std::size_t presets_d = 2;
  std::size_t presets_m = 0;
  std::optional<double> presets_beta;
  presets_cmd->add_option("--d", presets_d, "input dimension including the bias coordinate");
  presets_cmd->add_option("--m", presets_m, "also evaluate kappa, kappa' at this width");
  presets_cmd->add_option("--beta-exponent", presets_beta, "include the beta-power preset");

  TrainOpts train;
  train.attach(app.add_subcommand("train", "train one network and export its trajectory"));
  ScanOpts scan_opts;
  scan_opts.attach(app.add_subcommand("scan", "grid scan over phase coordinates and widths"));
  SpectrumOpts spectrum;
  spectrum.attach(app.add_subcommand("spectrum", "kernel matrices and their spectra"));
  CondenseOpts condense;
  condense.attach(app.add_subcommand("condense", "cluster and entropy summary of a snapshot"));
  VerifyOpts verify;
  verify.attach(app.add_subcommand("verify", "bound reports for one phase-diagram cell"));

  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
    try {
      args = inject_config(args);
    } catch (const std::exception& err) {
      std::fprintf(stderr, "error: %s\n", err.what());
      return 1;
    }
  }
  std::vector<const char*> tokens;
  tokens.push_back(argv[0]);
  for (const std::string& a : args) tokens.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(tokens.size()), tokens.data());
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (presets_cmd->parsed()) return cmd_presets(presets_d, presets_m, presets_beta);
    if (train.cmd->parsed()) return train.run();
    if (scan_opts.cmd->parsed()) return scan_opts.run();
    if (spectrum.cmd->parsed()) return spectrum.run();
    if (condense.cmd->parsed()) return condense.run();
    if (verify.cmd->parsed()) return verify.run();
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
