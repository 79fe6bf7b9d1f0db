#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <omp.h>

#include "reluphase/dataset.hpp"
#include "reluphase/dynamics.hpp"
#include "reluphase/features.hpp"
#include "reluphase/gram.hpp"
#include "reluphase/io_util.hpp"
#include "reluphase/network.hpp"
#include "reluphase/reduction.hpp"
#include "reluphase/rng.hpp"
#include "reluphase/scaling.hpp"
#include "reluphase/scan.hpp"
#include "reluphase/theory.hpp"

using namespace reluphase;

namespace {

bool close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::fabs(a - b) <= std::max(abs_floor, rel * std::max(std::fabs(a), std::fabs(b)));
}

std::filesystem::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("reluphase_unit_" + tag + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Shared medium-width lazy run, computed once.
struct TinyRun {
  Realized rz;
  NetworkParams p0;
  RunResult run;
};

const TinyRun& lazy_run_256() {
  static const TinyRun tr = [] {
    TinyRun t;
    t.rz = realize({0.5, 0.0}, 256);
    t.p0 = init_params({256, 2, 5, false});
    FlowConfig fc;
    fc.max_steps = 4000;
    fc.snapshot_limit = 8;
    t.run = integrate(t.p0, t.rz.kappa, t.rz.kappa_prime, default_dataset(), fc);
    return t;
  }();
  return tr;
}

const TinyRun& lazy_run_4096() {
  static const TinyRun tr = [] {
    TinyRun t;
    t.rz = realize({0.5, 0.0}, 4096);
    t.p0 = init_params({4096, 2, 5, false});
    FlowConfig fc;
    fc.max_steps = 4000;
    t.run = integrate(t.p0, t.rz.kappa, t.rz.kappa_prime, default_dataset(), fc);
    return t;
  }();
  return tr;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                    std::uint32_t image_magic, std::uint32_t label_magic,
                    std::uint32_t image_count, std::uint32_t label_count,
                    const std::vector<unsigned char>& pixels,
                    const std::vector<unsigned char>& label_bytes) {
  std::ofstream img(images, std::ios::binary);
  write_be32(img, image_magic);
  write_be32(img, image_count);
  write_be32(img, 2);
  write_be32(img, 2);
  img.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  img.close();
  std::ofstream lab(labels, std::ios::binary);
  write_be32(lab, label_magic);
  write_be32(lab, label_count);
  lab.write(reinterpret_cast<const char*>(label_bytes.data()),
            static_cast<std::streamsize>(label_bytes.size()));
}

}  // namespace

TEST_CASE("rng streams are reproducible and well distributed") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(42).next_u64() == 15021278609987233951ull);
  CHECK(Rng(42).uniform53() == doctest::Approx(0.81430514512290986).epsilon(1e-15));
  CHECK(Rng(42).normal() == doctest::Approx(-0.76899305382100613).epsilon(1e-15));
  CHECK(Rng(42).next_u64() != Rng(43).next_u64());

  Rng r(7);
  const int draws = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  const double mean = s / draws;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(s2 / draws - mean * mean - 1.0) < 0.02);
  Rng u(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform53();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("mix_seed separates indices and is order sensitive") {
  CHECK(mix_seed(1, {2, 3}) == 7521888212171461645ull);
  CHECK(mix_seed(1, {2, 3}) != mix_seed(1, {3, 2}));
  CHECK(mix_seed(1, {2, 3}) != mix_seed(2, {2, 3}));
  CHECK(mix_seed(1, {2}) != mix_seed(1, {2, 0}));
  CHECK(mix64(1) != mix64(2));
}

TEST_CASE("leaf ranges tile the index range with bounded leaves") {
  CHECK(leaf_ranges(0, 4).empty());
  for (std::size_t count : {1ul, 5ul, 16ul, 1000ul, 1024ul, 1025ul}) {
    auto leaves = leaf_ranges(count, 4);
    std::size_t cursor = 0;
    for (auto [lo, hi] : leaves) {
      CHECK(lo == cursor);
      CHECK(hi > lo);
      CHECK(hi - lo <= 4);
      cursor = hi;
    }
    CHECK(cursor == count);
  }
}

TEST_CASE("pairwise sums are exact on integer data for any leaf size") {
  const std::size_t count = 3000;
  auto leaf = [](std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += static_cast<double>(i + 1);
    return acc;
  };
  const double expected = 3000.0 * 3001.0 / 2.0;
  for (std::size_t leaf_size : {1ul, 7ul, 64ul, kReductionLeaf, 5000ul}) {
    CHECK(pairwise_sum(count, leaf_size, leaf) == expected);
  }
  CHECK(pairwise_sum(0, 16, leaf) == 0.0);
}

TEST_CASE("combine_leaf_partials totals per-leaf vectors") {
  auto leaves = leaf_ranges(100, 8);
  const std::size_t width = 2;
  std::vector<double> partials(leaves.size() * width, 0.0);
  double t0 = 0.0, t1 = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const double v = static_cast<double>(li + 1);
    partials[li * width] = v;
    partials[li * width + 1] = 2.0 * v;
    t0 += v;
    t1 += 2.0 * v;
  }
  auto totals = combine_leaf_partials(partials, leaves.size(), width);
  REQUIRE(totals.size() == width);
  CHECK(totals[0] == t0);
  CHECK(totals[1] == t1);
}

TEST_CASE("g17 round trips doubles through text") {
  for (double v : {0.1, 3.141592653589793, 1e300, 4503599627370497.0, -1.0 / 3.0, 0.0}) {
    CHECK(parse_double(g17(v)) == v);
  }
  CHECK(std::signbit(parse_double(g17(-0.0))));
}

TEST_CASE("fnv1a64 matches the reference test vectors") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 12638187200555641996ull);
  CHECK(fnv1a64("abc") == 16654208175385433931ull);
  CHECK(hex16(0xdeadbeefull) == "00000000deadbeef");
}

TEST_CASE("split, trim and numeric parsing handle plain and hostile input") {
  auto parts = split("a,,b", ',');
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "a");
  CHECK(parts[1].empty());
  CHECK(parts[2] == "b");
  CHECK(trim("  a b\t") == "a b");
  CHECK(trim("") == "");
  CHECK(parse_int("-17") == -17);
  CHECK_THROWS(parse_double("x17"));
  CHECK_THROWS(parse_double(""));
  CHECK_THROWS(parse_int("abc"));
}

TEST_CASE("atomic writes land complete and leave no temp files") {
  auto dir = fresh_dir("atomic");
  const auto path = dir / "out.txt";
  write_file_atomic(path, "hello\n");
  CHECK(read_file(path) == "hello\n");
  write_file_atomic(path, "replaced");
  CHECK(read_file(path) == "replaced");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("iso8601 timestamps are utc shaped") {
  const std::string ts = iso8601_utc_now();
  REQUIRE(ts.size() == 20);
  CHECK(ts[4] == '-');
  CHECK(ts[10] == 'T');
  CHECK(ts.back() == 'Z');
}

TEST_CASE("power laws multiply, divide and evaluate") {
  const PowerLaw p(2.0, -0.5);
  CHECK(p.value(16) == doctest::Approx(0.5).epsilon(1e-15));
  const PowerLaw q = p * PowerLaw(3.0, 0.25);
  CHECK(q.coeff == 6.0);
  CHECK(q.exponent == -0.25);
  const PowerLaw r = p / PowerLaw(2.0, -0.5);
  CHECK(r.coeff == 1.0);
  CHECK(r.exponent == 0.0);
  CHECK(p.str() == "2*m^-0.5");
  CHECK(PowerLaw(3.0, 0.0).str() == "3");
}

TEST_CASE("presets realize the documented scaling table") {
  struct Row {
    PresetName name;
    double kc, ke, pc, pe;
  };
  const Row rows[] = {
      {PresetName::LeCun, 1.0 / std::sqrt(2.0), -0.5, std::sqrt(2.0), -0.5},
      {PresetName::He, std::sqrt(2.0), -0.5, std::sqrt(2.0), -0.5},
      {PresetName::Xavier, 2.0, -1.0, 1.0, 0.0},
      {PresetName::Ntk, 1.0, -0.5, 1.0, 0.0},
      {PresetName::MeanField, 1.0, -1.0, 1.0, 0.0},
  };
  for (const Row& row : rows) {
    const ScalingSpec spec = preset(row.name, 2);
    const PowerLaw k = kappa(spec);
    const PowerLaw kp = kappa_prime(spec);
    CHECK(close(k.coeff, row.kc, 1e-14));
    CHECK(k.exponent == row.ke);
    CHECK(close(kp.coeff, row.pc, 1e-14));
    CHECK(kp.exponent == row.pe);
    const PhaseCoordinates pc = phase_coordinates(spec);
    CHECK(pc.gamma == -row.ke);
    CHECK(pc.gamma_prime == -row.pe);
  }
  CHECK(preset_from_string("ntk") == PresetName::Ntk);
  CHECK(preset_label(PresetName::MeanField) == "mean-field");
  CHECK(preset_from_string(preset_label(PresetName::BetaPower)) == PresetName::BetaPower);
  CHECK_THROWS(preset_from_string("glorot"));
}

TEST_CASE("beta-power preset requires its exponent") {
  CHECK_THROWS(preset(PresetName::BetaPower, 2));
  const PhaseCoordinates pc = phase_coordinates(preset(PresetName::BetaPower, 2, 0.25));
  CHECK(pc.gamma == 0.25);
  CHECK(pc.gamma_prime == 0.25);
}

TEST_CASE("phase coordinates never print negative zero") {
  for (PresetName name : {PresetName::Xavier, PresetName::Ntk, PresetName::MeanField}) {
    const PhaseCoordinates pc = phase_coordinates(preset(name, 2));
    CHECK(g17(pc.gamma_prime) == "0");
  }
}

TEST_CASE("regimes partition the phase plane") {
  auto label = [](double g, double gp) { return classify_regime({g, gp}); };
  CHECK(label(0.5, 0.0) == RegimeLabel::Linear);
  CHECK(label(0.5, 0.5) == RegimeLabel::Linear);
  CHECK(label(0.9, 5.0) == RegimeLabel::Linear);
  CHECK(label(1.2, 0.3) == RegimeLabel::Linear);
  CHECK(label(1.0, 0.0) == RegimeLabel::Critical);
  CHECK(label(1.0, -0.3) == RegimeLabel::Critical);
  CHECK(label(1.5, 0.5) == RegimeLabel::Critical);
  CHECK(label(2.0, 1.0) == RegimeLabel::Critical);
  CHECK(label(1.2, -0.1) == RegimeLabel::Condensed);
  CHECK(label(1.75, 0.0) == RegimeLabel::Condensed);
  CHECK(label(3.0, -2.0) == RegimeLabel::Condensed);
  CHECK(regime_name(RegimeLabel::Linear) == "linear");
  CHECK(regime_name(RegimeLabel::Critical) == "critical");
  CHECK(regime_name(RegimeLabel::Condensed) == "condensed");
}

TEST_CASE("boundary distance is zero exactly on the critical set") {
  CHECK(boundary_distance({1.0, 0.0}) == 0.0);
  CHECK(boundary_distance({1.0, -2.0}) == 0.0);
  CHECK(boundary_distance({1.5, 0.5}) == 0.0);
  CHECK(boundary_distance({2.0, 1.0}) == 0.0);
  CHECK(close(boundary_distance({0.5, 0.0}), 0.5, 1e-14));
  CHECK(close(boundary_distance({0.5, 0.5}), std::sqrt(0.5), 1e-14));
  CHECK(close(boundary_distance({1.75, 0.0}), 0.75 / std::sqrt(2.0), 1e-14));
}

TEST_CASE("realize applies coefficients to canonical powers") {
  const Realized base = realize({0.5, 0.0}, 64);
  CHECK(base.kappa == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(base.kappa_prime == 1.0);
  const Realized scaled = realize({0.5, 0.0}, 64, 2.0, 0.5);
  CHECK(scaled.kappa == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(scaled.kappa_prime == 0.5);
}

TEST_CASE("the built-in dataset is frozen") {
  const Dataset ds = default_dataset();
  REQUIRE(ds.n == 4);
  REQUIRE(ds.d == 2);
  const double xs[] = {0.1, 0.35, 0.6, 0.85};
  const double ys[] = {0.8, 0.2, 0.6, 0.4};
  for (std::size_t i = 0; i < ds.n; ++i) {
    CHECK(ds.x[i * 2] == xs[i]);
    CHECK(ds.x[i * 2 + 1] == 1.0);
    CHECK(ds.y[i] == ys[i]);
  }
  CHECK(hex16(dataset_fingerprint(ds)) == "f03f729313e5cc59");
  CHECK(validate(ds, true).ok);
}

TEST_CASE("synthetic_1d validates and builds bias rows") {
  const Dataset ds = synthetic_1d({{0.2, 0.9}, {0.7, 0.1}});
  REQUIRE(ds.n == 2);
  REQUIRE(ds.d == 2);
  CHECK(ds.x[0] == 0.2);
  CHECK(ds.x[1] == 1.0);
  CHECK(ds.y[1] == 0.1);
  CHECK_THROWS(synthetic_1d({}));
  CHECK_THROWS(synthetic_1d({{0.2, 0.9}, {0.2, 0.1}}));
}

TEST_CASE("validation flags violations in plain and theory mode") {
  Dataset high = default_dataset();
  high.y[0] = 1.2;
  CHECK(validate(high, false).ok);
  CHECK_FALSE(validate(high, true).ok);

  const Dataset faint = synthetic_1d({{0.1, 0.2}, {0.35, 0.2}, {0.6, 0.3}, {0.85, 0.4}});
  CHECK(validate(faint, false).ok);
  CHECK_FALSE(validate(faint, true).ok);

  Dataset bias = default_dataset();
  bias.x[1] = 0.9;
  const ValidationReport rep = validate(bias, false);
  CHECK_FALSE(rep.ok);
  CHECK_FALSE(rep.violations.empty());
}

TEST_CASE("dataset csv round trips bitwise") {
  const Dataset ds = default_dataset();
  const std::string text = dataset_to_csv(ds);
  CHECK(text.substr(0, text.find('\n')) == "x1,x2,y");
  const Dataset back = dataset_from_csv(text);
  CHECK(dataset_fingerprint(back) == dataset_fingerprint(ds));
  CHECK(dataset_to_csv(back) == text);
}

TEST_CASE("idx pairs load with scaled pixels and labels") {
  auto dir = fresh_dir("idx");
  const auto images = dir / "img.idx";
  const auto labels = dir / "lab.idx";
  const std::vector<unsigned char> pixels = {0, 51, 102, 153, 204, 255, 0, 128};
  write_idx_pair(images, labels, 2051, 2049, 2, 2, pixels, {3, 7});

  const Dataset ds = from_idx(images, labels);
  REQUIRE(ds.n == 2);
  REQUIRE(ds.d == 5);
  CHECK(ds.x[0] == 0.0);
  CHECK(ds.x[1] == doctest::Approx(51.0 / 255.0).epsilon(1e-15));
  CHECK(ds.x[4] == 1.0);
  CHECK(ds.x[5 + 1] == 1.0);
  CHECK(ds.y[0] == doctest::Approx(3.0 / 9.0).epsilon(1e-15));
  CHECK(ds.y[1] == doctest::Approx(7.0 / 9.0).epsilon(1e-15));
  CHECK(validate(ds, true).ok);

  const Dataset capped = from_idx(images, labels, 1);
  CHECK(capped.n == 1);
  const Dataset rescaled = from_idx(images, labels, 0, 0.1);
  CHECK(rescaled.y[0] == doctest::Approx(0.3).epsilon(1e-15));

  write_idx_pair(images, labels, 1234, 2049, 2, 2, pixels, {3, 7});
  CHECK_THROWS(from_idx(images, labels));
  write_idx_pair(images, labels, 2051, 2049, 2, 3, pixels, {3, 7, 1});
  CHECK_THROWS(from_idx(images, labels));
  std::filesystem::remove_all(dir);
}

TEST_CASE("initialization is seed deterministic and shape correct") {
  const NetworkParams a = init_params({50, 3, 11, false});
  const NetworkParams b = init_params({50, 3, 11, false});
  const NetworkParams c = init_params({50, 3, 12, false});
  REQUIRE(a.m == 50);
  REQUIRE(a.d == 3);
  REQUIRE(a.a.size() == 50);
  REQUIRE(a.w.size() == 150);
  CHECK(a.a == b.a);
  CHECK(a.w == b.w);
  CHECK(a.a != c.a);
}

TEST_CASE("asi doubling cancels the initial function exactly") {
  const NetworkParams p = init_params({32, 2, 3, true});
  REQUIRE(p.m == 64);
  for (std::size_t k = 0; k < 32; ++k) {
    CHECK(p.a[k + 32] == -p.a[k]);
    CHECK(p.row(k + 32)[0] == p.row(k)[0]);
    CHECK(p.row(k + 32)[1] == p.row(k)[1]);
  }
  Rng rng(99);
  for (std::size_t half : {5ul, 32ul, 500ul, 1024ul}) {
    const NetworkParams doubled = apply_asi(init_params({half, 2, 8, false}));
    REQUIRE(doubled.m == 2 * half);
    for (int i = 0; i < 10; ++i) {
      const double x[2] = {rng.normal(), 1.0};
      CHECK(forward(doubled, 0.37, x, 2) == 0.0);
    }
    Dataset ds = default_dataset();
    for (double out : outputs(doubled, 0.37, ds)) CHECK(out == 0.0);
    double target_norm = 0.0;
    for (double y : ds.y) target_norm += y * y;
    CHECK(empirical_risk(doubled, 0.37, ds) ==
          doctest::Approx(target_norm / (2.0 * static_cast<double>(ds.n))).epsilon(1e-15));
  }
  CHECK(empirical_risk(apply_asi(init_params({16, 2, 1, false})), 1.0, default_dataset()) ==
        doctest::Approx(0.15).epsilon(1e-15));
}

TEST_CASE("analytic flow derivatives match finite differences") {
  Rng rng(2024);
  for (int inst = 0; inst < 5; ++inst) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 4; ++i) {
      pts.emplace_back(0.1 + 0.22 * i + 0.01 * rng.uniform53(), 0.1 + 0.8 * rng.uniform53());
    }
    const Dataset ds = synthetic_1d(pts);
    const double kappa_v = 0.2 + rng.uniform53();
    const double kappa_p = 0.3 + rng.uniform53();
    NetworkParams p = init_params({7, 2, static_cast<std::uint64_t>(100 + inst), false});
    const GradientPair g = gradient(p, kappa_v, kappa_p, ds);
    const double h = 1e-6;
    auto risk_at = [&](NetworkParams& q) { return empirical_risk(q, kappa_v, ds); };
    for (std::size_t k = 0; k < p.m; ++k) {
      NetworkParams q = p;
      q.a[k] += h;
      const double up = risk_at(q);
      q.a[k] -= 2.0 * h;
      const double dn = risk_at(q);
      const double fd = (up - dn) / (2.0 * h);
      const double analytic = -kappa_p * g.da[k];
      CHECK(std::fabs(analytic - fd) <= 1e-5 * std::max(1.0, std::fabs(fd)));
    }
    for (std::size_t j = 0; j < p.m * p.d; ++j) {
      NetworkParams q = p;
      q.w[j] += h;
      const double up = risk_at(q);
      q.w[j] -= 2.0 * h;
      const double dn = risk_at(q);
      const double fd = (up - dn) / (2.0 * h);
      const double analytic = -g.dw[j] / kappa_p;
      CHECK(std::fabs(analytic - fd) <= 1e-5 * std::max(1.0, std::fabs(fd)));
    }
  }
}

TEST_CASE("parallel kernels agree bitwise with the serial reference") {
  const Dataset ds = default_dataset();
  const NetworkParams p = init_params({3000, 2, 77, false});
  const double kappa_v = 0.02;
  const double kappa_p = 1.4;

  const auto out_serial = serial_ref::outputs(p, kappa_v, ds);
  const auto grad_serial = serial_ref::gradient(p, kappa_v, kappa_p, ds);
  const auto out_base = outputs(p, kappa_v, ds);
  const auto grad_base = gradient(p, kappa_v, kappa_p, ds);
  auto max_abs = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::fabs(x));
    return s;
  };
  const double out_floor = 1e-12 * max_abs(out_serial);
  const double da_floor = 1e-12 * max_abs(grad_serial.da);
  const double dw_floor = 1e-12 * max_abs(grad_serial.dw);
  for (std::size_t i = 0; i < out_base.size(); ++i) {
    CHECK(close(out_base[i], out_serial[i], 1e-12, out_floor));
  }
  for (std::size_t k = 0; k < grad_base.da.size(); ++k) {
    CHECK(close(grad_base.da[k], grad_serial.da[k], 1e-12, da_floor));
  }
  for (std::size_t j = 0; j < grad_base.dw.size(); ++j) {
    CHECK(close(grad_base.dw[j], grad_serial.dw[j], 1e-12, dw_floor));
  }
  for (int threads : {2, 3}) {
    omp_set_num_threads(threads);
    const auto out_par = outputs(p, kappa_v, ds);
    const auto grad_par = gradient(p, kappa_v, kappa_p, ds);
    CHECK(out_par == out_base);
    CHECK(grad_par.da == grad_base.da);
    CHECK(grad_par.dw == grad_base.dw);
    CHECK(empirical_risk(p, kappa_v, ds) == risk_from_residuals(residuals(p, kappa_v, ds)));
  }
  omp_set_num_threads(1);
}

TEST_CASE("risk matches the hand-computed quadratic") {
  CHECK(risk_from_residuals({1.0, 2.0}) == 1.25);
  NetworkParams p;
  p.m = 2;
  p.d = 2;
  p.a = {1.0, -1.0};
  p.w = {1.0, 0.0, 0.0, 1.0};
  Dataset ds;
  ds.n = 1;
  ds.d = 2;
  ds.x = {0.5, 1.0};
  ds.y = {0.7};
  CHECK(forward(p, 2.0, ds.x.data(), 2) == -1.0);
  CHECK(empirical_risk(p, 2.0, ds) == doctest::Approx(1.445).epsilon(1e-15));
}

TEST_CASE("snapshots round trip bitwise and reject foreign files") {
  auto dir = fresh_dir("snap");
  const auto path = dir / "state.snap";
  const NetworkParams p = init_params({6, 2, 19, false});
  save_snapshot(path, p, 123, 0.25, 2.0);
  const Snapshot s = load_snapshot(path);
  CHECK(s.params.a == p.a);
  CHECK(s.params.w == p.w);
  CHECK(s.seed == 123);
  CHECK(s.kappa == 0.25);
  CHECK(s.kappa_prime == 2.0);
  write_file_atomic(path, "not a snapshot");
  CHECK_THROWS(load_snapshot(path));
  std::filesystem::remove_all(dir);
}

TEST_CASE("params csv has one row per neuron") {
  const NetworkParams p = init_params({6, 2, 19, false});
  const std::string text = params_to_csv(p);
  CHECK(text.substr(0, text.find('\n')) == "a,w1,w2");
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);
}

TEST_CASE("closed-form kernels match the frozen spectrum") {
  const Dataset ds = default_dataset();
  const GramPair gp = gram_limit_closed(ds);
  CHECK(close(gp.lambda_a, 0.00030644593427622336, 1e-12));
  CHECK(close(gp.lambda_w, 0.023829498944384363, 1e-12));
  CHECK(gp.lambda == std::min(gp.lambda_a, gp.lambda_w));
  CHECK(gp.lambda_a > 0.0);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const double xx = ds.x[i * 2] * ds.x[i * 2] + 1.0;
    CHECK(close(gp.k_a.at(i, i), xx / 2.0, 1e-14));
    CHECK(close(gp.k_w.at(i, i), xx / 2.0, 1e-14));
    for (std::size_t j = 0; j < ds.n; ++j) CHECK(gp.k_a.at(i, j) == gp.k_a.at(j, i));
  }
  CHECK(close(gp.k_a.at(0, 1), 0.51824780816311766, 1e-12));
  CHECK(close(gp.k_w.at(0, 1), 0.47845907239014374, 1e-12));

  Dataset degenerate;
  degenerate.n = 1;
  degenerate.d = 2;
  degenerate.x = {0.0, 0.0};
  degenerate.y = {0.5};
  CHECK_THROWS(gram_limit_closed(degenerate));
}

TEST_CASE("monte carlo kernels concentrate on the closed forms") {
  const Dataset ds = default_dataset();
  const GramPair gp = gram_limit_closed(ds);
  const McGramPair mc = gram_limit_mc(ds, 200000, 99);
  CHECK(mc.sample_count == 200000);
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = 0; j < ds.n; ++j) {
      CHECK(std::fabs(mc.k_a.at(i, j) - gp.k_a.at(i, j)) <= 5.0 * mc.se_a.at(i, j));
      CHECK(std::fabs(mc.k_w.at(i, j) - gp.k_w.at(i, j)) <= 5.0 * mc.se_w.at(i, j));
      CHECK(mc.se_a.at(i, j) > 0.0);
    }
  }
  CHECK_THROWS(gram_limit_mc(ds, 0, 1));
}

TEST_CASE("monte carlo kernels are bitwise deterministic across threads") {
  const Dataset ds = default_dataset();
  const McGramPair base = gram_limit_mc(ds, 200000, 99);
  const McGramPair again = gram_limit_mc(ds, 200000, 99);
  CHECK(base.k_a.v == again.k_a.v);
  CHECK(base.k_w.v == again.k_w.v);
  omp_set_num_threads(3);
  const McGramPair threaded = gram_limit_mc(ds, 200000, 99);
  omp_set_num_threads(1);
  CHECK(base.k_a.v == threaded.k_a.v);
  CHECK(base.k_w.v == threaded.k_w.v);
  CHECK(base.lambda_a == threaded.lambda_a);
  const McGramPair other = gram_limit_mc(ds, 200000, 100);
  CHECK(base.k_a.v != other.k_a.v);
}

TEST_CASE("finite grams approach the limiting kernels with width") {
  const Dataset ds = default_dataset();
  const GramPair gp = gram_limit_closed(ds);
  auto dist_at = [&](std::size_t m) {
    const Realized rz = realize({0.5, 0.0}, m);
    const NetworkParams p = init_params({m, 2, 21, false});
    FiniteGram fg = gram_finite(p, rz.kappa, rz.kappa_prime, ds);
    SymMatrix scaled = fg.g_a;
    const double factor = rz.kappa_prime / (rz.kappa * rz.kappa);
    for (double& v : scaled.v) v *= factor;
    return frobenius_distance(scaled, gp.k_a);
  };
  const double coarse = dist_at(400);
  const double fine = dist_at(4000);
  CHECK(fine < coarse / 5.0);
  CHECK(fine < 0.05);
}

TEST_CASE("jacobi finds the smallest eigenvalue and rejects bad input") {
  SymMatrix m2(2);
  m2.at(0, 0) = 2.0;
  m2.at(0, 1) = 1.0;
  m2.at(1, 0) = 1.0;
  m2.at(1, 1) = 2.0;
  CHECK(close(min_eigenvalue(m2), 1.0, 1e-10));

  SymMatrix diag(3);
  diag.at(0, 0) = 9.0;
  diag.at(1, 1) = 4.0;
  diag.at(2, 2) = 7.0;
  CHECK(close(min_eigenvalue(diag), 4.0, 1e-10));

  SymMatrix one(1);
  one.at(0, 0) = -3.0;
  CHECK(min_eigenvalue(one) == -3.0);

  SymMatrix skew(2);
  skew.at(0, 0) = 1.0;
  skew.at(0, 1) = 1.0;
  skew.at(1, 0) = -1.0;
  skew.at(1, 1) = 1.0;
  CHECK_THROWS(min_eigenvalue(skew));
  CHECK_THROWS(min_eigenvalue(SymMatrix{}));
  SymMatrix ragged(2);
  ragged.v.pop_back();
  CHECK_THROWS(min_eigenvalue(ragged));
}

TEST_CASE("decay rates follow the documented formulas") {
  CHECK(decay_rate_min(100, 0.1, 4, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  const double expected = (50.0 * 0.04 / 4.0) * (0.3 / 2.0 + 2.0 * 0.7);
  CHECK(decay_rate(50, 0.2, 2.0, 4, 0.3, 0.7) == doctest::Approx(expected).epsilon(1e-15));
  CHECK_THROWS(decay_rate_min(0, 0.1, 4, 2.0));
  CHECK_THROWS(decay_rate_min(100, -0.1, 4, 2.0));
}

TEST_CASE("step and tolerance defaults resolve as documented") {
  const TinyRun& t = lazy_run_256();
  const Dataset ds = default_dataset();
  CHECK(t.run.resolved_initial_step ==
        default_initial_step(t.p0, t.rz.kappa, t.rz.kappa_prime, ds));
  CHECK(close(t.run.resolved_initial_step, 44.01321897252997, 1e-9));
  CHECK(t.run.resolved_risk_tolerance == 0.0078125);
  CHECK(default_risk_tolerance(1.0, 4) == 0.0078125);
  CHECK(default_risk_tolerance(64000.0, 4) == doctest::Approx(0.064).epsilon(1e-15));
}

TEST_CASE("adaptive flow keeps recorded losses monotone") {
  const TinyRun& t = lazy_run_256();
  const auto& losses = t.run.trajectory.losses;
  REQUIRE(losses.size() >= 2);
  for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1]);
  CHECK(t.run.stop_reason == StopReason::MaxSteps);
  CHECK(t.run.accepted_steps == 4000);
  double max_rd_w = 0.0;
  for (double v : t.run.trajectory.rd_w) max_rd_w = std::max(max_rd_w, v);
  CHECK(t.run.sup_rd_w == max_rd_w);
  CHECK(t.run.final_risk == losses.back());
}

TEST_CASE("risk tolerance, time and step budgets stop the flow") {
  const TinyRun& wide = lazy_run_4096();
  CHECK(wide.run.stop_reason == StopReason::RiskTolerance);
  CHECK(wide.run.final_risk <= wide.run.resolved_risk_tolerance);

  const Dataset ds = default_dataset();
  const Realized rz = realize({0.5, 0.0}, 64);
  const NetworkParams p0 = init_params({64, 2, 9, false});
  FlowConfig fc;
  fc.adaptive = false;
  fc.initial_step = 0.5;
  fc.max_time = 5.0;
  fc.risk_tolerance = 0.0;
  fc.max_steps = 100000;
  const RunResult timed = integrate(p0, rz.kappa, rz.kappa_prime, ds, fc);
  CHECK(timed.stop_reason == StopReason::MaxTime);
  CHECK(timed.accepted_steps == 10);
  CHECK(timed.final_time == doctest::Approx(5.0).epsilon(1e-12));

  FlowConfig blow;
  blow.adaptive = false;
  blow.initial_step = 1e30;
  blow.risk_tolerance = 0.0;
  blow.max_steps = 1000;
  const RunResult exploded = integrate(p0, rz.kappa, rz.kappa_prime, ds, blow);
  CHECK(exploded.stop_reason == StopReason::Diverged);
  CHECK(stop_reason_name(StopReason::Diverged) == "diverged");
  CHECK(stop_reason_name(StopReason::RiskTolerance) == "risk_tolerance");
  CHECK(stop_reason_name(StopReason::MaxTime) == "max_time");
  CHECK(stop_reason_name(StopReason::MaxSteps) == "max_steps");
}

TEST_CASE("record stride and snapshot budget shape the trajectory") {
  const Dataset ds = default_dataset();
  const Realized rz = realize({0.5, 0.0}, 64);
  const NetworkParams p0 = init_params({64, 2, 9, false});
  FlowConfig fc;
  fc.adaptive = false;
  fc.initial_step = 0.25;
  fc.max_steps = 10;
  fc.risk_tolerance = 0.0;
  const RunResult dense = integrate(p0, rz.kappa, rz.kappa_prime, ds, fc);
  REQUIRE(dense.trajectory.times.size() == 11);
  CHECK(dense.trajectory.times.front() == 0.0);
  for (std::size_t i = 1; i < dense.trajectory.times.size(); ++i) {
    CHECK(dense.trajectory.times[i] > dense.trajectory.times[i - 1]);
  }
  CHECK(dense.trajectory.times.back() == dense.final_time);

  fc.record_stride = 1000000;
  const RunResult sparse = integrate(p0, rz.kappa, rz.kappa_prime, ds, fc);
  CHECK(sparse.trajectory.times.size() == 2);
  CHECK(sparse.trajectory.times.back() == sparse.final_time);

  const TinyRun& t = lazy_run_256();
  const auto& snaps = t.run.trajectory.snapshots;
  REQUIRE(snaps.size() >= 2);
  CHECK(snaps.size() <= 10);
  CHECK(snaps.front().time == 0.0);
  CHECK(snaps.back().time == t.run.final_time);
  CHECK(snaps.front().params.a == t.p0.a);
}

TEST_CASE("balancedness drift shrinks linearly with the step") {
  const Dataset ds = default_dataset();
  const Realized rz = realize({1.75, 0.0}, 64);
  const NetworkParams p0 = init_params({64, 2, 9, false});
  auto residual_at = [&](double h) {
    FlowConfig fc;
    fc.adaptive = false;
    fc.initial_step = h;
    fc.max_time = 200.0;
    fc.max_steps = 2000000;
    fc.risk_tolerance = 0.0;
    fc.record_stride = 1 << 30;
    const RunResult run = integrate(p0, rz.kappa, rz.kappa_prime, ds, fc);
    return balancedness_residual(run.final_params, p0, rz.kappa_prime);
  };
  const double coarse = residual_at(0.05);
  const double fine = residual_at(0.025);
  CHECK(coarse > 0.0);
  const double ratio = fine / coarse;
  CHECK(ratio > 0.4);
  CHECK(ratio < 0.6);
}

TEST_CASE("the normalized flow reproduces the original ntk trajectory") {
  const Dataset ds = default_dataset();
  const ScalingSpec spec = preset(PresetName::Ntk, 2);
  FlowConfig fc;
  fc.adaptive = false;
  fc.max_steps = 50;
  fc.risk_tolerance = 0.0;
  const RunResult original = simulate_original(spec, 64, ds, fc, 3);
  const Realized rz = realize(phase_coordinates(spec), 64);
  const NetworkParams p0 = init_params({64, 2, 3, false});
  const RunResult normalized = integrate(p0, rz.kappa, rz.kappa_prime, ds, fc);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < original.final_params.a.size(); ++k) {
    const double diff = original.final_params.a[k] - normalized.final_params.a[k];
    num += diff * diff;
    den += normalized.final_params.a[k] * normalized.final_params.a[k];
  }
  for (std::size_t j = 0; j < original.final_params.w.size(); ++j) {
    const double diff = original.final_params.w[j] - normalized.final_params.w[j];
    num += diff * diff;
    den += normalized.final_params.w[j] * normalized.final_params.w[j];
  }
  CHECK(std::sqrt(num / den) <= 1e-12);
  CHECK(close(original.final_risk, normalized.final_risk, 1e-12));
}

TEST_CASE("relative deviation and balancedness residual are exact on hand cases") {
  NetworkParams p;
  p.m = 2;
  p.d = 2;
  p.a = {3.0, 4.0};
  p.w = {1.0, 0.0, 0.0, 1.0};
  CHECK(relative_deviation(p, p, Block::A) == 0.0);
  CHECK(relative_deviation(p, p, Block::W) == 0.0);
  CHECK(relative_deviation(p, p, Block::Theta) == 0.0);
  NetworkParams q = p;
  q.a[0] += 5.0;
  CHECK(relative_deviation(q, p, Block::A) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(balancedness_residual(p, p, 1.0) == 0.0);
}

TEST_CASE("trajectory csv is column stable") {
  const TinyRun& t = lazy_run_256();
  const std::string text = trajectory_to_csv(t.run.trajectory);
  CHECK(text.substr(0, text.find('\n')) == "t,loss,rd_w,rd_theta,rd_a,alpha_max,omega_max");
  CHECK(std::count(text.begin(), text.end(), '\n') ==
        static_cast<long>(t.run.trajectory.times.size()) + 1);
}

TEST_CASE("feature extraction splits amplitude and orientation") {
  NetworkParams p;
  p.m = 3;
  p.d = 2;
  p.a = {3.0, -2.0, 5.0};
  p.w = {3.0, 4.0, 0.0, 1.0, 0.0, 0.0};
  const FeatureCloud cloud = extract_features(p);
  REQUIRE(cloud.m == 3);
  CHECK(cloud.amplitude[0] == doctest::Approx(15.0).epsilon(1e-15));
  CHECK(cloud.row(0)[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(cloud.row(0)[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(cloud.amplitude[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(cloud.inactive[0] == 0);
  CHECK(cloud.inactive[2] == 1);
  CHECK(cloud.amplitude[2] == 0.0);
}

TEST_CASE("angles cover the signed circle") {
  const double east[] = {1.0, 0.0};
  const double north[] = {0.0, 1.0};
  const double west[] = {-1.0, 0.0};
  const double south[] = {0.0, -1.0};
  const double diag[] = {std::sqrt(0.5), std::sqrt(0.5)};
  CHECK(angle_1d(east, 2) == 0.0);
  CHECK(angle_1d(north, 2) == doctest::Approx(std::acos(-1.0) / 2.0).epsilon(1e-15));
  CHECK(angle_1d(west, 2) == doctest::Approx(-std::acos(-1.0)).epsilon(1e-15));
  CHECK(angle_1d(south, 2) == doctest::Approx(-std::acos(-1.0) / 2.0).epsilon(1e-15));
  CHECK(angle_1d(diag, 2) == doctest::Approx(std::acos(-1.0) / 4.0).epsilon(1e-15));
}

TEST_CASE("projection uses the unit reference direction") {
  const auto ref = default_reference(2);
  REQUIRE(ref.size() == 2);
  CHECK(ref[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(ref[1] == ref[0]);

  NetworkParams p;
  p.m = 2;
  p.d = 2;
  p.a = {2.0, 1.0};
  p.w = {1.0, 0.0, 0.0, 0.0};
  const FeatureCloud cloud = extract_features(p);
  const auto pairs = project(cloud, ref);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].first == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(pairs[0].second == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(pairs[1].first == 0.0);
  CHECK(pairs[1].second == 0.0);
}

TEST_CASE("condensation clustering counts separated bundles") {
  NetworkParams p;
  p.m = 5;
  p.d = 2;
  p.a = {1.0, 1.0, 2.0, 0.01, 5.0};
  p.w = {2.0, 0.0, 1.99, 0.02, 0.0, 1.5, 1.0, 0.0, 0.0, 0.0};
  const CondensationSummary cs = condensation_summary(extract_features(p));
  CHECK(cs.active_count == 3);
  CHECK(cs.cluster_count == 2);
  CHECK(cs.angular_entropy > 0.0);
  CHECK(cs.angular_entropy < std::log(3.0));
  CHECK(cs.amplitude_threshold == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(cs.cosine_tolerance == 0.05);

  NetworkParams uniform;
  uniform.m = 64;
  uniform.d = 2;
  uniform.a.assign(64, 1.0);
  uniform.w.resize(128);
  const double pi = std::acos(-1.0);
  for (std::size_t k = 0; k < 64; ++k) {
    const double theta = -pi + (static_cast<double>(k) + 0.5) * 2.0 * pi / 64.0;
    uniform.w[k * 2] = std::cos(theta);
    uniform.w[k * 2 + 1] = std::sin(theta);
  }
  const CondensationSummary spread = condensation_summary(extract_features(uniform));
  CHECK(spread.active_count == 64);
  CHECK(spread.angular_entropy == doctest::Approx(std::log(64.0)).epsilon(1e-12));
}

TEST_CASE("random initial clouds are angularly spread") {
  for (std::uint64_t seed : {7ull, 31ull, 1234ull}) {
    const NetworkParams p = init_params({10000, 2, seed, false});
    const CondensationSummary cs = condensation_summary(extract_features(p));
    CHECK(cs.cluster_count >= 8);
    CHECK(cs.cluster_count <= 30);
    CHECK(cs.angular_entropy >= 4.0);
    CHECK(cs.active_count >= 3000);
    CHECK(cs.active_count <= 5500);
  }
}

TEST_CASE("scatter csv tags every row") {
  const NetworkParams p = init_params({8, 2, 1, false});
  const std::string text = scatter_csv(extract_features(p), "init");
  CHECK(std::count(text.begin(), text.end(), '\n') == 8);
  CHECK(text.rfind("init,", 0) == 0);
  for (const std::string& line : split(text, '\n')) {
    if (line.empty()) continue;
    CHECK(split(line, ',').size() == 3);
  }
}

TEST_CASE("slope fits recover exact power laws") {
  const std::vector<std::size_t> widths = {100, 1000, 10000};
  std::vector<double> values;
  for (std::size_t w : widths) values.push_back(2.0 * std::pow(static_cast<double>(w), -0.5));
  const SlopeFit fit = fit_slope(widths, values);
  CHECK(close(fit.slope, -0.5, 1e-12));
  CHECK(close(fit.intercept, std::log(2.0), 1e-12));
  CHECK(fit.residual_rms <= 1e-12);
  CHECK(fit.point_count == 3);
  CHECK_THROWS(fit_slope({100}, {1.0}));
  CHECK_THROWS(fit_slope({100, 200}, {1.0}));
  CHECK_THROWS(fit_slope({100, 200}, {1.0, -2.0}));
}

TEST_CASE("run seeds derive from the mixing chain") {
  CHECK(run_seed(20240817, 0, 0, 1000, 0) == 4262934109066569241ull);
  CHECK(run_seed(20240817, 1, 0, 2000, 2) == 822396634052733348ull);
  CHECK(run_seed(5, 1, 2, 300, 4) == mix_seed(5, {1, 2, 300, 4}));
  CHECK(run_seed(5, 1, 2, 300, 4) != run_seed(5, 2, 1, 300, 4));
}

TEST_CASE("grid validation rejects malformed scans") {
  const Dataset ds = default_dataset();
  FlowConfig fc;
  fc.max_steps = 10;
  ScanGrid grid;
  grid.gamma_values = {0.5};
  grid.gamma_prime_values = {0.0};
  grid.widths = {16};
  CHECK_THROWS(scan(grid, ds, fc));
  grid.widths = {32, 16};
  CHECK_THROWS(scan(grid, ds, fc));
  grid.widths = {16, 32};
  grid.replicates = 0;
  CHECK_THROWS(scan(grid, ds, fc));
  grid.replicates = 1;
  grid.gamma_values = {0.5, 0.5};
  CHECK_THROWS(scan(grid, ds, fc));
  grid.gamma_values = {0.5};
  grid.kappa_coeff = 0.0;
  CHECK_THROWS(scan(grid, ds, fc));
}

namespace {

ScanGrid small_grid() {
  ScanGrid grid;
  grid.gamma_values = {0.5, 1.75};
  grid.gamma_prime_values = {0.0};
  grid.widths = {31, 64};
  grid.replicates = 2;
  grid.base_seed = 1;
  return grid;
}

FlowConfig small_flow() {
  FlowConfig fc;
  fc.initial_step = 1.0;
  fc.max_steps = 150;
  fc.record_stride = 1 << 20;
  return fc;
}

}  // namespace

TEST_CASE("a small scan is reproducible across job counts") {
  const Dataset ds = default_dataset();
  const PhaseMap one = scan(small_grid(), ds, small_flow(), 1);
  const PhaseMap three = scan(small_grid(), ds, small_flow(), 3);
  CHECK(map_csv(one) == map_csv(three));
  CHECK(summary_csv(one) == summary_csv(three));
  REQUIRE(one.cells.size() == 2);
  CHECK(one.cells[0].fits_valid);
  CHECK(one.cells[0].regime == RegimeLabel::Linear);
  CHECK(one.cells[1].regime == RegimeLabel::Condensed);
  for (const CellResult& cell : one.cells) {
    for (const WidthResult& wr : cell.per_width) {
      for (const ReplicateResult& rep : wr.replicates) {
        CHECK(rep.seed == run_seed(1, cell.gamma_index, cell.gamma_prime_index, wr.width,
                                   &rep - wr.replicates.data()));
      }
    }
  }
}

TEST_CASE("cache hits reproduce and corrupt entries recompute") {
  const Dataset ds = default_dataset();
  auto dir = fresh_dir("cache");
  const PhaseMap fresh = scan(small_grid(), ds, small_flow(), 1, dir);
  std::size_t kv_files = 0;
  std::filesystem::path victim;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".kv") {
      ++kv_files;
      victim = entry.path();
    }
  }
  CHECK(kv_files == 8);
  const PhaseMap cached = scan(small_grid(), ds, small_flow(), 1, dir);
  CHECK(map_csv(cached) == map_csv(fresh));
  write_file_atomic(victim, "seed=zz\nbroken");
  const PhaseMap repaired = scan(small_grid(), ds, small_flow(), 1, dir);
  CHECK(map_csv(repaired) == map_csv(fresh));
  CHECK(summary_csv(repaired) == summary_csv(fresh));
  std::filesystem::remove_all(dir);
}

TEST_CASE("asi evens odd widths only in the lazy half plane") {
  const Dataset ds = default_dataset();
  const PhaseMap map = scan(small_grid(), ds, small_flow(), 1);
  REQUIRE(map.cells.size() == 2);
  CHECK(map.cells[0].coords.gamma == 0.5);
  CHECK(map.cells[0].per_width[0].width == 31);
  CHECK(map.cells[0].per_width[0].effective_width == 32);
  CHECK(map.cells[0].per_width[1].effective_width == 64);
  CHECK(map.cells[1].coords.gamma == 1.75);
  CHECK(map.cells[1].per_width[0].effective_width == 31);
}

TEST_CASE("boundary zeros interpolate sign changes per row") {
  PhaseMap map;
  map.grid.gamma_values = {0.5, 1.5};
  map.grid.gamma_prime_values = {0.0};
  map.cells.resize(2);
  map.cells[0].coords = {0.5, 0.0};
  map.cells[0].fits_valid = true;
  map.cells[0].s_w.slope = -0.5;
  map.cells[1].coords = {1.5, 0.0};
  map.cells[1].fits_valid = true;
  map.cells[1].s_w.slope = 0.5;
  const auto zeros = boundary_zeros(map);
  REQUIRE(zeros.size() == 1);
  CHECK(zeros[0].gamma_prime == 0.0);
  CHECK(zeros[0].gamma_at_zero == doctest::Approx(1.0).epsilon(1e-15));

  map.cells[1].s_w.slope = -0.1;
  CHECK(boundary_zeros(map).empty());
  map.cells[1].s_w.slope = 0.5;
  map.cells[0].fits_valid = false;
  CHECK(boundary_zeros(map).empty());
}

TEST_CASE("scan csv headers are stable") {
  const Dataset ds = default_dataset();
  const PhaseMap map = scan(small_grid(), ds, small_flow(), 1);
  const std::string m = map_csv(map);
  const std::string s = summary_csv(map);
  const std::string z = zeros_csv(boundary_zeros(map));
  CHECK(m.substr(0, m.find('\n')) ==
        "gamma,gamma_prime,regime,near_critical,width,effective_width,replicates,diverged,"
        "mean_sup_rd_w,mean_sup_rd_theta,mean_sup_rd_a");
  CHECK(s.substr(0, s.find('\n')) ==
        "gamma,gamma_prime,regime,near_critical,partial,fits_valid,fit_points,"
        "s_w,s_w_intercept,s_w_rms,s_theta,s_theta_intercept,s_theta_rms,"
        "s_a,s_a_intercept,s_a_rms");
  CHECK(z.substr(0, z.find('\n')) == "gamma_prime,gamma_at_zero");
  CHECK(std::count(m.begin(), m.end(), '\n') == 5);
  CHECK(std::count(s.begin(), s.end(), '\n') == 3);
}

TEST_CASE("initial norms satisfy the sandwich bounds across seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const NetworkParams p = init_params({10000, 2, seed, false});
    const auto reports = check_initial_norms(p, seed);
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].bound_name == "initial_norm_theta");
    CHECK(reports[1].bound_name == "initial_norm_theta_w");
    CHECK(reports[2].bound_name == "initial_norm_theta_a");
    for (const BoundReport& rep : reports) {
      CHECK(rep.satisfied);
      CHECK(rep.theoretical_lower <= rep.empirical_value);
      CHECK(rep.empirical_value <= rep.theoretical_value);
      CHECK(rep.context.m == 10000);
      CHECK(rep.context.seed == seed);
    }
  }
}

TEST_CASE("the sup-norm parameter bound holds at init") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const NetworkParams p = init_params({10000, 2, seed, false});
    const BoundReport rep = check_initial_param_bound(p, 0.05, seed);
    CHECK(rep.satisfied);
    CHECK(rep.empirical_value <= rep.theoretical_value);
  }
  const NetworkParams p = init_params({100, 2, 0, false});
  CHECK_THROWS(check_initial_param_bound(p, 0.0, 0));
  CHECK_THROWS(check_initial_param_bound(p, 1.0, 0));
}

TEST_CASE("decay envelopes accept conforming and reject slow trajectories") {
  const double rate = 0.25;
  RunResult run;
  run.final_params.m = 8;
  run.final_params.d = 2;
  run.trajectory.times = {0.0, 1.0, 2.0};
  run.trajectory.losses = {1.0, 0.9 * std::exp(-rate), 0.9 * std::exp(-2.0 * rate)};
  const BoundReport ok = check_decay_bound(run, rate);
  CHECK(ok.satisfied);
  CHECK(ok.bound_name == "loss_decay_rate");
  CHECK(ok.theoretical_value == 1.05);
  CHECK(ok.empirical_value == doctest::Approx(1.0).epsilon(1e-12));

  run.trajectory.losses = {1.0, 1.2 * std::exp(-rate), 0.9 * std::exp(-2.0 * rate)};
  CHECK_FALSE(check_decay_bound(run, rate).satisfied);

  run.trajectory.losses = {0.0, 0.0, 0.0};
  CHECK(check_decay_bound(run, rate).satisfied);

  RunResult empty;
  CHECK_THROWS(check_decay_bound(empty, rate));

  const TinyRun& t = lazy_run_256();
  const FiniteGram fg = gram_finite(t.p0, t.rz.kappa, t.rz.kappa_prime, default_dataset());
  const double lambda = min_eigenvalue(fg.g) / (t.rz.kappa * t.rz.kappa);
  const double real_rate = decay_rate_min(t.p0.m, t.rz.kappa, 4, lambda);
  CHECK(check_decay_bound(t.run, real_rate).satisfied);
}

TEST_CASE("rd bounds apply to linear cells and shrink with width") {
  const TinyRun& narrow = lazy_run_256();
  const TinyRun& wide = lazy_run_4096();
  const BoundReport small_rep =
      check_rd_bounds(narrow.run, narrow.p0.m, narrow.rz.kappa, narrow.rz.kappa_prime, {0.5, 0.0});
  const BoundReport large_rep =
      check_rd_bounds(wide.run, wide.p0.m, wide.rz.kappa, wide.rz.kappa_prime, {0.5, 0.0});
  CHECK(small_rep.satisfied);
  CHECK(large_rep.satisfied);
  CHECK(small_rep.bound_name == "rd_w_small_gamma");
  const BoundReport shrink = check_rd_width_decrease(small_rep, large_rep);
  CHECK(shrink.satisfied);
  CHECK(shrink.empirical_value < shrink.theoretical_value);
  CHECK_THROWS(check_rd_width_decrease(large_rep, small_rep));
  CHECK_THROWS(check_rd_bounds(narrow.run, narrow.p0.m, narrow.rz.kappa, narrow.rz.kappa_prime,
                               {1.75, 0.0}));
  CHECK_THROWS(
      check_rd_bounds(narrow.run, 1, narrow.rz.kappa, narrow.rz.kappa_prime, {0.5, 0.0}));
}

TEST_CASE("neuron bound reports the frozen-direction envelope") {
  const TinyRun& t = lazy_run_256();
  const BoundReport rep = check_neuron_bound(t.run, t.rz.kappa_prime);
  CHECK(rep.satisfied);
  CHECK(rep.empirical_value <= rep.theoretical_value);
  RunResult bare;
  bare.final_params = t.p0;
  CHECK_THROWS(check_neuron_bound(bare, t.rz.kappa_prime));
  CHECK_THROWS(check_neuron_bound(t.run, 0.0));
}

TEST_CASE("reports csv is column stable") {
  const NetworkParams p = init_params({100, 2, 1, false});
  const std::string text = reports_to_csv(check_initial_norms(p, 1));
  CHECK(text.substr(0, text.find('\n')) ==
        "bound,theoretical_lower,theoretical_value,empirical_value,satisfied,m,n,d,kappa,"
        "kappa_prime,seed");
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
