// One line per acceptance criterion. Tolerances and windows are fixed here.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "heraldsim/cli.hpp"
#include "heraldsim/detection.hpp"
#include "heraldsim/elements.hpp"
#include "heraldsim/experiments.hpp"
#include "heraldsim/metrics.hpp"
#include "heraldsim/source.hpp"
#include "heraldsim/tomography.hpp"
#include "oracles.hpp"

using namespace heraldsim;
namespace fs = std::filesystem;

namespace {

constexpr std::array<double, 4> kTransmissions{0.17, 0.3, 0.5, 0.7};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool in_window(double v, double lo, double hi) { return v >= lo && v <= hi; }

std::string fixture(const std::string& name) { return std::string(HERALDSIM_FIXTURES) + "/" + name; }

ConditionalEnsemble herald_term(int pairs, double t1, double t2, const DetectorModel& d) {
  const CircuitLayout c = build_heralding_circuit(t1, t2);
  return herald(apply_mode_map(pair_term(pairs), c.total()), c.herald_modes, d);
}

Outcome ideal_heralding() {
  double worst = 1.0;
  for (double t1 : kTransmissions) {
    for (double t2 : kTransmissions) {
      const auto e = herald_term(3, t1, t2, DetectorModel::ideal(4));
      const auto rho = postselect_two_qubit(e, DetectorModel::ideal(4), convention_correction(t1, t2));
      worst = std::min(worst, fidelity_to_phi_plus(rho));
    }
  }
  return {worst >= 1.0 - 1e-9, fmt("min fidelity over 16 splitter pairs = %.12f", worst)};
}

Outcome two_pair_suppression() {
  double worst = 0.0;
  for (double t1 : kTransmissions)
    for (double t2 : kTransmissions)
      worst = std::max(worst, herald_term(2, t1, t2, DetectorModel::ideal(4, Resolution::Threshold)).herald_probability);
  double worst_leak = 0.0;
  for (double t : kTransmissions) {
    auto leak = [t](double v) {
      SpdcParams p;
      p.tau = 0.3;
      p.max_pairs = 2;
      p.visibility = v;
      return herald_source(build_heralding_circuit(t, t), p, DetectorModel::ideal(4, Resolution::Threshold))
          .herald_probability;
    };
    worst_leak = std::max(worst_leak, std::abs(leak(0.862) - 0.138 * leak(0.0)));
  }
  return {worst <= 1e-12 && worst_leak <= 1e-9,
          fmt("max two-pair herald probability %.2e at V=1; max |leak(0.862) - 0.138 leak(0)| = %.2e", worst,
              worst_leak)};
}

Outcome fmeas_identity() {
  const std::array<std::array<double, 3>, 4> rows{{{2.58e-4, 0.637, 0.0164e-2},
                                                   {6.14e-4, 0.842, 0.0517e-2},
                                                   {3.06e-3, 0.575, 0.176e-2},
                                                   {8.03e-3, 0.619, 0.497e-2}}};
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, std::abs(total_state_fidelity(r[0], r[1]) - r[2]) / r[2]);
  return {worst <= 0.02, fmt("max relative error %.3f%%", 100.0 * worst)};
}

Outcome published_tomography() {
  const std::array<Functional, 3> functionals{
      [](const TwoQubitDensityMatrix& r) { return fidelity_to_phi_plus(r, true); },
      [](const TwoQubitDensityMatrix& r) { return tangle(r); },
      [](const TwoQubitDensityMatrix& r) { return chsh_max(r); }};

  const CountTable c30 = ingest_counts_file(fixture("counts_30_70.csv"));
  const MleResult r30 = mle_reconstruct(c30);
  const double f30 = functionals[0](r30.rho);
  const double t30 = functionals[1](r30.rho);
  const double s30 = functionals[2](r30.rho);
  const auto mc30 = monte_carlo_errors(c30, 200, 2024, functionals);

  const CountTable c50 = ingest_counts_file(fixture("counts_50_50.csv"));
  const MleResult r50 = mle_reconstruct(c50);
  const double f50 = functionals[0](r50.rho);
  const auto mc50 = monte_carlo_errors(c50, 200, 2024, std::span<const Functional>(functionals.data(), 1));

  const bool ok30 = in_window(f30, 0.70, 0.93) && in_window(t30, 0.17, 0.93) && in_window(s30, 1.92, 2.80);
  const bool ok50 = in_window(f50, 0.50, 0.65);
  return {ok30 && ok50 && r30.converged && r50.converged,
          fmt("30/70: F=%.3f+-%.3f [0.70,0.93] tangle=%.3f+-%.3f [0.17,0.93] S=%.3f+-%.3f [1.92,2.80] -> %s; "
              "50/50: F=%.3f+-%.3f [0.50,0.65] -> %s",
              f30, mc30[0].stddev, t30, mc30[1].stddev, s30, mc30[2].stddev, ok30 ? "in" : "out", f50,
              mc50[0].stddev, ok50 ? "in" : "out")};
}

Outcome mle_self_consistency() {
  const std::array<std::pair<const char*, TwoQubitDensityMatrix>, 4> states{
      {{"phi+", TwoQubitDensityMatrix::pure(phi_plus())},
       {"psi-", TwoQubitDensityMatrix::pure(psi_minus())},
       {"I/4", TwoQubitDensityMatrix()},
       {"werner(0.8)", werner(0.8)}}};
  std::string detail;
  bool ok = true;
  std::uint64_t seed = 100;
  for (const auto& [name, rho] : states) {
    const MleResult r = mle_reconstruct(simulate_counts(rho, tomography_settings(), 100000, seed++));
    const double d = trace_distance(r.rho, rho);
    ok = ok && d < 0.02 && r.converged;
    detail += fmt("%s %.4f; ", name, d);
  }
  return {ok, "trace distances " + detail.substr(0, detail.size() - 2)};
}

ExperimentConfig sweep_config(double t, int pairs, double tau) {
  ExperimentConfig c;
  c.t1 = t;
  c.t2 = t;
  c.spdc.tau = tau;
  c.spdc.max_pairs = pairs;
  c.spdc.visibility = 1.0;
  return c;
}

Outcome sweep_shape() {
  std::vector<ExperimentConfig> configs;
  for (double t : {0.17, 0.5, 0.7}) configs.push_back(sweep_config(t, 3, 0.07));
  const auto points = run_sweep(configs);
  bool near_line = true;
  std::string detail = "3-pair P_direct:";
  for (const auto& p : points) {
    const double rel = std::abs(p.p_direct - p.p_line) / p.p_line;
    near_line = near_line && rel <= 0.25;
    detail += fmt(" T=%.2f %.4f (%.1f%%)", p.t1, p.p_direct, 100.0 * rel);
  }
  ExperimentConfig base = sweep_config(0.5, 4, 0.07);
  const double tau = calibrate_tau(base, 0.10);
  const Preparation three = prepare(sweep_config(0.7, 3, tau));
  const Preparation four = prepare(sweep_config(0.7, 4, tau));
  const bool rises = four.p_estimator > three.p_estimator;
  detail += fmt("; tau=%.4f, T=0.7 estimator %.4f -> %.4f with 4 pairs (P_direct %.4f -> %.4f)", tau,
                three.p_estimator, four.p_estimator, three.p_direct, four.p_direct);
  return {near_line && rises, detail};
}

Outcome power_ordering() {
  ExperimentConfig base = load_config(std::string(HERALDSIM_SOURCE_DIR) + "/configs/ratio_50_50.json");
  const double tau_high = calibrate_tau(base, 0.10);
  const double tau_low = scale_tau_with_power(tau_high, 1.2, 0.62);
  const PowerComparison pc = run_power_comparison(base, tau_high, tau_low, 0.3);
  const auto pop = bell_populations(pc.rho_high);
  const bool psi_minus_dominant = pop[3] > pop[1] && pop[3] > pop[2];
  return {pc.f_post_low > pc.f_post_high && psi_minus_dominant,
          fmt("T=0.3: F_low=%.4f F_high=%.4f; high-power populations phi- %.4f psi+ %.4f psi- %.4f", pc.f_post_low,
              pc.f_post_high, pop[1], pop[2], pop[3])};
}

ModeRegister line(std::size_t n) {
  std::vector<ModeLabel> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back({"m" + std::to_string(i), Polarization::H});
  return ModeRegister(std::move(labels));
}

Outcome fock_oracle() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t modes = 1 + c % 3;
    const Eigen::MatrixXcd u = oracle::random_unitary(static_cast<int>(modes), rng);
    SparseKet s(line(modes));
    for (int term = 0; term < 3; ++term) {
      const auto occs = oracle::occupations(modes, (c + term) % 4);
      s.add(occs[rng() % occs.size()], Complex(g(rng), g(rng)));
    }
    s.prune();
    if (s.empty()) continue;
    s = s.normalized();
    const SparseKet out = apply_mode_map(s, make_mode_map(line(modes), line(modes), u));
    for (const auto& [occ, amp] : oracle::dense_apply(s.amplitudes(), u))
      worst = std::max(worst, std::abs(amp - out.amplitude(occ)));
    for (const auto& [occ, amp] : out.amplitudes()) {
      const auto dense = oracle::dense_apply(s.amplitudes(), u);
      const auto it = dense.find(occ);
      worst = std::max(worst, std::abs(amp - (it == dense.end() ? Complex(0.0) : it->second)));
    }
  }
  return {worst <= 1e-9, fmt("1000 cases, max amplitude deviation %.2e", worst)};
}

Outcome metrics_suite() {
  const auto phi = TwoQubitDensityMatrix::pure(phi_plus());
  const TwoQubitDensityMatrix mixed;
  const double s2 = 2.0 * std::numbers::sqrt2;
  bool ok = std::abs(fidelity_to_phi_plus(phi) - 1.0) < 1e-9 && std::abs(tangle(phi) - 1.0) < 1e-9 &&
            std::abs(chsh_max(phi) - s2) < 1e-9;
  ok = ok && std::abs(fidelity_to_phi_plus(mixed) - 0.25) < 1e-9 && tangle(mixed) < 1e-9 && chsh_max(mixed) < 1e-9;
  double worst_bell = 1.0;
  for (const Vector4c& b : {phi_minus(), psi_plus(), psi_minus()})
    worst_bell = std::min(worst_bell, fidelity_to_phi_plus(TwoQubitDensityMatrix::pure(b), true));
  ok = ok && worst_bell > 1.0 - 1e-9;
  double lo = 0.0;
  double hi = 1.0;
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    (tangle(werner(mid)) > 0.0 ? hi : lo) = mid;
  }
  ok = ok && std::abs(hi - 1.0 / 3.0) < 1e-3;
  return {ok, fmt("phi+ (%.6f, %.6f, %.6f); I/4 (%.6f, %.6f, %.6f); Bell LU min %.9f; Werner threshold p=%.6f",
                  fidelity_to_phi_plus(phi), tangle(phi), chsh_max(phi), fidelity_to_phi_plus(mixed), tangle(mixed),
                  chsh_max(mixed), worst_bell, hi)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const std::string cfg = std::string(HERALDSIM_SOURCE_DIR) + "/configs/ratio_30_70.json";
  const std::vector<std::vector<std::string>> commands{
      {"simulate", "--config", cfg, "--seed", "11", "--events", "5000"},
      {"sweep", "--t", "0.17,0.3,0.5,0.7", "--config", cfg},
      {"tomo-sim", "--state", "werner:0.7", "--seed", "11"},
      {"reconstruct", "--counts", fixture("counts_30_70.csv"), "--optimize-local", "--mc-samples", "50", "--seed",
       "11"},
      {"metrics", "--c4", "100", "--c6", "1", "--eta", "0.1", "--scan", "93.1,6.9"},
      {"reproduce-tables", "--config", cfg, "--reference", fixture("table1.csv")},
      {"calibrate", "--config", cfg},
  };
  int compared = 0;
  int differing = 0;
  std::string failures;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::vector<fs::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path d = fs::temp_directory_path() / fmt("heraldsim_acceptance_%zu_%d", i, rep);
      fs::remove_all(d);
      auto args = commands[i];
      args.push_back("--out");
      args.push_back(d.string());
      std::ostringstream out;
      std::ostringstream err;
      if (run_cli(args, out, err) != kExitOk) failures += " " + args[0] + "(exit)";
      dirs.push_back(d);
    }
    if (!fs::exists(dirs[0])) continue;
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      ++compared;
      if (slurp(entry.path()) != slurp(dirs[1] / entry.path().filename())) {
        ++differing;
        failures += " " + entry.path().filename().string();
      }
    }
  }
  return {differing == 0 && failures.empty() && compared > 0,
          fmt("%d output files from %zu commands compared, %d differ", compared, commands.size(), differing) +
              (failures.empty() ? "" : ";" + failures)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 = no runtime limit
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "ideal heralding exactness", 1.0, ideal_heralding},
      {2, "two-pair suppression", 1.0, two_pair_suppression},
      {3, "F_meas consistency identity", 0.0, fmeas_identity},
      {4, "tomography on published counts", 30.0, published_tomography},
      {5, "MLE self-consistency", 10.0, mle_self_consistency},
      {6, "sweep shape", 0.0, sweep_shape},
      {7, "power-dependence ordering", 0.0, power_ordering},
      {8, "Fock oracle suite", 30.0, fock_oracle},
      {9, "metrics analytic suite", 0.0, metrics_suite},
      {10, "determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_s == 0.0 || elapsed < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("criterion %2d %s  %s: %s [%.2f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                elapsed, in_time ? "" : fmt(", budget %.0f s exceeded", c.budget_s).c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
