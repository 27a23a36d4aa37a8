#include "heraldsim/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "heraldsim/csv.hpp"
#include "heraldsim/experiments.hpp"
#include "heraldsim/metrics.hpp"
#include "heraldsim/tomography.hpp"

namespace heraldsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path output_dir(const std::string& flag) {
  std::string dir = flag;
  if (dir.empty()) {
    if (const char* env = std::getenv("HERALDSIM_OUT")) dir = env;
  }
  if (dir.empty()) throw UsageError("no output directory: pass --out or set HERALDSIM_OUT");
  fs::create_directories(dir);
  return dir;
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  writer(out);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) {
  write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed, const std::string& command) {
  if (!seed) throw UsageError(command + " is stochastic and requires --seed");
  return *seed;
}

TwoQubitDensityMatrix named_state(const std::string& name) {
  if (name == "phi+") return TwoQubitDensityMatrix::pure(phi_plus());
  if (name == "phi-") return TwoQubitDensityMatrix::pure(phi_minus());
  if (name == "psi+") return TwoQubitDensityMatrix::pure(psi_plus());
  if (name == "psi-") return TwoQubitDensityMatrix::pure(psi_minus());
  if (name == "mixed") return TwoQubitDensityMatrix();
  if (name.rfind("werner:", 0) == 0) {
    const double p = parse_double(name.substr(7));
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("Werner weight must lie in [0, 1]");
    return werner(p);
  }
  throw UsageError("unknown state '" + name + "'");
}

TwoQubitDensityMatrix load_density_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("cannot parse '" + path + "': " + e.what());
  }
  return density_matrix_from_json(j.contains("rho") ? j.at("rho") : j);
}

json metrics_json(const TwoQubitDensityMatrix& rho, bool optimize_local, std::optional<double> p11,
                  std::optional<double> p_direct, std::optional<double> p_estimator,
                  std::optional<double> visibility) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  const double f = fidelity_to_phi_plus(rho, optimize_local);
  return {{"fidelity_post", f},
          {"fidelity_meas", p11 ? json(total_state_fidelity(*p11, f)) : json(nullptr)},
          {"tangle", tangle(rho)},
          {"chsh", chsh_max(rho)},
          {"P_direct", opt(p_direct)},
          {"P_estimator", opt(p_estimator)},
          {"visibility", opt(visibility)}};
}

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

// --- commands ---------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> events;
  std::string out;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& log) {
  ExperimentConfig c = load_config(a.config);
  const std::uint64_t seed = require_seed(a.seed, "simulate");
  if (a.events) c.events_per_setting = *a.events;
  const fs::path dir = output_dir(a.out);
  const SimulationResult r = simulate(c, seed);
  const Preparation& p = r.preparation;
  const double p11 = p.numbers.arm_probability(1, 1);

  write_json(dir / "config.json", to_json(c));
  write_file(dir / "number_table.csv", [&](std::ostream& o) { write_number_table(o, p.numbers); });
  write_file(dir / "counts.csv", [&](std::ostream& o) { write_counts(o, r.counts); });
  json report = {{"label", c.label},
                 {"seed", seed},
                 {"herald_probability", p.herald_probability},
                 {"model",
                  {{"rho", density_matrix_to_json(*p.rho_post)},
                   {"metrics", metrics_json(*p.rho_post, false, p11, p.p_direct, p.p_estimator,
                                            c.spdc.visibility)}}},
                 {"reconstruction",
                  {{"rho", density_matrix_to_json(r.reconstruction.rho)},
                   {"log_likelihood", r.reconstruction.log_likelihood},
                   {"iterations", r.reconstruction.iterations},
                   {"converged", r.reconstruction.converged},
                   {"metrics", metrics_json(r.reconstruction.rho, true, p11, p.p_direct, p.p_estimator,
                                            c.spdc.visibility)}}}};
  write_json(dir / "report.json", report);
  log << "simulate: wrote " << dir.string() << '\n';
  if (!r.reconstruction.converged) throw NoConvergence("reconstruction did not converge");
}

struct SweepArgs {
  std::vector<double> t;
  std::optional<int> pairs;
  std::optional<double> tau;
  std::optional<double> visibility;
  std::string config;
  std::string out;
};

void cmd_sweep(const SweepArgs& a, std::ostream& log) {
  ExperimentConfig base = config_or_default(a.config);
  if (a.pairs) base.spdc.max_pairs = *a.pairs;
  if (a.tau) base.spdc.tau = *a.tau;
  if (a.visibility) base.spdc.visibility = *a.visibility;
  std::vector<ExperimentConfig> configs;
  for (double t : a.t) {
    ExperimentConfig c = base;
    c.t1 = c.t2 = t;
    c.label = format_double(t);
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
    configs.push_back(c);
  }
  const fs::path dir = output_dir(a.out);
  std::vector<SweepPoint> points;
  if (!configs.empty()) points = run_sweep(configs);
  Series fig2{"transmission", "probability", {}};
  for (const auto& p : points) fig2.points.push_back({p.t1, p.p_estimator, std::nullopt});
  write_file(dir / "sweep.csv", [&](std::ostream& o) { write_sweep(o, points); });
  write_file(dir / "fig2_series.csv", [&](std::ostream& o) { write_series(o, fig2); });
  log << "sweep: " << points.size() << " points written to " << dir.string() << '\n';
}

struct TomoSimArgs {
  std::string state = "phi+";
  std::string rho;
  std::uint64_t events = 10000;
  std::optional<std::uint64_t> seed;
  std::string ratio = "simulated";
  std::string out;
};

void cmd_tomo_sim(const TomoSimArgs& a, std::ostream& log) {
  const std::uint64_t seed = require_seed(a.seed, "tomo-sim");
  if (a.events < 1) throw UsageError("--events must be at least 1");
  const TwoQubitDensityMatrix rho = a.rho.empty() ? named_state(a.state) : load_density_matrix(a.rho);
  const fs::path dir = output_dir(a.out);
  CountTable counts = simulate_counts(rho, tomography_settings(), a.events, seed);
  counts.ratio = a.ratio;
  write_file(dir / "counts.csv", [&](std::ostream& o) { write_counts(o, counts); });
  log << "tomo-sim: wrote " << (dir / "counts.csv").string() << '\n';
}

struct ReconstructArgs {
  std::string counts;
  bool optimize_local = false;
  int mc_samples = 0;
  int max_iterations = MleOptions{}.max_iterations;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void cmd_reconstruct(const ReconstructArgs& a, std::ostream& log) {
  if (a.mc_samples == 1 || a.mc_samples < 0) throw UsageError("--mc-samples must be 0 or at least 2");
  std::optional<std::uint64_t> seed;
  if (a.mc_samples > 0) seed = require_seed(a.seed, "reconstruct with --mc-samples");
  const CountTable counts = ingest_counts_file(a.counts);
  const fs::path dir = output_dir(a.out);
  if (a.max_iterations < 1) throw UsageError("--max-iterations must be positive");
  MleOptions options;
  options.max_iterations = a.max_iterations;
  const MleResult r = mle_reconstruct(counts, options);

  const bool opt = a.optimize_local;
  const std::vector<std::pair<std::string, Functional>> named{
      {"fidelity", [opt](const TwoQubitDensityMatrix& rho) { return fidelity_to_phi_plus(rho, opt); }},
      {"tangle", [](const TwoQubitDensityMatrix& rho) { return tangle(rho); }},
      {"chsh", [](const TwoQubitDensityMatrix& rho) { return chsh_max(rho); }}};
  json functionals = json::object();
  for (const auto& [name, fn] : named) functionals[name] = {{"value", fn(r.rho)}};
  json mc = nullptr;
  if (seed) {
    std::vector<Functional> fns;
    for (const auto& [name, fn] : named) fns.push_back(fn);
    const auto summary = monte_carlo_errors(counts, a.mc_samples, *seed, fns, poisson_resample, options);
    for (std::size_t k = 0; k < named.size(); ++k) {
      functionals[named[k].first]["mc_mean"] = summary[k].mean;
      functionals[named[k].first]["mc_std"] = summary[k].stddev;
    }
    mc = {{"samples", summary.front().samples}, {"failures", summary.front().failures}, {"seed", *seed}};
  }
  json report = {{"ratio", counts.ratio},
                 {"rho", density_matrix_to_json(r.rho)},
                 {"log_likelihood", r.log_likelihood},
                 {"iterations", r.iterations},
                 {"converged", r.converged},
                 {"optimize_local", opt},
                 {"functionals", functionals},
                 {"monte_carlo", mc}};
  write_json(dir / "reconstruction.json", report);
  log << "reconstruct: fidelity " << functionals["fidelity"]["value"].get<double>() << ", tangle "
      << functionals["tangle"]["value"].get<double>() << ", S " << functionals["chsh"]["value"].get<double>()
      << '\n';
  if (!r.converged) throw NoConvergence("reconstruction did not converge after " + std::to_string(r.iterations) +
                                        " iterations");
}

struct MetricsArgs {
  std::string rho;
  bool optimize_local = false;
  std::optional<double> p11;
  std::optional<double> c4;
  std::optional<double> c6;
  std::optional<double> eta;
  std::vector<double> scan;
  std::string out;
};

void cmd_metrics(const MetricsArgs& a, std::ostream& log) {
  if (a.rho.empty() && !a.c4 && a.scan.empty()) {
    throw UsageError("metrics needs --rho, --c4/--c6/--eta or --scan");
  }
  json report = json::object();
  if (!a.rho.empty()) {
    const TwoQubitDensityMatrix rho = load_density_matrix(a.rho);
    report = metrics_json(rho, a.optimize_local, a.p11, std::nullopt, std::nullopt, std::nullopt);
  }
  if (a.c4 || a.c6) {
    if (!a.c4 || !a.c6 || !a.eta) throw UsageError("--c4, --c6 and --eta go together");
    try {
      const EfficiencyEstimate e = preparation_efficiency({*a.c4, *a.c6, *a.eta});
      report["P_estimator"] = e.reported;
      report["P_estimator_raw"] = e.raw;
      if (e.exceeds_one) log << "warning: C6/(C4 eta^2) = " << e.raw << " exceeds 1; reported as 1\n";
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
  }
  if (!a.scan.empty()) {
    try {
      report["visibility"] = visibility_from_scan(a.scan);
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
  }
  const fs::path dir = output_dir(a.out);
  write_json(dir / "metrics.json", report);
  log << "metrics: wrote " << (dir / "metrics.json").string() << '\n';
}

struct TablesArgs {
  std::string config;
  std::string reference;
  std::string out;
};

void cmd_reproduce_tables(const TablesArgs& a, std::ostream& log) {
  const ExperimentConfig c = load_config(a.config);
  std::optional<ReferenceTable> ref;
  if (!a.reference.empty()) {
    std::ifstream in(a.reference);
    if (!in) throw DataError("cannot open reference '" + a.reference + "'");
    ref = load_reference_table(in);
  }
  const fs::path dir = output_dir(a.out);
  const NumberTableReport report = reproduce_number_tables(c, ref ? &*ref : nullptr);
  write_file(dir / "number_table.csv", [&](std::ostream& o) { write_number_table(o, report.table); });
  write_file(dir / "table_reduction.csv", [&](std::ostream& o) { write_reduction(o, c.label, report.rows); });
  int flagged = 0;
  for (const auto& r : report.rows) flagged += r.flagged ? 1 : 0;
  log << "reproduce-tables: " << flagged << " entries differ from the reference by more than 3x\n";
}

struct CalibrateArgs {
  std::string config;
  double fraction = 0.10;
  double t_high = 0.5;
  double t_low = 0.3;
  double power_high = 1.2;
  double power_low = 0.62;
  std::string out;
};

void cmd_calibrate(const CalibrateArgs& a, std::ostream& log) {
  ExperimentConfig base = config_or_default(a.config);
  if (base.spdc.max_pairs < 4) base.spdc.max_pairs = 4;
  base.t1 = base.t2 = a.t_high;
  if (!(a.power_low > 0.0 && a.power_low <= a.power_high)) {
    throw UsageError("require 0 < --power-low <= --power-high");
  }
  const fs::path dir = output_dir(a.out);
  const double tau_high = calibrate_tau(base, a.fraction);
  const double tau_low = scale_tau_with_power(tau_high, a.power_high, a.power_low);
  const PowerComparison pc = run_power_comparison(base, tau_high, tau_low, a.t_low);
  const auto bell = bell_populations(pc.rho_high);

  write_json(dir / "calibration.json", {{"target_fraction", a.fraction},
                                        {"transmission", a.t_high},
                                        {"tau_high", tau_high},
                                        {"tau_low", tau_low},
                                        {"power_high", a.power_high},
                                        {"power_low", a.power_low},
                                        {"config", to_json(base)}});
  write_json(dir / "power_comparison.json",
             {{"transmission", pc.t},
              {"tau_high", pc.tau_high},
              {"tau_low", pc.tau_low},
              {"f_post_high", pc.f_post_high},
              {"f_post_low", pc.f_post_low},
              {"bell_populations_high", {{"phi+", bell[0]}, {"phi-", bell[1]}, {"psi+", bell[2]}, {"psi-", bell[3]}}},
              {"rho_high", density_matrix_to_json(pc.rho_high)},
              {"rho_low", density_matrix_to_json(pc.rho_low)}});
  Series fig3{"power", "fidelity",
              {{a.power_high, pc.f_post_high, std::nullopt}, {a.power_low, pc.f_post_low, std::nullopt}}};
  write_file(dir / "fig3_series.csv", [&](std::ostream& o) { write_series(o, fig3); });
  log << "calibrate: tau_high " << tau_high << ", tau_low " << tau_low << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heralded entangled-photon source simulator", "heraldsim"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Model one configuration and simulate its tomography");
  s_sim->add_option("--config", sim.config, "Experiment config JSON")->required();
  s_sim->add_option("--seed", sim.seed, "Random seed");
  s_sim->add_option("--events", sim.events, "Events per setting (overrides the config)");
  s_sim->add_option("--out", sim.out, "Output directory");

  SweepArgs sweep;
  auto* s_sweep = app.add_subcommand("sweep", "Preparation probability versus transmission");
  s_sweep->add_option("--t", sweep.t, "Comma-separated transmissions")->delimiter(',')->required();
  s_sweep->add_option("--pairs", sweep.pairs, "Highest pair number kept");
  s_sweep->add_option("--tau", sweep.tau, "Squeezing parameter tanh(r)");
  s_sweep->add_option("--visibility", sweep.visibility, "Multi-pair interference visibility");
  s_sweep->add_option("--config", sweep.config, "Base config JSON");
  s_sweep->add_option("--out", sweep.out, "Output directory");

  TomoSimArgs tomo;
  auto* s_tomo = app.add_subcommand("tomo-sim", "Simulate coincidence counts for a known state");
  s_tomo->add_option("--state", tomo.state, "phi+, phi-, psi+, psi-, mixed or werner:P");
  s_tomo->add_option("--rho", tomo.rho, "Density matrix JSON (overrides --state)");
  s_tomo->add_option("--events", tomo.events, "Events per setting");
  s_tomo->add_option("--seed", tomo.seed, "Random seed");
  s_tomo->add_option("--ratio", tomo.ratio, "Label written to the ratio column");
  s_tomo->add_option("--out", tomo.out, "Output directory");

  ReconstructArgs rec;
  auto* s_rec = app.add_subcommand("reconstruct", "Maximum-likelihood reconstruction from counts");
  s_rec->add_option("--counts", rec.counts, "Count CSV")->required();
  s_rec->add_flag("--optimize-local", rec.optimize_local, "Maximize fidelity over local unitaries");
  s_rec->add_option("--mc-samples", rec.mc_samples, "Monte Carlo resamples for error bars");
  s_rec->add_option("--max-iterations", rec.max_iterations, "Iteration limit of the likelihood ascent");
  s_rec->add_option("--seed", rec.seed, "Random seed (required with --mc-samples)");
  s_rec->add_option("--out", rec.out, "Output directory");

  MetricsArgs met;
  auto* s_met = app.add_subcommand("metrics", "Figures of merit for a state or rate measurement");
  s_met->add_option("--rho", met.rho, "Density matrix or reconstruction JSON");
  s_met->add_flag("--optimize-local", met.optimize_local, "Maximize fidelity over local unitaries");
  s_met->add_option("--p11", met.p11, "One-photon-per-arm probability");
  s_met->add_option("--c4", met.c4, "Four-fold rate");
  s_met->add_option("--c6", met.c6, "Six-fold rate");
  s_met->add_option("--eta", met.eta, "Per-mode detection efficiency");
  s_met->add_option("--scan", met.scan, "Comma-separated fringe counts")->delimiter(',');
  s_met->add_option("--out", met.out, "Output directory");

  TablesArgs tab;
  auto* s_tab = app.add_subcommand("reproduce-tables", "Photon-number tables for a configuration");
  s_tab->add_option("--config", tab.config, "Experiment config JSON")->required();
  s_tab->add_option("--reference", tab.reference, "Reference table CSV (ratio,quantity,value,error)");
  s_tab->add_option("--out", tab.out, "Output directory");

  CalibrateArgs cal;
  auto* s_cal = app.add_subcommand("calibrate", "Fit tau to the higher-order share and compare powers");
  s_cal->add_option("--config", cal.config, "Base config JSON");
  s_cal->add_option("--fraction", cal.fraction, "Target share of six-folds from four or more pairs");
  s_cal->add_option("--t-high", cal.t_high, "Transmission used for the fit");
  s_cal->add_option("--t-low", cal.t_low, "Transmission of the power comparison");
  s_cal->add_option("--power-high", cal.power_high, "High pump power (W)");
  s_cal->add_option("--power-low", cal.power_low, "Low pump power (W)");
  s_cal->add_option("--out", cal.out, "Output directory");

  std::vector<const char*> argv{"heraldsim"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (s_sim->parsed()) cmd_simulate(sim, err);
    if (s_sweep->parsed()) cmd_sweep(sweep, err);
    if (s_tomo->parsed()) cmd_tomo_sim(tomo, err);
    if (s_rec->parsed()) cmd_reconstruct(rec, err);
    if (s_met->parsed()) cmd_metrics(met, err);
    if (s_tab->parsed()) cmd_reproduce_tables(tab, err);
    if (s_cal->parsed()) cmd_calibrate(cal, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NoConvergence& e) {
    err << "error: " << e.what() << '\n';
    return kExitNoConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace heraldsim
