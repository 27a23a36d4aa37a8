#include "heraldsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <stdexcept>

#include "heraldsim/csv.hpp"
#include "heraldsim/metrics.hpp"

namespace heraldsim {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw DataError("unknown field '" + key + "' in " + where);
    }
  }
}

DetectorModel detectors_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw DataError(where + " must be an object");
  reject_unknown(j, {"efficiency", "resolution"}, where);
  DetectorModel d = DetectorModel::uniform(4, kDefaultEfficiency);
  if (j.contains("efficiency")) {
    const auto& e = j.at("efficiency");
    if (e.is_number()) {
      d.efficiency.assign(4, e.get<double>());
    } else if (e.is_array() && e.size() == 4) {
      d.efficiency = e.get<std::vector<double>>();
    } else {
      throw DataError(where + ".efficiency must be a number or a list of four numbers");
    }
  }
  if (j.contains("resolution")) {
    const auto r = j.at("resolution").get<std::string>();
    if (r == "threshold") {
      d.resolution = Resolution::Threshold;
    } else if (r == "number") {
      d.resolution = Resolution::NumberResolving;
    } else {
      throw DataError(where + ".resolution must be 'threshold' or 'number'");
    }
  }
  return d;
}

json detectors_to_json(const DetectorModel& d) {
  return {{"efficiency", d.efficiency},
          {"resolution", d.resolution == Resolution::Threshold ? "threshold" : "number"}};
}

double arm_efficiency_product(const DetectorModel& d) {
  return 0.5 * (d.efficiency[0] + d.efficiency[1]) * 0.5 * (d.efficiency[2] + d.efficiency[3]);
}

// Joint (unconditioned) six-fold probability, undoing the truncation
// renormalization so different truncations are comparable.
double joint_sixfold(ExperimentConfig config, int max_pairs) {
  config.spdc.max_pairs = max_pairs;
  const ConditionalEnsemble ens = heralded_ensemble(config);
  double kept = 0.0;
  for (int n = 0; n <= max_pairs; ++n) kept += pair_probability(config.spdc.tau, n);
  return ens.herald_probability * arm_coincidence_probability(ens, config.output_detectors) * kept;
}

std::string csv_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

void ExperimentConfig::validate() const {
  if (!(t1 >= 0.0 && t1 <= 1.0 && t2 >= 0.0 && t2 <= 1.0)) {
    throw std::invalid_argument("transmissions must lie in [0, 1]");
  }
  spdc.validate();
  herald_detectors.validate(4);
  output_detectors.validate(4);
  if (events_per_setting < 1) throw std::invalid_argument("events_per_setting must be at least 1");
  if (settings.empty()) throw std::invalid_argument("at least one measurement setting is required");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw DataError("config must be a JSON object");
    if (!j.contains("schema_version")) throw DataError("config lacks schema_version");
    if (j.at("schema_version").get<int>() != kConfigSchemaVersion) {
      throw DataError("unsupported schema_version " + j.at("schema_version").dump());
    }
    reject_unknown(j, {"schema_version", "label", "t1", "t2", "spdc", "detectors", "settings",
                       "events_per_setting", "seed"},
                   "config");
    if (j.contains("label")) c.label = j.at("label").get<std::string>();
    if (j.contains("t1")) c.t1 = j.at("t1").get<double>();
    if (j.contains("t2")) c.t2 = j.at("t2").get<double>();
    if (j.contains("spdc")) {
      const auto& s = j.at("spdc");
      reject_unknown(s, {"tau", "max_pairs", "photon_cap", "phase", "visibility"}, "spdc");
      if (s.contains("tau")) c.spdc.tau = s.at("tau").get<double>();
      if (s.contains("max_pairs")) c.spdc.max_pairs = s.at("max_pairs").get<int>();
      if (s.contains("photon_cap")) c.spdc.photon_cap = s.at("photon_cap").get<int>();
      if (s.contains("visibility")) c.spdc.visibility = s.at("visibility").get<double>();
      if (s.contains("phase")) {
        const auto ph = s.at("phase").get<std::string>();
        if (ph != "minus" && ph != "plus") throw DataError("spdc.phase must be 'minus' or 'plus'");
        c.spdc.phase = ph == "minus" ? PairPhase::Minus : PairPhase::Plus;
      }
    }
    if (j.contains("detectors")) {
      const auto& d = j.at("detectors");
      reject_unknown(d, {"herald", "output"}, "detectors");
      if (d.contains("herald")) c.herald_detectors = detectors_from_json(d.at("herald"), "detectors.herald");
      if (d.contains("output")) c.output_detectors = detectors_from_json(d.at("output"), "detectors.output");
    }
    if (j.contains("settings")) {
      c.settings.clear();
      for (const auto& s : j.at("settings")) {
        const auto name = s.get<std::string>();
        if (name.size() != 2) throw DataError("setting '" + name + "' must name two bases");
        c.settings.push_back({parse_basis(name.substr(0, 1)), parse_basis(name.substr(1, 1))});
      }
    }
    if (j.contains("events_per_setting")) {
      const auto n = j.at("events_per_setting").get<long long>();
      if (n < 1) throw DataError("events_per_setting must be at least 1");
      c.events_per_setting = static_cast<std::uint64_t>(n);
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid config: ") + e.what());
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json settings = json::array();
  for (const auto& s : c.settings) settings.push_back(s.name());
  json j = {{"schema_version", kConfigSchemaVersion},
            {"label", c.label},
            {"t1", c.t1},
            {"t2", c.t2},
            {"spdc",
             {{"tau", c.spdc.tau},
              {"max_pairs", c.spdc.max_pairs},
              {"photon_cap", c.spdc.photon_cap},
              {"phase", c.spdc.phase == PairPhase::Minus ? "minus" : "plus"},
              {"visibility", c.spdc.visibility}}},
            {"detectors",
             {{"herald", detectors_to_json(c.herald_detectors)},
              {"output", detectors_to_json(c.output_detectors)}}},
            {"settings", settings},
            {"events_per_setting", c.events_per_setting}};
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("cannot parse config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

ConditionalEnsemble heralded_ensemble(const ExperimentConfig& config) {
  config.validate();
  const CircuitLayout circuit = build_heralding_circuit(config.t1, config.t2);
  if (config.spdc.tau == 0.0) {
    const SparseKet out = apply_mode_map(pair_term(3, config.spdc.phase, config.spdc.photon_cap), circuit.total());
    return herald(out, circuit.herald_modes, config.herald_detectors);
  }
  return herald_source(circuit, config.spdc, config.herald_detectors);
}

Preparation prepare(const ExperimentConfig& config) {
  Preparation p;
  p.ensemble = heralded_ensemble(config);
  p.herald_probability = p.ensemble.herald_probability;
  if (p.herald_probability <= 0.0) return p;
  p.numbers = number_table(p.ensemble, config.output_detectors);
  p.p_direct = direct_preparation_probability(p.ensemble);
  p.arm_coincidence = arm_coincidence_probability(p.ensemble, config.output_detectors);
  p.p_estimator = p.arm_coincidence / arm_efficiency_product(config.output_detectors);
  if (p.p_direct > 0.0) {
    try {
      p.rho_post = postselect_two_qubit(p.ensemble, config.output_detectors,
                                        convention_correction(config.t1, config.t2));
    } catch (const std::domain_error&) {
      // No reference state or no coincidences survive detection.
    }
  }
  return p;
}

std::vector<SweepPoint> run_sweep(std::span<const ExperimentConfig> configs) {
  if (configs.empty()) throw std::invalid_argument("sweep needs at least one configuration");
  std::vector<std::future<Preparation>> tasks;
  for (const auto& c : configs) tasks.push_back(std::async(std::launch::async, [&c] { return prepare(c); }));
  std::vector<SweepPoint> out;
  double max_rate = 0.0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const Preparation p = tasks[i].get();
    SweepPoint s;
    s.t1 = configs[i].t1;
    s.t2 = configs[i].t2;
    s.p_line = s.t1 * s.t2;
    s.p_direct = p.p_direct;
    s.p_estimator = p.p_estimator;
    s.herald_probability = p.herald_probability;
    max_rate = std::max(max_rate, p.herald_probability);
    out.push_back(s);
  }
  for (auto& s : out) s.herald_rate_relative = max_rate > 0.0 ? s.herald_probability / max_rate : 0.0;
  return out;
}

PowerComparison run_power_comparison(const ExperimentConfig& base, double tau_high, double tau_low,
                                     double t) {
  if (!(tau_low >= 0.0 && tau_low <= tau_high && tau_high < 1.0)) {
    throw std::invalid_argument("require 0 <= tau_low <= tau_high < 1");
  }
  auto run = [&](double tau) {
    ExperimentConfig c = base;
    c.t1 = c.t2 = t;
    c.spdc.tau = tau;
    const Preparation p = prepare(c);
    if (!p.rho_post) throw std::domain_error("no post-selected state at this transmission");
    return *p.rho_post;
  };
  PowerComparison out;
  out.t = t;
  out.tau_high = tau_high;
  out.tau_low = tau_low;
  out.rho_high = run(tau_high);
  out.rho_low = run(tau_low);
  out.f_post_high = fidelity_to_phi_plus(out.rho_high);
  out.f_post_low = fidelity_to_phi_plus(out.rho_low);
  return out;
}

double higher_order_fraction(const ExperimentConfig& config) {
  const double full = joint_sixfold(config, std::max(4, config.spdc.max_pairs));
  if (full <= 0.0) return 0.0;
  return 1.0 - joint_sixfold(config, 3) / full;
}

double calibrate_tau(const ExperimentConfig& base, double target_fraction) {
  if (!(target_fraction > 0.0 && target_fraction < 1.0)) {
    throw std::invalid_argument("target fraction must lie in (0, 1)");
  }
  auto fraction = [&](double tau) {
    ExperimentConfig c = base;
    c.spdc.tau = tau;
    return higher_order_fraction(c);
  };
  double lo = 1e-3;
  double hi = 0.95;
  if (fraction(lo) > target_fraction || fraction(hi) < target_fraction) {
    throw std::domain_error("target fraction not reachable for tau in [0.001, 0.95]");
  }
  for (int i = 0; i < 60 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    (fraction(mid) < target_fraction ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<ReductionRow> reduce_number_table(const NumberTable& table) {
  auto p = [&](int a, int b) { return table.arm_probability(a, b); };
  std::vector<ReductionRow> rows;
  auto add = [&](const char* name, double v) {
    ReductionRow r;
    r.quantity = name;
    r.simulated = v;
    rows.push_back(r);
  };
  add("P00", p(0, 0));
  add("P10+P01", p(1, 0) + p(0, 1));
  add("P11", p(1, 1));
  add("P20+P02", p(2, 0) + p(0, 2));
  add("P21+P12", p(2, 1) + p(1, 2));
  add("P22", p(2, 2));
  return rows;
}

ReferenceTable load_reference_table(std::istream& in) {
  ReferenceTable out;
  for (const auto& row : read_csv(in, {"ratio", "quantity", "value", "error"})) {
    if (!out[row[0]].emplace(row[1], parse_double(row[2])).second) {
      throw DataError("duplicate reference entry " + row[0] + " " + row[1]);
    }
  }
  return out;
}

NumberTableReport reproduce_number_tables(const ExperimentConfig& config, const ReferenceTable* reference) {
  NumberTableReport report;
  report.table = prepare(config).numbers;
  report.rows = reduce_number_table(report.table);
  if (reference == nullptr) return report;
  auto it = reference->find(config.label);
  if (it == reference->end()) return report;
  for (auto& row : report.rows) {
    auto ref = it->second.find(row.quantity);
    if (ref == it->second.end()) continue;
    row.reference = ref->second;
    if (ref->second > 0.0) {
      row.relative_error = std::abs(row.simulated - ref->second) / ref->second;
      const double ratio = row.simulated / ref->second;
      row.flagged = !(ratio >= 1.0 / 3.0 && ratio <= 3.0);
    }
  }
  return report;
}

SimulationResult simulate(const ExperimentConfig& config, std::uint64_t seed) {
  SimulationResult r;
  r.preparation = prepare(config);
  if (!r.preparation.rho_post) throw std::domain_error("configuration never yields a coincidence");
  r.counts = simulate_counts(*r.preparation.rho_post, config.settings, config.events_per_setting, seed);
  r.counts.ratio = config.label.empty() ? "simulated" : config.label;
  r.reconstruction = mle_reconstruct(r.counts);
  return r;
}

void write_number_table(std::ostream& out, const NumberTable& table) {
  out << "n1H,n1V,n2H,n2V,probability\n";
  for (const auto& [occ, p] : table.probabilities) {
    for (auto n : occ) out << static_cast<int>(n) << ',';
    out << format_double(p) << '\n';
  }
}

NumberTable read_number_table(std::istream& in) {
  NumberTable t;
  for (const auto& row : read_csv(in, {"n1H", "n1V", "n2H", "n2V", "probability"})) {
    Occupation occ;
    for (int k = 0; k < 4; ++k) {
      const long long n = parse_integer(row[k]);
      if (n < 0 || n > 255) throw DataError("photon number out of range: " + row[k]);
      occ.push_back(static_cast<std::uint8_t>(n));
    }
    const double p = parse_double(row[4]);
    if (p < 0.0) throw DataError("negative probability");
    if (!t.probabilities.emplace(occ, p).second) throw DataError("duplicate number-table row");
  }
  return t;
}

void write_sweep(std::ostream& out, std::span<const SweepPoint> points) {
  out << "t1,t2,p_line,p_direct,p_estimator,herald_probability,herald_rate_relative\n";
  for (const auto& s : points) {
    out << format_double(s.t1) << ',' << format_double(s.t2) << ',' << format_double(s.p_line) << ','
        << format_double(s.p_direct) << ',' << format_double(s.p_estimator) << ','
        << format_double(s.herald_probability) << ',' << format_double(s.herald_rate_relative) << '\n';
  }
}

std::vector<SweepPoint> read_sweep(std::istream& in) {
  std::vector<SweepPoint> out;
  for (const auto& row : read_csv(in, {"t1", "t2", "p_line", "p_direct", "p_estimator",
                                       "herald_probability", "herald_rate_relative"})) {
    out.push_back({parse_double(row[0]), parse_double(row[1]), parse_double(row[2]), parse_double(row[3]),
                   parse_double(row[4]), parse_double(row[5]), parse_double(row[6])});
  }
  return out;
}

void write_reduction(std::ostream& out, const std::string& ratio, std::span<const ReductionRow> rows) {
  out << "ratio,quantity,simulated,reference,relative_error,flagged\n";
  for (const auto& r : rows) {
    out << ratio << ',' << r.quantity << ',' << format_double(r.simulated) << ',' << csv_optional(r.reference)
        << ',' << csv_optional(r.relative_error) << ',' << (r.flagged ? 1 : 0) << '\n';
  }
}

void write_series(std::ostream& out, const Series& series) {
  const bool errors = !series.points.empty() &&
                      std::all_of(series.points.begin(), series.points.end(),
                                  [](const SeriesPoint& p) { return p.error.has_value(); });
  out << series.x_name << ',' << series.y_name;
  if (errors) out << ',' << series.y_name << "_error";
  out << '\n';
  for (const auto& p : series.points) {
    out << format_double(p.x) << ',' << format_double(p.y);
    if (errors) out << ',' << format_double(*p.error);
    out << '\n';
  }
}

Series read_series(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty series file");
  const auto header = split_csv_line(line);
  if (header.size() != 2 && header.size() != 3) throw DataError("series header must have two or three columns");
  Series s{header[0], header[1], {}};
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw DataError("series row has the wrong number of fields");
    SeriesPoint p{parse_double(f[0]), parse_double(f[1]), std::nullopt};
    if (f.size() == 3) p.error = parse_double(f[2]);
    s.points.push_back(p);
  }
  return s;
}

json density_matrix_to_json(const TwoQubitDensityMatrix& rho) {
  json re = json::array();
  json im = json::array();
  for (int i = 0; i < 4; ++i) {
    json r = json::array();
    json m = json::array();
    for (int j = 0; j < 4; ++j) {
      r.push_back(rho(i, j).real());
      m.push_back(rho(i, j).imag());
    }
    re.push_back(r);
    im.push_back(m);
  }
  return {{"basis", {"HH", "HV", "VH", "VV"}}, {"real", re}, {"imag", im}};
}

TwoQubitDensityMatrix density_matrix_from_json(const json& j) {
  try {
    Matrix4c m;
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) m(i, k) = Complex(j.at("real").at(i).at(k).get<double>(), j.at("imag").at(i).at(k).get<double>());
    return TwoQubitDensityMatrix(m);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed density matrix: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("unphysical density matrix: ") + e.what());
  }
}

}  // namespace heraldsim
