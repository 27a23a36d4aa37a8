#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "heraldsim/detection.hpp"
#include "heraldsim/source.hpp"
#include "heraldsim/tomography.hpp"

namespace heraldsim {

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
  std::string label;
  double t1 = 0.5;
  double t2 = 0.5;
  SpdcParams spdc;
  DetectorModel herald_detectors = DetectorModel::uniform(4, kDefaultEfficiency);
  DetectorModel output_detectors = DetectorModel::uniform(4, kDefaultEfficiency);
  std::vector<MeasurementSetting> settings{tomography_settings().begin(), tomography_settings().end()};
  std::uint64_t events_per_setting = 10000;
  std::optional<std::uint64_t> seed;

  void validate() const;
};

/// Throws DataError on schema or range violations. Missing fields keep
/// their defaults; unknown fields are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

/// Everything the exact model predicts for one configuration.
struct Preparation {
  ConditionalEnsemble ensemble;
  NumberTable numbers;
  double herald_probability = 0.0;
  double p_direct = 0.0;
  double arm_coincidence = 0.0;  // C6 / C4
  double p_estimator = 0.0;      // C6 / (C4 eta^2)
  // After the convention correction; empty without one-photon-per-arm events.
  std::optional<TwoQubitDensityMatrix> rho_post;
};

/// For tau = 0 the herald is taken from the lowest order that fires it, the
/// three-pair term.
ConditionalEnsemble heralded_ensemble(const ExperimentConfig& config);
Preparation prepare(const ExperimentConfig& config);

struct SweepPoint {
  double t1 = 0.0;
  double t2 = 0.0;
  double p_line = 0.0;  // T1 * T2
  double p_direct = 0.0;
  double p_estimator = 0.0;
  double herald_probability = 0.0;
  double herald_rate_relative = 0.0;  // relative to the largest in the sweep
};

/// Configs are evaluated in parallel; output order follows the input.
std::vector<SweepPoint> run_sweep(std::span<const ExperimentConfig> configs);

struct PowerComparison {
  double t = 0.0;
  double tau_high = 0.0;
  double tau_low = 0.0;
  double f_post_high = 0.0;
  double f_post_low = 0.0;
  TwoQubitDensityMatrix rho_high;
  TwoQubitDensityMatrix rho_low;
};

/// Requires 0 <= tau_low <= tau_high < 1.
PowerComparison run_power_comparison(const ExperimentConfig& base, double tau_high, double tau_low,
                                     double t);

/// Fraction of six-fold coincidences contributed by four or more pairs.
double higher_order_fraction(const ExperimentConfig& config);

/// Tau at which higher_order_fraction equals `target` (bisection).
double calibrate_tau(const ExperimentConfig& base, double target_fraction = 0.10);

/// Row of the per-arm reduction P00, P10+P01, P11, P20+P02, P21+P12, P22.
struct ReductionRow {
  std::string quantity;
  double simulated = 0.0;
  std::optional<double> reference;
  std::optional<double> relative_error;
  bool flagged = false;  // simulated and reference differ by more than 3x
};

std::vector<ReductionRow> reduce_number_table(const NumberTable& table);

using ReferenceTable = std::map<std::string, std::map<std::string, double>>;  // ratio -> quantity -> value
ReferenceTable load_reference_table(std::istream& in);

struct NumberTableReport {
  NumberTable table;
  std::vector<ReductionRow> rows;
};

NumberTableReport reproduce_number_tables(const ExperimentConfig& config,
                                          const ReferenceTable* reference = nullptr);

/// Prediction plus simulated tomography of the post-selected state.
struct SimulationResult {
  Preparation preparation;
  CountTable counts;
  MleResult reconstruction;
};

SimulationResult simulate(const ExperimentConfig& config, std::uint64_t seed);

// CSV formats. Every writer has a reader that restores the written values.
void write_number_table(std::ostream& out, const NumberTable& table);
NumberTable read_number_table(std::istream& in);

void write_sweep(std::ostream& out, std::span<const SweepPoint> points);
std::vector<SweepPoint> read_sweep(std::istream& in);

void write_reduction(std::ostream& out, const std::string& ratio, std::span<const ReductionRow> rows);

struct SeriesPoint {
  double x = 0.0;
  double y = 0.0;
  std::optional<double> error;
};

struct Series {
  std::string x_name;
  std::string y_name;
  std::vector<SeriesPoint> points;
};

/// Two columns, plus an error column when every point carries one.
void write_series(std::ostream& out, const Series& series);
Series read_series(std::istream& in);

nlohmann::json density_matrix_to_json(const TwoQubitDensityMatrix& rho);
TwoQubitDensityMatrix density_matrix_from_json(const nlohmann::json& j);

}  // namespace heraldsim
