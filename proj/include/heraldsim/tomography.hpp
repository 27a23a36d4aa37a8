#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "heraldsim/elements.hpp"
#include "heraldsim/rng.hpp"
#include "heraldsim/two_qubit.hpp"

namespace heraldsim {

/// Pauli basis on arm 1 and on arm 2.
struct MeasurementSetting {
  Basis first = Basis::Z;
  Basis second = Basis::Z;

  std::string name() const;  // e.g. "xz"
  auto operator<=>(const MeasurementSetting&) const = default;
};

/// The nine settings in the order xx, yy, zz, xz, xy, zy, zx, yx, yz.
const std::array<MeasurementSetting, 9>& tomography_settings();

/// Detected photon numbers (n1H, n1V, n2H, n2V).
using CountPattern = std::array<std::uint8_t, 4>;

/// The four coincidence patterns HH, HV, VH, VV.
const std::array<CountPattern, 4>& coincidence_patterns();

struct CountTable {
  std::string ratio;
  std::map<std::pair<MeasurementSetting, CountPattern>, std::uint64_t> counts;

  std::uint64_t count(const MeasurementSetting& s, const CountPattern& p) const;
  std::array<std::uint64_t, 4> coincidences(const MeasurementSetting& s) const;
  std::vector<MeasurementSetting> settings() const;
};

/// Outcome probabilities for HH, HV, VH, VV in the eigenbases of the setting
/// (first eigenvector = +1 eigenvalue).
std::array<double, 4> expected_coincidences(const TwoQubitDensityMatrix& rho,
                                            const MeasurementSetting& setting);

/// Multinomial draws per setting; setting k uses stream k of the seed.
CountTable simulate_counts(const TwoQubitDensityMatrix& rho,
                           std::span<const MeasurementSetting> settings,
                           std::uint64_t events_per_setting, std::uint64_t seed);

struct MleOptions {
  double tolerance = 1e-10;  // relative log-likelihood improvement
  int max_iterations = 100000;
};

struct MleResult {
  TwoQubitDensityMatrix rho;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // log-likelihood after each accepted step
};

/// Estimate used to seed the fit: unconstrained least-squares inversion of
/// the coincidence frequencies, projected to a physical state.
TwoQubitDensityMatrix linear_inversion(const CountTable& counts);

/// Log-likelihood in the factor parametrization used by the fit: four real
/// diagonal entries of the lower-triangular T, then (re, im) of the entries
/// below the diagonal, row by row. Writes the gradient when requested.
double factor_log_likelihood(const CountTable& counts, const std::array<double, 16>& params,
                             std::array<double, 16>* gradient = nullptr);

/// Coincidence-only maximum likelihood with per-setting normalization.
/// Throws DataError when there are no coincidences at all.
MleResult mle_reconstruct(const CountTable& counts, const MleOptions& options = {});

/// max over local unitaries of <phi+|(U1 x U2) rho (U1 x U2)^dag|phi+>.
struct LocalOptimum {
  double fidelity = 0.0;
  Eigen::Matrix2cd u1 = Eigen::Matrix2cd::Identity();
  Eigen::Matrix2cd u2 = Eigen::Matrix2cd::Identity();
};

LocalOptimum optimize_local_fidelity(const TwoQubitDensityMatrix& rho);

using Functional = std::function<double(const TwoQubitDensityMatrix&)>;
using Resampler = std::function<CountTable(const CountTable&, CounterRng&)>;

/// Every count redrawn from a Poisson distribution with the observed mean.
CountTable poisson_resample(const CountTable& counts, CounterRng& rng);

struct MonteCarloSummary {
  double mean = 0.0;
  double stddev = 0.0;
  int samples = 0;   // successful reconstructions
  int failures = 0;  // resampled tables that could not be reconstructed
};

/// Sample i uses stream i of the seed, so results do not depend on scheduling.
std::vector<MonteCarloSummary> monte_carlo_errors(const CountTable& counts, int n_samples,
                                                  std::uint64_t seed,
                                                  std::span<const Functional> functionals,
                                                  const Resampler& resampler = poisson_resample,
                                                  const MleOptions& options = {});

MonteCarloSummary monte_carlo_errors(const CountTable& counts, int n_samples, std::uint64_t seed,
                                     const Functional& functional,
                                     const Resampler& resampler = poisson_resample);

/// CSV with header ratio,setting_1,setting_2,n1H,n1V,n2H,n2V,count.
CountTable ingest_counts(std::istream& in);
CountTable ingest_counts_file(const std::string& path);
void write_counts(std::ostream& out, const CountTable& counts);

}  // namespace heraldsim
