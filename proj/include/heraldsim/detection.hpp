#pragma once

// Detector models and heralding.
//
// Loss is applied as binomial thinning at the detectors: every element after
// the source is passive, so uniform per-mode loss commutes to the end.

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "heraldsim/elements.hpp"
#include "heraldsim/fock.hpp"
#include "heraldsim/source.hpp"
#include "heraldsim/two_qubit.hpp"

namespace heraldsim {

enum class Resolution { Threshold, NumberResolving };

/// Fiber coupling (23 %) times detector efficiency (42 %).
inline constexpr double kDefaultEfficiency = 0.23 * 0.42;

struct DetectorModel {
  std::vector<double> efficiency;  // one entry per detection mode
  Resolution resolution = Resolution::Threshold;

  static DetectorModel uniform(std::size_t modes, double eta,
                               Resolution resolution = Resolution::Threshold);
  static DetectorModel ideal(std::size_t modes, Resolution resolution = Resolution::NumberResolving);

  std::size_t size() const { return efficiency.size(); }
  void validate(std::size_t modes) const;
  DetectorModel subset(std::span<const std::size_t> modes) const;
};

/// Binomial thinning: probability of detecting `detected` out of `photons`.
double thinning_probability(int photons, int detected, double eta);
/// Probability that a herald detector fires as required (threshold: any
/// photon survives; number-resolving: exactly one survives).
double herald_success(int photons, double eta, Resolution resolution);

/// Exact distribution of detector outcomes: clicks (0/1) for threshold
/// detectors, detected photon counts for number-resolving ones.
std::map<Occupation, double> click_distribution(const SparseKet& state,
                                                const DetectorModel& detectors);

struct EnsembleComponent {
  double weight = 0.0;
  SparseKet state;  // normalized, over the output modes
};

/// Heralded output: a weighted mixture of pure states whose weights sum to
/// the herald probability.
struct ConditionalEnsemble {
  ModeRegister output_modes;
  std::vector<EnsembleComponent> components;
  double herald_probability = 0.0;
};

/// Conditions on every herald mode firing. One component per herald-mode
/// occupation; `detectors` has one entry per herald mode. Output modes are
/// the complement of `herald_modes`, in register order, and are not vetoed.
ConditionalEnsemble herald(const SparseKet& state, std::span<const std::size_t> herald_modes,
                           const DetectorModel& detectors);

/// Same conditioning for an incoherent occupation distribution; each output
/// occupation becomes its own basis-state component.
ConditionalEnsemble herald(const std::map<Occupation, double>& distribution,
                           const ModeRegister& modes, std::span<const std::size_t> herald_modes,
                           const DetectorModel& detectors);

ConditionalEnsemble merge(const ConditionalEnsemble& a, const ConditionalEnsemble& b);

/// Full source-plus-circuit herald. The two-pair block enters coherently with
/// weight V and as a fully distinguishable copy with weight 1 - V.
ConditionalEnsemble herald_source(const CircuitLayout& circuit, const SpdcParams& params,
                                  const DetectorModel& herald_detectors);

/// Detected photon numbers (n1H, n1V, n2H, n2V) conditioned on the herald.
struct NumberTable {
  std::map<Occupation, double> probabilities;

  double probability(const Occupation& pattern) const;
  /// P_{n1;n2}, summed over polarizations.
  double arm_probability(int n1, int n2) const;
  std::map<std::pair<int, int>, double> arm_totals() const;
  double total() const;
};

NumberTable number_table(const ConditionalEnsemble& ensemble, const DetectorModel& output_detectors);

/// Unitary that maps the ideal heralded state of this splitter pair onto phi+.
/// Obtained from the lossless, number-resolved three-pair herald.
Matrix4c convention_correction(double t1, double t2);

/// Coincidence-basis state built from the components with exactly one
/// detected photon per output arm. Throws std::domain_error when that
/// probability is zero.
TwoQubitDensityMatrix postselect_two_qubit(const ConditionalEnsemble& ensemble,
                                           const DetectorModel& output_detectors,
                                           const Matrix4c& correction = Matrix4c::Identity());

/// Probability (given the herald) of a click in both output arms, summed over
/// polarization detectors.
double arm_coincidence_probability(const ConditionalEnsemble& ensemble,
                                   const DetectorModel& output_detectors);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

}  // namespace heraldsim
