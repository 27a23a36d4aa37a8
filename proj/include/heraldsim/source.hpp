#pragma once

// Two-mode polarization-entangled SPDC emission.
//
// The n-pair term lives on a1H, a1V, a2H, a2V and reads
//   (1/sqrt(n+1)) sum_k s^k |n-k, k; k, n-k>,
// with s = -1 for the singlet-like convention used throughout (k counts the
// V photons in a1). The truncated state weights it by (1 - tau^2) sqrt(n+1) tau^n.

#include "heraldsim/fock.hpp"

namespace heraldsim {

enum class PairPhase { Minus, Plus };

struct SpdcParams {
  double tau = 0.3;  // tanh of the squeezing parameter
  int max_pairs = 3;
  int photon_cap = kDefaultPhotonCap;
  PairPhase phase = PairPhase::Minus;
  double visibility = 1.0;  // multi-pair interference visibility

  /// Throws std::invalid_argument when any field is out of range.
  void validate() const;
};

/// Pair-number distribution of the untruncated state.
double pair_probability(double tau, int n);

SparseKet pair_term(int n, PairPhase phase = PairPhase::Minus, int photon_cap = kDefaultPhotonCap);

/// Renormalized after truncation; truncation_weight() records the dropped tail.
SparseKet spdc_state(const SpdcParams& params);

/// Split of the two-pair block into an interfering part and a fully
/// distinguishable copy.
struct VisibilityMixture {
  double coherent_weight = 1.0;
  double distinguishable_weight = 0.0;
  SparseKet block;
};

VisibilityMixture apply_visibility(const SparseKet& two_pair_block, double visibility);

/// Laser power to tau: tau^2 scales linearly with pump power.
double scale_tau_with_power(double tau_reference, double power_reference, double power);

}  // namespace heraldsim
