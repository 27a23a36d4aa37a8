#include "heraldsim/source.hpp"

#include <cmath>
#include <stdexcept>

#include "heraldsim/elements.hpp"

namespace heraldsim {

void SpdcParams::validate() const {
  if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in [0, 1)");
  if (max_pairs < 0) throw std::invalid_argument("max_pairs must be non-negative");
  if (2 * max_pairs > photon_cap) throw std::invalid_argument("max_pairs exceeds the photon cap");
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw std::invalid_argument("visibility must lie in [0, 1]");
  }
}

double pair_probability(double tau, int n) {
  const double a = 1.0 - tau * tau;
  return a * a * (n + 1) * std::pow(tau, 2 * n);
}

SparseKet pair_term(int n, PairPhase phase, int photon_cap) {
  if (n < 0) throw std::invalid_argument("pair number must be non-negative");
  if (2 * n > photon_cap) throw std::invalid_argument("pair term exceeds the photon cap");
  SparseKet ket(source_register());
  const double norm = 1.0 / std::sqrt(n + 1.0);
  const double s = phase == PairPhase::Minus ? -1.0 : 1.0;
  for (int k = 0; k <= n; ++k) {
    const auto hi = static_cast<std::uint8_t>(n - k);
    const auto lo = static_cast<std::uint8_t>(k);
    ket.add({hi, lo, lo, hi}, norm * std::pow(s, k));
  }
  return ket;
}

SparseKet spdc_state(const SpdcParams& params) {
  params.validate();
  SparseKet ket(source_register());
  double kept = 0.0;
  for (int n = 0; n <= params.max_pairs; ++n) {
    const double amp = (1.0 - params.tau * params.tau) * std::sqrt(n + 1.0) * std::pow(params.tau, n);
    if (amp == 0.0) continue;
    kept += amp * amp;
    const SparseKet term = pair_term(n, params.phase, params.photon_cap);
    for (const auto& [occ, a] : term.amplitudes()) {
      ket.add(occ, amp * a);
    }
  }
  ket.prune();
  ket = ket.normalized();
  ket.set_truncation_weight(1.0 - kept);
  return ket;
}

VisibilityMixture apply_visibility(const SparseKet& two_pair_block, double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw std::invalid_argument("visibility must lie in [0, 1]");
  }
  return VisibilityMixture{visibility, 1.0 - visibility, two_pair_block};
}

double scale_tau_with_power(double tau_reference, double power_reference, double power) {
  if (power_reference <= 0.0 || power < 0.0) throw std::invalid_argument("powers must be positive");
  return tau_reference * std::sqrt(power / power_reference);
}

}  // namespace heraldsim
