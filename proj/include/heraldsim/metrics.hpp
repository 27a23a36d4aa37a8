#pragma once

#include <span>

#include <Eigen/Dense>

#include "heraldsim/detection.hpp"
#include "heraldsim/two_qubit.hpp"

namespace heraldsim {

/// <phi+|rho|phi+>, or its maximum over local unitaries.
double fidelity_to_phi_plus(const TwoQubitDensityMatrix& rho, bool optimize_local = false);

double concurrence(const TwoQubitDensityMatrix& rho);
/// Squared concurrence.
double tangle(const TwoQubitDensityMatrix& rho);

/// M_ij = tr(rho sigma_i x sigma_j), i, j over x, y, z.
Eigen::Matrix3d correlation_matrix(const TwoQubitDensityMatrix& rho);
/// Largest CHSH value attainable with the state: 2 sqrt(m1 + m2).
double chsh_max(const TwoQubitDensityMatrix& rho);

/// Four- and six-fold coincidence rates and the per-mode output efficiency.
struct RateEstimate {
  double c4 = 0.0;
  double c6 = 0.0;
  double eta = 1.0;
};

struct EfficiencyEstimate {
  double raw = 0.0;       // C6 / (C4 eta^2)
  double reported = 0.0;  // raw clamped to 1
  bool exceeds_one = false;
};

/// Throws std::invalid_argument on C4 = 0, negative rates or eta outside (0, 1].
EfficiencyEstimate preparation_efficiency(const RateEstimate& rates);

/// Probability, given the herald, of exactly one photon in each output arm
/// before output loss. Throws std::domain_error for a zero herald probability.
double direct_preparation_probability(const ConditionalEnsemble& ensemble);

double total_state_fidelity(double p11, double fidelity_post);
/// P_{1;1} read from the table.
double total_state_fidelity(const NumberTable& table, const TwoQubitDensityMatrix& rho_post,
                            bool optimize_local = false);

/// (max - min) / (max + min) over the scan. Throws std::invalid_argument for
/// fewer than two points or max + min = 0.
double visibility_from_scan(std::span<const double> counts);
/// Contrast of the least-squares fit a + b cos(phi) + c sin(phi).
double visibility_from_fringe(std::span<const double> phases, std::span<const double> counts);

}  // namespace heraldsim
