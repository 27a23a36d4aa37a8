#include "heraldsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "heraldsim/tomography.hpp"

namespace heraldsim {

double fidelity_to_phi_plus(const TwoQubitDensityMatrix& rho, bool optimize_local) {
  if (optimize_local) return std::clamp(optimize_local_fidelity(rho).fidelity, 0.0, 1.0);
  const Vector4c p = phi_plus();
  return std::clamp((p.adjoint() * rho.matrix() * p)(0, 0).real(), 0.0, 1.0);
}

double concurrence(const TwoQubitDensityMatrix& rho) {
  // Singular values of W^T (Y x Y) W with rho = W W^dag avoid square roots of
  // round-off eigenvalues. Eigenvalues at round-off level count as zero.
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(rho.matrix());
  const double cutoff = 1e-14 * std::max(1.0, es.eigenvalues().maxCoeff());
  Matrix4c w = es.eigenvectors();
  for (int k = 0; k < 4; ++k) {
    const double ev = es.eigenvalues()(k);
    w.col(k) *= ev > cutoff ? std::sqrt(ev) : 0.0;
  }
  const Matrix4c yy = kron(pauli(2), pauli(2));
  const Matrix4c tau = w.transpose() * yy * w;
  const Eigen::Vector4d l = Eigen::JacobiSVD<Matrix4c>(tau).singularValues();  // descending
  return std::max(0.0, l(0) - l(1) - l(2) - l(3));
}

double tangle(const TwoQubitDensityMatrix& rho) {
  const double c = concurrence(rho);
  return std::clamp(c * c, 0.0, 1.0);
}

Eigen::Matrix3d correlation_matrix(const TwoQubitDensityMatrix& rho) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = (rho.matrix() * kron(pauli(i + 1), pauli(j + 1))).trace().real();
  return m;
}

double chsh_max(const TwoQubitDensityMatrix& rho) {
  const Eigen::Matrix3d m = correlation_matrix(rho);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m.transpose() * m);
  const Eigen::Vector3d ev = es.eigenvalues().cwiseMax(0.0);  // ascending
  return 2.0 * std::sqrt(ev(2) + ev(1));
}

EfficiencyEstimate preparation_efficiency(const RateEstimate& rates) {
  if (!(rates.c4 > 0.0)) throw std::invalid_argument("four-fold rate must be positive");
  if (rates.c6 < 0.0) throw std::invalid_argument("six-fold rate must be non-negative");
  if (!(rates.eta > 0.0 && rates.eta <= 1.0)) throw std::invalid_argument("efficiency outside (0, 1]");
  EfficiencyEstimate e;
  e.raw = rates.c6 / (rates.c4 * rates.eta * rates.eta);
  e.exceeds_one = e.raw > 1.0;
  e.reported = std::min(e.raw, 1.0);
  return e;
}

double direct_preparation_probability(const ConditionalEnsemble& ensemble) {
  if (!(ensemble.herald_probability > 0.0)) throw std::domain_error("herald probability is zero");
  std::vector<double> parts;
  for (const auto& c : ensemble.components) {
    double p = 0.0;
    for (const auto& [occ, amp] : c.state.amplitudes()) {
      if (occ[0] + occ[1] == 1 && occ[2] + occ[3] == 1) p += std::norm(amp);
    }
    parts.push_back(c.weight * p);
  }
  return compensated_sum(parts) / ensemble.herald_probability;
}

double total_state_fidelity(double p11, double fidelity_post) { return p11 * fidelity_post; }

double total_state_fidelity(const NumberTable& table, const TwoQubitDensityMatrix& rho_post,
                            bool optimize_local) {
  return total_state_fidelity(table.arm_probability(1, 1), fidelity_to_phi_plus(rho_post, optimize_local));
}

double visibility_from_scan(std::span<const double> counts) {
  if (counts.size() < 2) throw std::invalid_argument("visibility needs at least two scan points");
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo < 0.0) throw std::invalid_argument("negative counts in scan");
  if (*hi + *lo == 0.0) throw std::invalid_argument("degenerate scan: max + min = 0");
  return (*hi - *lo) / (*hi + *lo);
}

double visibility_from_fringe(std::span<const double> phases, std::span<const double> counts) {
  if (phases.size() != counts.size()) throw std::invalid_argument("phase and count lengths differ");
  if (counts.size() < 3) throw std::invalid_argument("fringe fit needs at least three points");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(counts.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    a(r, 0) = 1.0;
    a(r, 1) = std::cos(phases[k]);
    a(r, 2) = std::sin(phases[k]);
    b(r) = counts[k];
  }
  const Eigen::Vector3d x = a.colPivHouseholderQr().solve(b);
  if (!(x(0) > 0.0)) throw std::invalid_argument("degenerate fringe: non-positive mean");
  return std::min(1.0, std::hypot(x(1), x(2)) / x(0));
}

}  // namespace heraldsim
