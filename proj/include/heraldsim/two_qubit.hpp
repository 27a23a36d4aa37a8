#pragma once

// Two-qubit polarization states in the coincidence basis {HH, HV, VH, VV}
// (first letter: arm 1).

#include <array>

#include <Eigen/Dense>

#include "heraldsim/fock.hpp"

namespace heraldsim {

using Matrix4c = Eigen::Matrix4cd;
using Vector4c = Eigen::Vector4cd;

class TwoQubitDensityMatrix {
 public:
  static constexpr double kTolerance = 1e-10;

  TwoQubitDensityMatrix();  // maximally mixed
  /// Throws std::invalid_argument unless Hermitian, unit trace and PSD
  /// within kTolerance.
  explicit TwoQubitDensityMatrix(const Matrix4c& rho);

  static TwoQubitDensityMatrix pure(const Vector4c& psi);
  /// Hermitian part, clipped to PSD and renormalized.
  static TwoQubitDensityMatrix nearest_physical(const Matrix4c& m);

  const Matrix4c& matrix() const { return rho_; }
  Complex operator()(int i, int j) const { return rho_(i, j); }

  TwoQubitDensityMatrix transformed(const Matrix4c& unitary) const;

 private:
  Matrix4c rho_;
};

/// Pauli matrices; index 0 is the identity, 1..3 are x, y, z.
const Eigen::Matrix2cd& pauli(int index);

Vector4c phi_plus();
Vector4c phi_minus();
Vector4c psi_plus();
Vector4c psi_minus();

/// Populations on phi+, phi-, psi+, psi- in that order.
std::array<double, 4> bell_populations(const TwoQubitDensityMatrix& rho);

TwoQubitDensityMatrix werner(double p);

double trace_distance(const TwoQubitDensityMatrix& a, const TwoQubitDensityMatrix& b);

Matrix4c kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b);

}  // namespace heraldsim
