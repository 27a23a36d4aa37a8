#include "heraldsim/two_qubit.hpp"

#include <cmath>
#include <stdexcept>

namespace heraldsim {

namespace {

bool is_physical(const Matrix4c& m, double tol) {
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(m.trace() - Complex(1.0)) > tol) return false;
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

}  // namespace

TwoQubitDensityMatrix::TwoQubitDensityMatrix() : rho_(Matrix4c::Identity() / 4.0) {}

TwoQubitDensityMatrix::TwoQubitDensityMatrix(const Matrix4c& rho) : rho_(rho) {
  if (!is_physical(rho_, kTolerance)) throw std::invalid_argument("not a valid density matrix");
}

TwoQubitDensityMatrix TwoQubitDensityMatrix::pure(const Vector4c& psi) {
  const double n = psi.squaredNorm();
  if (n <= 0.0) throw std::invalid_argument("zero state vector");
  return TwoQubitDensityMatrix(psi * psi.adjoint() / n);
}

TwoQubitDensityMatrix TwoQubitDensityMatrix::nearest_physical(const Matrix4c& m) {
  const Matrix4c h = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(h);
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  if (ev.sum() <= 0.0) return TwoQubitDensityMatrix();
  ev /= ev.sum();
  Matrix4c r = es.eigenvectors() * ev.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  r = (r + r.adjoint()) / 2.0;
  return TwoQubitDensityMatrix(r);
}

TwoQubitDensityMatrix TwoQubitDensityMatrix::transformed(const Matrix4c& unitary) const {
  Matrix4c r = unitary * rho_ * unitary.adjoint();
  r = (r + r.adjoint()) / 2.0;
  return TwoQubitDensityMatrix(r);
}

const Eigen::Matrix2cd& pauli(int index) {
  static const std::array<Eigen::Matrix2cd, 4> p = [] {
    std::array<Eigen::Matrix2cd, 4> s;
    s[0] = Eigen::Matrix2cd::Identity();
    s[1] << 0, 1, 1, 0;
    s[2] << 0, Complex(0, -1), Complex(0, 1), 0;
    s[3] << 1, 0, 0, -1;
    return s;
  }();
  return p.at(static_cast<std::size_t>(index));
}

Vector4c phi_plus() { return Vector4c(1, 0, 0, 1) / std::sqrt(2.0); }
Vector4c phi_minus() { return Vector4c(1, 0, 0, -1) / std::sqrt(2.0); }
Vector4c psi_plus() { return Vector4c(0, 1, 1, 0) / std::sqrt(2.0); }
Vector4c psi_minus() { return Vector4c(0, 1, -1, 0) / std::sqrt(2.0); }

std::array<double, 4> bell_populations(const TwoQubitDensityMatrix& rho) {
  std::array<double, 4> out{};
  const std::array<Vector4c, 4> basis{phi_plus(), phi_minus(), psi_plus(), psi_minus()};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = (basis[i].adjoint() * rho.matrix() * basis[i])(0, 0).real();
  }
  return out;
}

TwoQubitDensityMatrix werner(double p) {
  const Vector4c phi = phi_plus();
  return TwoQubitDensityMatrix(p * phi * phi.adjoint() + (1.0 - p) * Matrix4c::Identity() / 4.0);
}

double trace_distance(const TwoQubitDensityMatrix& a, const TwoQubitDensityMatrix& b) {
  const Matrix4c d = a.matrix() - b.matrix();
  Eigen::SelfAdjointEigenSolver<Matrix4c> es((d + d.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

Matrix4c kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Matrix4c k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return k;
}

}  // namespace heraldsim
