#pragma once

// Reference implementations used only by the tests. They share no code with
// the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "heraldsim/fock.hpp"
#include "heraldsim/two_qubit.hpp"

namespace oracle {

using heraldsim::Complex;
using heraldsim::Occupation;

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/// Permanent by summing over all permutations.
inline Complex permanent(const Eigen::MatrixXcd& m) {
  const int n = static_cast<int>(m.rows());
  if (n == 0) return 1.0;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Complex sum = 0.0;
  do {
    Complex prod = 1.0;
    for (int i = 0; i < n; ++i) prod *= m(i, perm[i]);
    sum += prod;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return sum;
}

/// All occupations of `modes` modes with exactly `photons` photons.
inline std::vector<Occupation> occupations(std::size_t modes, int photons) {
  std::vector<Occupation> out;
  Occupation occ(modes, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t m, int left) {
    if (m + 1 == modes) {
      occ[m] = static_cast<std::uint8_t>(left);
      out.push_back(occ);
      return;
    }
    for (int k = left; k >= 0; --k) {
      occ[m] = static_cast<std::uint8_t>(k);
      rec(m + 1, left - k);
    }
  };
  if (modes == 0) return photons == 0 ? std::vector<Occupation>{Occupation{}} : out;
  rec(0, photons);
  return out;
}

/// <out| U |in> = Perm(U[out rows, in cols]) / sqrt(prod in! prod out!).
inline Complex transition_amplitude(const Eigen::MatrixXcd& u, const Occupation& in, const Occupation& out) {
  std::vector<int> cols;
  std::vector<int> rows;
  double norm = 1.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    for (int k = 0; k < in[i]; ++k) cols.push_back(static_cast<int>(i));
    norm *= factorial(in[i]);
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (int k = 0; k < out[j]; ++k) rows.push_back(static_cast<int>(j));
    norm *= factorial(out[j]);
  }
  if (rows.size() != cols.size()) return 0.0;
  Eigen::MatrixXcd sub(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) sub(r, c) = u(rows[r], cols[c]);
  return permanent(sub) / std::sqrt(norm);
}

/// Dense second-quantized evolution of a sparse state.
inline std::map<Occupation, Complex> dense_apply(const std::map<Occupation, Complex>& state,
                                                 const Eigen::MatrixXcd& u) {
  std::map<Occupation, Complex> out;
  for (const auto& [in, amp] : state) {
    int n = 0;
    for (auto k : in) n += k;
    for (const auto& o : occupations(static_cast<std::size_t>(u.rows()), n)) {
      const Complex a = transition_amplitude(u, in, o);
      if (std::abs(a) > 0.0) out[o] += amp * a;
    }
  }
  return out;
}

inline Eigen::MatrixXcd random_unitary(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) z(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd r = qr.matrixQR();
  for (int i = 0; i < n; ++i) q.col(i) *= std::polar(1.0, std::arg(r(i, i)));
  return q;
}

inline Eigen::Matrix2cd random_su2(std::mt19937_64& rng) { return random_unitary(2, rng); }

inline heraldsim::Matrix4c random_density_matrix(std::mt19937_64& rng, int rank = 4) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd a(4, rank);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < rank; ++j) a(i, j) = Complex(g(rng), g(rng));
  heraldsim::Matrix4c rho = a * a.adjoint();
  return rho / rho.trace().real();
}

/// Largest overlap with a maximally entangled state: top eigenvalue of the
/// real part of rho written in the magic basis.
inline double fully_entangled_fraction(const heraldsim::Matrix4c& rho) {
  const Complex i(0.0, 1.0);
  const double s = 1.0 / std::sqrt(2.0);
  heraldsim::Matrix4c magic;
  magic.col(0) << s, 0, 0, s;
  magic.col(1) << i * s, 0, 0, -i * s;
  magic.col(2) << 0, i * s, i * s, 0;
  magic.col(3) << 0, s, -s, 0;
  const heraldsim::Matrix4c m = magic.adjoint() * rho * magic;
  Eigen::Matrix4d re = m.real();
  re = 0.5 * (re + re.transpose()).eval();
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(re).eigenvalues().maxCoeff();
}

/// Concurrence of a Werner state p phi+ + (1 - p) I/4.
inline double werner_concurrence(double p) { return std::max(0.0, (3.0 * p - 1.0) / 2.0); }

}  // namespace oracle
