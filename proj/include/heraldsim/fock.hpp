#pragma once

// Sparse Fock-space algebra over a labeled register of optical modes.
//
// A SparseKet stores complex amplitudes keyed by exact occupation vectors.
// Passive linear optics enters through ModeMap: the single-photon transfer
// matrix (rows = output modes, columns = input modes), so that every creation
// operator is substituted as a_i^dag -> sum_j M(j, i) b_j^dag.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace heraldsim {

using Complex = std::complex<double>;

enum class Polarization : std::uint8_t { H, V };

struct ModeLabel {
  std::string spatial;
  Polarization pol = Polarization::H;

  std::string name() const;
  auto operator<=>(const ModeLabel&) const = default;
};

/// Ordered, duplicate-free list of mode labels.
class ModeRegister {
 public:
  ModeRegister() = default;
  /// Throws std::invalid_argument on duplicate labels or an empty list.
  explicit ModeRegister(std::vector<ModeLabel> labels);

  /// The zero-mode register left over after projecting every mode.
  static ModeRegister empty() { return ModeRegister(); }

  std::size_t size() const { return labels_.size(); }
  const ModeLabel& operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<ModeLabel>& labels() const { return labels_; }

  std::optional<std::size_t> find(const ModeLabel& label) const;
  std::size_t index_of(const ModeLabel& label) const;
  std::size_t index_of(std::string_view name) const;

  bool operator==(const ModeRegister&) const = default;

 private:
  std::vector<ModeLabel> labels_;
};

/// Photon count per register mode.
using Occupation = std::vector<std::uint8_t>;

int total_photons(const Occupation& occ);

/// Default photon-number cap: four SPDC pairs.
inline constexpr int kDefaultPhotonCap = 8;

class SparseKet {
 public:
  static constexpr double kPruneThreshold = 1e-14;

  SparseKet() = default;
  explicit SparseKet(ModeRegister modes);

  static SparseKet basis(ModeRegister modes, Occupation occ, Complex amplitude = 1.0);

  const ModeRegister& modes() const { return modes_; }
  const std::map<Occupation, Complex>& amplitudes() const { return amps_; }

  Complex amplitude(const Occupation& occ) const;
  /// Accumulates into an existing entry; call prune() once building is done.
  void add(const Occupation& occ, Complex amplitude);

  SparseKet& prune(double threshold = kPruneThreshold);

  double norm2() const;
  SparseKet normalized() const;
  SparseKet scaled(Complex factor) const;

  bool empty() const { return amps_.empty(); }
  std::size_t size() const { return amps_.size(); }
  int max_photons() const;

  /// Squared norm discarded by photon-number truncation upstream.
  double truncation_weight() const { return truncation_weight_; }
  void set_truncation_weight(double w) { truncation_weight_ = w; }

 private:
  ModeRegister modes_;
  std::map<Occupation, Complex> amps_;
  double truncation_weight_ = 0.0;
};

SparseKet vacuum(const ModeRegister& modes);

struct ModeMap {
  ModeRegister inputs;
  ModeRegister outputs;
  Eigen::MatrixXcd matrix;  // outputs.size() x inputs.size()
};

/// Checks the matrix shape against both registers.
ModeMap make_mode_map(ModeRegister inputs, ModeRegister outputs, Eigen::MatrixXcd matrix);
ModeMap identity_map(const ModeRegister& modes);

/// True when the columns are orthonormal (unitary when square).
bool is_isometry(const ModeMap& map, double tol = 1e-12);

/// `first` followed by `then`; the composite matrix is then.matrix * first.matrix.
ModeMap compose(const ModeMap& first, const ModeMap& then);

/// Relabels and reorders modes. Every label of `target` must be reachable
/// through `rename` (old spatial name -> new spatial name, polarization kept).
ModeMap permutation_map(const ModeRegister& from, const ModeRegister& target,
                        const std::map<ModeLabel, ModeLabel>& rename);

/// Throws std::invalid_argument on a register mismatch or a non-isometric map.
SparseKet apply_mode_map(const SparseKet& state, const ModeMap& map);

/// Throws std::invalid_argument on label collision.
SparseKet tensor(const SparseKet& a, const SparseKet& b);

struct Projection {
  double probability = 0.0;
  SparseKet remainder;
};

/// Conditions `modes` on `pattern`; the remainder is renormalized, or empty
/// when the probability is zero.
Projection project_occupation(const SparseKet& state, std::span<const std::size_t> modes,
                              const Occupation& pattern);

/// Groups the state by the occupation of `modes`. Each remainder keeps its
/// unnormalized amplitudes, so its norm2() is the pattern probability.
std::map<Occupation, SparseKet> partition(const SparseKet& state,
                                          std::span<const std::size_t> modes);

/// Output occupation distribution when every photon is a distinguishable
/// particle: incoherent over basis kets and over photon paths.
std::map<Occupation, double> distinguishable_transfer(const SparseKet& state, const ModeMap& map);

}  // namespace heraldsim
