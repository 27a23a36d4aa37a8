#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "heraldsim/fock.hpp"

namespace heraldsim {

/// Single-qubit Pauli basis selected by the polarization analyzer of an arm.
enum class Basis { X, Y, Z };

Basis parse_basis(std::string_view name);
char basis_char(Basis b);

// Jones matrices act on (H, V) amplitude vectors.
Eigen::Matrix2cd hwp_jones(double angle);
/// Fast axis at `angle`; retardance applies -i to the slow component and the
/// global phase makes the H->H entry real and non-negative.
Eigen::Matrix2cd qwp_jones(double angle);
/// Waveplate stack sending the +1 eigenstate of the Pauli basis to H and the
/// -1 eigenstate to V, up to phases.
Eigen::Matrix2cd analyzer_jones(Basis basis);

/// Non-polarizing splitter with intensity transmission T. Local ports:
/// inputs "in", "vac"; outputs "t" (transmitted), "r" (reflected).
ModeMap beam_splitter_map(double transmission);
/// Waveplate acting on the (H, V) pair of local spatial mode "x".
ModeMap hwp_map(double angle);
ModeMap qwp_map(double angle);
/// Polarizing splitter: "in" H -> "t", "in" V -> "r"; the "vac" port feeds the
/// opposite polarizations. No reflection phase.
ModeMap pbs_map();

/// Embeds a local element into a register. `rename` maps local spatial names
/// to register (input side) or new (output side) names. Local inputs absent
/// from the register are vacuum ports and are dropped; `keep` restricts the
/// local outputs that survive (empty = all). Untouched modes pass through.
ModeMap lift(const ModeMap& local, const ModeRegister& modes,
             const std::map<std::string, std::string>& rename,
             const std::vector<ModeLabel>& keep = {});

struct CircuitStage {
  std::string name;
  ModeMap map;
};

/// The heralding setup: two splitters, an H/V analyzer on r1, a +/- analyzer
/// on r2, and setting-dependent polarization analysis on t1 and t2.
struct CircuitLayout {
  double t1 = 0.5;
  double t2 = 0.5;
  Basis analysis1 = Basis::Z;
  Basis analysis2 = Basis::Z;
  ModeRegister source_modes;
  ModeRegister detection_modes;
  std::vector<CircuitStage> stages;
  // Indices into detection_modes.
  std::array<std::size_t, 4> herald_modes{};  // r1H, r1V, r2+, r2-
  std::array<std::size_t, 4> output_modes{};  // t1H, t1V, t2H, t2V

  ModeMap total() const;
};

/// Source register a1H, a1V, a2H, a2V.
const ModeRegister& source_register();
/// Detection register r1H, r1V, r2+, r2-, t1H, t1V, t2H, t2V.
const ModeRegister& detection_register();

CircuitLayout build_heralding_circuit(double t1, double t2, Basis analysis1 = Basis::Z,
                                  Basis analysis2 = Basis::Z);

}  // namespace heraldsim
