#include "heraldsim/elements.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace heraldsim {

namespace {

using P = Polarization;

Eigen::Matrix2d rotation(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

ModeMap jones_map(const Eigen::Matrix2cd& jones) {
  ModeRegister x({{"x", P::H}, {"x", P::V}});
  return make_mode_map(x, x, jones);
}

std::string renamed(const std::map<std::string, std::string>& rename, const std::string& name) {
  auto it = rename.find(name);
  return it == rename.end() ? name : it->second;
}

}  // namespace

Basis parse_basis(std::string_view name) {
  if (name == "x" || name == "X") return Basis::X;
  if (name == "y" || name == "Y") return Basis::Y;
  if (name == "z" || name == "Z") return Basis::Z;
  throw std::invalid_argument("unknown measurement basis '" + std::string(name) + "'");
}

char basis_char(Basis b) {
  switch (b) {
    case Basis::X: return 'x';
    case Basis::Y: return 'y';
    case Basis::Z: return 'z';
  }
  return '?';
}

Eigen::Matrix2cd hwp_jones(double angle) {
  const double c = std::cos(2 * angle);
  const double s = std::sin(2 * angle);
  Eigen::Matrix2cd j;
  j << c, s, s, -c;
  return j;
}

Eigen::Matrix2cd qwp_jones(double angle) {
  const Eigen::Matrix2d r = rotation(angle);
  Eigen::Matrix2cd retarder = Eigen::Matrix2cd::Zero();
  retarder(0, 0) = 1.0;
  retarder(1, 1) = Complex(0.0, -1.0);
  Eigen::Matrix2cd j = r.cast<Complex>() * retarder * r.transpose().cast<Complex>();
  const Complex h = j(0, 0);
  if (std::abs(h) > 1e-15) j *= std::conj(h) / std::abs(h);
  return j;
}

Eigen::Matrix2cd analyzer_jones(Basis basis) {
  constexpr double pi = std::numbers::pi;
  switch (basis) {
    case Basis::Z: return Eigen::Matrix2cd::Identity();
    case Basis::X: return hwp_jones(pi / 8);
    case Basis::Y: return hwp_jones(pi / 4) * qwp_jones(pi / 4);
  }
  throw std::invalid_argument("bad basis");
}

ModeMap beam_splitter_map(double transmission) {
  if (!(transmission >= 0.0 && transmission <= 1.0)) {
    throw std::invalid_argument("beam splitter transmission must lie in [0, 1]");
  }
  const double t = std::sqrt(transmission);
  const double r = std::sqrt(1.0 - transmission);
  ModeRegister in({{"in", P::H}, {"in", P::V}, {"vac", P::H}, {"vac", P::V}});
  ModeRegister out({{"t", P::H}, {"t", P::V}, {"r", P::H}, {"r", P::V}});
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
  for (int p = 0; p < 2; ++p) {
    m(p, p) = t;          // in -> t
    m(p, p + 2) = r;      // vac -> t
    m(p + 2, p) = r;      // in -> r
    m(p + 2, p + 2) = -t; // vac -> r
  }
  return make_mode_map(std::move(in), std::move(out), std::move(m));
}

ModeMap hwp_map(double angle) { return jones_map(hwp_jones(angle)); }

ModeMap qwp_map(double angle) { return jones_map(qwp_jones(angle)); }

ModeMap pbs_map() {
  ModeRegister in({{"in", P::H}, {"in", P::V}, {"vac", P::H}, {"vac", P::V}});
  ModeRegister out({{"t", P::H}, {"t", P::V}, {"r", P::H}, {"r", P::V}});
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
  m(0, 0) = 1.0;  // in H -> t H
  m(3, 1) = 1.0;  // in V -> r V
  m(2, 2) = 1.0;  // vac H -> r H
  m(1, 3) = 1.0;  // vac V -> t V
  return make_mode_map(std::move(in), std::move(out), std::move(m));
}

ModeMap lift(const ModeMap& local, const ModeRegister& modes,
             const std::map<std::string, std::string>& rename,
             const std::vector<ModeLabel>& keep) {
  // Bind local inputs to register positions.
  std::vector<std::pair<std::size_t, std::size_t>> bound;  // (local col, register index)
  std::vector<bool> consumed(modes.size(), false);
  for (std::size_t c = 0; c < local.inputs.size(); ++c) {
    const ModeLabel& l = local.inputs[c];
    if (auto idx = modes.find({renamed(rename, l.spatial), l.pol})) {
      bound.emplace_back(c, *idx);
      consumed[*idx] = true;
    }
  }
  std::vector<std::size_t> kept_rows;
  for (std::size_t r = 0; r < local.outputs.size(); ++r) {
    const ModeLabel& l = local.outputs[r];
    if (keep.empty() || std::find(keep.begin(), keep.end(), l) != keep.end()) kept_rows.push_back(r);
  }

  std::vector<ModeLabel> out_labels;
  std::vector<std::size_t> passthrough;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (!consumed[i]) {
      out_labels.push_back(modes[i]);
      passthrough.push_back(i);
    }
  }
  for (auto r : kept_rows) {
    const ModeLabel& l = local.outputs[r];
    out_labels.push_back({renamed(rename, l.spatial), l.pol});
  }

  const auto rows = static_cast<Eigen::Index>(out_labels.size());
  const auto cols = static_cast<Eigen::Index>(modes.size());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(rows, cols);
  Eigen::Index row = 0;
  for (auto i : passthrough) m(row++, static_cast<Eigen::Index>(i)) = 1.0;
  for (auto r : kept_rows) {
    for (const auto& [c, idx] : bound) {
      m(row, static_cast<Eigen::Index>(idx)) =
          local.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    ++row;
  }
  ModeMap out = make_mode_map(modes, ModeRegister(std::move(out_labels)), std::move(m));
  if (!is_isometry(out)) throw std::invalid_argument("lifted element is not an isometry");
  return out;
}

ModeMap CircuitLayout::total() const {
  ModeMap acc = identity_map(source_modes);
  for (const auto& s : stages) acc = compose(acc, s.map);
  return acc;
}

const ModeRegister& source_register() {
  static const ModeRegister reg({{"a1", P::H}, {"a1", P::V}, {"a2", P::H}, {"a2", P::V}});
  return reg;
}

const ModeRegister& detection_register() {
  static const ModeRegister reg({{"r1", P::H},
                                 {"r1", P::V},
                                 {"r2", P::H},
                                 {"r2", P::V},
                                 {"t1", P::H},
                                 {"t1", P::V},
                                 {"t2", P::H},
                                 {"t2", P::V}});
  return reg;
}

CircuitLayout build_heralding_circuit(double t1, double t2, Basis analysis1, Basis analysis2) {
  constexpr double pi = std::numbers::pi;
  CircuitLayout c;
  c.t1 = t1;
  c.t2 = t2;
  c.analysis1 = analysis1;
  c.analysis2 = analysis2;
  c.source_modes = source_register();
  c.detection_modes = detection_register();

  ModeRegister reg = c.source_modes;
  auto push = [&](std::string name, ModeMap m) {
    reg = m.outputs;
    c.stages.push_back({std::move(name), std::move(m)});
  };
  auto splitter = [&](const std::string& arm, const std::string& tr, const std::string& rf,
                      double t) {
    push("BS(" + arm + ")",
         lift(beam_splitter_map(t), reg, {{"in", arm}, {"vac", arm + "_vac"}, {"t", tr}, {"r", rf}}));
  };
  auto waveplates = [&](const std::string& arm, const Eigen::Matrix2cd& jones, std::string name) {
    push(std::move(name) + "(" + arm + ")", lift(jones_map(jones), reg, {{"x", arm}}));
  };
  auto analyzer = [&](const std::string& arm) {
    push("PBS(" + arm + ")",
         lift(pbs_map(), reg,
              {{"in", arm}, {"vac", arm + "_vac"}, {"t", arm + "_t"}, {"r", arm + "_r"}},
              {{"t", P::H}, {"r", P::V}}));
  };

  splitter("a1", "t1", "r1", t1);
  splitter("a2", "t2", "r2", t2);
  analyzer("r1");
  waveplates("r2", hwp_jones(pi / 8), "HWP");
  analyzer("r2");
  for (auto [arm, basis] : {std::pair{std::string("t1"), analysis1}, std::pair{std::string("t2"), analysis2}}) {
    if (basis == Basis::X) waveplates(arm, hwp_jones(pi / 8), "HWP");
    if (basis == Basis::Y) {
      waveplates(arm, qwp_jones(pi / 4), "QWP");
      waveplates(arm, hwp_jones(pi / 4), "HWP");
    }
    analyzer(arm);
  }

  std::map<ModeLabel, ModeLabel> rename;
  for (const std::string arm : {"r1", "r2", "t1", "t2"}) {
    rename[{arm + "_t", P::H}] = {arm, P::H};
    rename[{arm + "_r", P::V}] = {arm, P::V};
  }
  push("detectors", permutation_map(reg, c.detection_modes, rename));

  c.herald_modes = {0, 1, 2, 3};
  c.output_modes = {4, 5, 6, 7};
  return c;
}

}  // namespace heraldsim
