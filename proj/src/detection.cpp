#include "heraldsim/detection.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace heraldsim {

namespace {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Per-mode detector outcome distribution for `photons` incident photons.
std::vector<std::pair<std::uint8_t, double>> mode_outcomes(int photons, double eta,
                                                           Resolution resolution) {
  std::vector<std::pair<std::uint8_t, double>> out;
  if (resolution == Resolution::Threshold) {
    const double none = std::pow(1.0 - eta, photons);
    if (none > 0.0) out.emplace_back(0, none);
    if (1.0 - none > 0.0) out.emplace_back(1, 1.0 - none);
    return out;
  }
  for (int d = 0; d <= photons; ++d) {
    const double p = thinning_probability(photons, d, eta);
    if (p > 0.0) out.emplace_back(static_cast<std::uint8_t>(d), p);
  }
  return out;
}

void accumulate_outcomes(const Occupation& occ, double weight, const DetectorModel& detectors,
                         std::map<Occupation, double>& into) {
  std::map<Occupation, double> partial{{Occupation{}, weight}};
  for (std::size_t m = 0; m < occ.size(); ++m) {
    const auto outcomes = mode_outcomes(occ[m], detectors.efficiency[m], detectors.resolution);
    std::map<Occupation, double> next;
    for (const auto& [pattern, p] : partial) {
      for (const auto& [d, q] : outcomes) {
        Occupation extended = pattern;
        extended.push_back(d);
        next[extended] += p * q;
      }
    }
    partial = std::move(next);
  }
  for (const auto& [pattern, p] : partial) into[pattern] += p;
}

std::vector<std::size_t> complement(std::size_t size, std::span<const std::size_t> modes) {
  std::vector<bool> used(size, false);
  for (auto m : modes) used.at(m) = true;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < size; ++i)
    if (!used[i]) rest.push_back(i);
  return rest;
}

ModeRegister sub_register(const ModeRegister& reg, const std::vector<std::size_t>& modes) {
  if (modes.empty()) return ModeRegister::empty();
  std::vector<ModeLabel> labels;
  for (auto m : modes) labels.push_back(reg[m]);
  return ModeRegister(std::move(labels));
}

constexpr std::array<std::array<std::uint8_t, 4>, 4> kCoincidencePatterns{{
    {1, 0, 1, 0},  // HH
    {1, 0, 0, 1},  // HV
    {0, 1, 1, 0},  // VH
    {0, 1, 0, 1},  // VV
}};

}  // namespace

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double c = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      c += (sum - t) + v;
    } else {
      c += (v - t) + sum;
    }
    sum = t;
  }
  return sum + c;
}

DetectorModel DetectorModel::uniform(std::size_t modes, double eta, Resolution resolution) {
  DetectorModel d{std::vector<double>(modes, eta), resolution};
  d.validate(modes);
  return d;
}

DetectorModel DetectorModel::ideal(std::size_t modes, Resolution resolution) {
  return uniform(modes, 1.0, resolution);
}

void DetectorModel::validate(std::size_t modes) const {
  if (efficiency.size() != modes) throw std::invalid_argument("detector count does not match modes");
  for (double e : efficiency) {
    if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("detector efficiency outside [0, 1]");
  }
}

DetectorModel DetectorModel::subset(std::span<const std::size_t> modes) const {
  DetectorModel d{{}, resolution};
  for (auto m : modes) d.efficiency.push_back(efficiency.at(m));
  return d;
}

double thinning_probability(int photons, int detected, double eta) {
  if (detected < 0 || detected > photons) return 0.0;
  return binomial(photons, detected) * std::pow(eta, detected) *
         std::pow(1.0 - eta, photons - detected);
}

double herald_success(int photons, double eta, Resolution resolution) {
  if (resolution == Resolution::Threshold) return 1.0 - std::pow(1.0 - eta, photons);
  return thinning_probability(photons, 1, eta);
}

std::map<Occupation, double> click_distribution(const SparseKet& state,
                                                const DetectorModel& detectors) {
  detectors.validate(state.modes().size());
  std::map<Occupation, double> out;
  for (const auto& [occ, amp] : state.amplitudes()) {
    accumulate_outcomes(occ, std::norm(amp), detectors, out);
  }
  return out;
}

ConditionalEnsemble herald(const SparseKet& state, std::span<const std::size_t> herald_modes,
                           const DetectorModel& detectors) {
  detectors.validate(herald_modes.size());
  const auto rest = complement(state.modes().size(), herald_modes);
  ConditionalEnsemble ens{sub_register(state.modes(), rest), {}, 0.0};
  std::vector<double> weights;
  for (const auto& [pattern, remainder] : partition(state, herald_modes)) {
    double success = 1.0;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      success *= herald_success(pattern[i], detectors.efficiency[i], detectors.resolution);
    }
    const double w = remainder.norm2() * success;
    if (w <= 0.0) continue;
    ens.components.push_back({w, remainder.normalized()});
    weights.push_back(w);
  }
  ens.herald_probability = compensated_sum(weights);
  return ens;
}

ConditionalEnsemble herald(const std::map<Occupation, double>& distribution,
                           const ModeRegister& modes, std::span<const std::size_t> herald_modes,
                           const DetectorModel& detectors) {
  detectors.validate(herald_modes.size());
  const auto rest = complement(modes.size(), herald_modes);
  std::map<Occupation, double> by_output;
  for (const auto& [occ, p] : distribution) {
    double success = 1.0;
    for (std::size_t i = 0; i < herald_modes.size(); ++i) {
      success *= herald_success(occ[herald_modes[i]], detectors.efficiency[i], detectors.resolution);
    }
    if (p * success <= 0.0) continue;
    Occupation out(rest.size());
    for (std::size_t k = 0; k < rest.size(); ++k) out[k] = occ[rest[k]];
    by_output[out] += p * success;
  }
  ConditionalEnsemble ens{sub_register(modes, rest), {}, 0.0};
  std::vector<double> weights;
  for (const auto& [occ, w] : by_output) {
    ens.components.push_back({w, SparseKet::basis(ens.output_modes, occ)});
    weights.push_back(w);
  }
  ens.herald_probability = compensated_sum(weights);
  return ens;
}

ConditionalEnsemble merge(const ConditionalEnsemble& a, const ConditionalEnsemble& b) {
  if (!(a.output_modes == b.output_modes)) throw std::invalid_argument("ensemble register mismatch");
  ConditionalEnsemble out = a;
  out.components.insert(out.components.end(), b.components.begin(), b.components.end());
  std::vector<double> weights;
  for (const auto& c : out.components) weights.push_back(c.weight);
  out.herald_probability = compensated_sum(weights);
  return out;
}

ConditionalEnsemble herald_source(const CircuitLayout& circuit, const SpdcParams& params,
                                  const DetectorModel& herald_detectors) {
  params.validate();
  const ModeMap total = circuit.total();
  const SparseKet source = spdc_state(params);

  // Split off the two-pair block (exactly four photons).
  SparseKet coherent(source.modes());
  SparseKet block(source.modes());
  for (const auto& [occ, amp] : source.amplitudes()) {
    if (total_photons(occ) == 4) {
      block.add(occ, amp);
    } else {
      coherent.add(occ, amp);
    }
  }
  const double block_weight = block.norm2();
  VisibilityMixture mix;
  if (block_weight > 0.0) mix = apply_visibility(block.normalized(), params.visibility);
  if (block_weight > 0.0 && mix.coherent_weight > 0.0) {
    for (const auto& [occ, amp] : block.amplitudes()) {
      coherent.add(occ, amp * std::sqrt(mix.coherent_weight));
    }
  }

  const auto& hm = circuit.herald_modes;
  ConditionalEnsemble ens = herald(apply_mode_map(coherent, total), hm, herald_detectors);
  if (block_weight > 0.0 && mix.distinguishable_weight > 0.0) {
    auto dist = distinguishable_transfer(mix.block, total);
    for (auto& [occ, p] : dist) p *= block_weight * mix.distinguishable_weight;
    ens = merge(ens, herald(dist, total.outputs, hm, herald_detectors));
  }
  return ens;
}

double NumberTable::probability(const Occupation& pattern) const {
  auto it = probabilities.find(pattern);
  return it == probabilities.end() ? 0.0 : it->second;
}

double NumberTable::arm_probability(int n1, int n2) const {
  auto totals = arm_totals();
  auto it = totals.find({n1, n2});
  return it == totals.end() ? 0.0 : it->second;
}

std::map<std::pair<int, int>, double> NumberTable::arm_totals() const {
  std::map<std::pair<int, int>, double> out;
  for (const auto& [occ, p] : probabilities) {
    out[{occ[0] + occ[1], occ[2] + occ[3]}] += p;
  }
  return out;
}

double NumberTable::total() const {
  std::vector<double> v;
  for (const auto& [occ, p] : probabilities) v.push_back(p);
  return compensated_sum(v);
}

NumberTable number_table(const ConditionalEnsemble& ensemble,
                         const DetectorModel& output_detectors) {
  output_detectors.validate(ensemble.output_modes.size());
  NumberTable table;
  if (ensemble.herald_probability <= 0.0) return table;
  for (const auto& c : ensemble.components) {
    for (const auto& [occ, amp] : c.state.amplitudes()) {
      accumulate_outcomes(occ, c.weight * std::norm(amp) / ensemble.herald_probability,
                          output_detectors, table.probabilities);
    }
  }
  return table;
}

Matrix4c convention_correction(double t1, double t2) {
  const CircuitLayout circuit = build_heralding_circuit(t1, t2);
  const SparseKet out = apply_mode_map(pair_term(3), circuit.total());
  const ConditionalEnsemble ens =
      herald(out, circuit.herald_modes, DetectorModel::ideal(4, Resolution::NumberResolving));
  if (ens.components.size() != 1) {
    throw std::domain_error("three-pair herald has no unique reference state for these splitters");
  }
  const SparseKet& ket = ens.components.front().state;
  Vector4c psi;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = kCoincidencePatterns[i];
    psi(static_cast<Eigen::Index>(i)) = ket.amplitude(Occupation(p.begin(), p.end()));
  }
  if (std::abs(psi.squaredNorm() - 1.0) > 1e-9) {
    throw std::domain_error("reference herald leaves photons outside the coincidence basis");
  }
  Eigen::Matrix2cd w;
  w << psi(0), psi(2), psi(1), psi(3);  // sqrt(2) * reshape(psi)^T
  w *= std::sqrt(2.0);
  if ((w.adjoint() * w - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::domain_error("reference herald is not maximally entangled");
  }
  return kron(Eigen::Matrix2cd::Identity(), w.adjoint());
}

TwoQubitDensityMatrix postselect_two_qubit(const ConditionalEnsemble& ensemble,
                                           const DetectorModel& output_detectors,
                                           const Matrix4c& correction) {
  output_detectors.validate(ensemble.output_modes.size());
  if (ensemble.output_modes.size() != 4) throw std::invalid_argument("expected four output modes");
  const auto& eta = output_detectors.efficiency;
  Matrix4c rho = Matrix4c::Zero();

  for (const auto& c : ensemble.components) {
    // Kraus branches of the loss channel, keyed by lost photons per mode.
    std::map<Occupation, Vector4c> branches;
    for (const auto& [occ, amp] : c.state.amplitudes()) {
      for (std::size_t i = 0; i < 4; ++i) {
        const auto& survive = kCoincidencePatterns[i];
        Occupation lost(4);
        double factor = 1.0;
        bool ok = true;
        for (std::size_t m = 0; m < 4 && ok; ++m) {
          if (occ[m] < survive[m]) {
            ok = false;
            break;
          }
          lost[m] = static_cast<std::uint8_t>(occ[m] - survive[m]);
          factor *= thinning_probability(occ[m], survive[m], eta[m]);
        }
        if (!ok || factor <= 0.0) continue;
        auto it = branches.try_emplace(lost, Vector4c::Zero()).first;
        it->second(static_cast<Eigen::Index>(i)) += amp * std::sqrt(factor);
      }
    }
    for (const auto& [lost, v] : branches) rho += c.weight * v * v.adjoint();
  }
  const double tr = rho.trace().real();
  if (tr <= 0.0) throw std::domain_error("zero coincidence probability");
  rho /= tr;
  rho = correction * rho * correction.adjoint();
  rho = (rho + rho.adjoint()) / 2.0;
  return TwoQubitDensityMatrix(rho);
}

double arm_coincidence_probability(const ConditionalEnsemble& ensemble,
                                   const DetectorModel& output_detectors) {
  output_detectors.validate(ensemble.output_modes.size());
  if (ensemble.herald_probability <= 0.0) return 0.0;
  const auto& eta = output_detectors.efficiency;
  std::vector<double> terms;
  for (const auto& c : ensemble.components) {
    for (const auto& [occ, amp] : c.state.amplitudes()) {
      const double dark1 = std::pow(1.0 - eta[0], occ[0]) * std::pow(1.0 - eta[1], occ[1]);
      const double dark2 = std::pow(1.0 - eta[2], occ[2]) * std::pow(1.0 - eta[3], occ[3]);
      terms.push_back(c.weight * std::norm(amp) * (1.0 - dark1) * (1.0 - dark2));
    }
  }
  return compensated_sum(terms) / ensemble.herald_probability;
}

}  // namespace heraldsim
