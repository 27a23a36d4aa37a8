#include "heraldsim/fock.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>

namespace heraldsim {

namespace {

// n! for small n, exact in double up to 22!.
double factorial(int n) {
  static const std::vector<double> table = [] {
    std::vector<double> t(171, 1.0);
    for (int i = 1; i < 171; ++i) t[i] = t[i - 1] * i;
    return t;
  }();
  if (n < 0 || n > 170) throw std::out_of_range("factorial argument out of range");
  return table[static_cast<std::size_t>(n)];
}

double sqrt_factorial_product(const Occupation& occ) {
  double p = 1.0;
  for (auto n : occ) p *= factorial(n);
  return std::sqrt(p);
}

// Every way of distributing `n` photons over `slots`, with the multinomial
// coefficient times the product of per-slot amplitudes raised to the counts.
void distribute(int n, std::size_t slot, const std::vector<std::pair<std::size_t, Complex>>& slots,
                Occupation& counts, Complex coefficient, double inv_fact_product,
                const std::function<void(const Occupation&, Complex)>& emit) {
  if (slot + 1 == slots.size()) {
    const auto [mode, amp] = slots[slot];
    counts[mode] = static_cast<std::uint8_t>(counts[mode] + n);
    emit(counts, coefficient * std::pow(amp, n) * inv_fact_product / factorial(n));
    counts[mode] = static_cast<std::uint8_t>(counts[mode] - n);
    return;
  }
  const auto [mode, amp] = slots[slot];
  Complex power = 1.0;
  for (int k = 0; k <= n; ++k) {
    counts[mode] = static_cast<std::uint8_t>(counts[mode] + k);
    distribute(n - k, slot + 1, slots, counts, coefficient * power, inv_fact_product / factorial(k),
               emit);
    counts[mode] = static_cast<std::uint8_t>(counts[mode] - k);
    power *= amp;
  }
}

}  // namespace

std::string ModeLabel::name() const {
  return spatial + (pol == Polarization::H ? "H" : "V");
}

ModeRegister::ModeRegister(std::vector<ModeLabel> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw std::invalid_argument("mode register must hold at least one mode");
  std::set<ModeLabel> seen;
  for (const auto& l : labels_) {
    if (!seen.insert(l).second) throw std::invalid_argument("duplicate mode label " + l.name());
  }
}

std::optional<std::size_t> ModeRegister::find(const ModeLabel& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

std::size_t ModeRegister::index_of(const ModeLabel& label) const {
  if (auto i = find(label)) return *i;
  throw std::invalid_argument("unknown mode " + label.name());
}

std::size_t ModeRegister::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].name() == name) return i;
  }
  throw std::invalid_argument("unknown mode " + std::string(name));
}

int total_photons(const Occupation& occ) {
  return std::accumulate(occ.begin(), occ.end(), 0);
}

SparseKet::SparseKet(ModeRegister modes) : modes_(std::move(modes)) {}

SparseKet SparseKet::basis(ModeRegister modes, Occupation occ, Complex amplitude) {
  if (occ.size() != modes.size()) throw std::invalid_argument("occupation length mismatch");
  SparseKet k(std::move(modes));
  k.add(occ, amplitude);
  return k;
}

Complex SparseKet::amplitude(const Occupation& occ) const {
  auto it = amps_.find(occ);
  return it == amps_.end() ? Complex{} : it->second;
}

void SparseKet::add(const Occupation& occ, Complex amplitude) {
  if (occ.size() != modes_.size()) throw std::invalid_argument("occupation length mismatch");
  amps_[occ] += amplitude;
}

SparseKet& SparseKet::prune(double threshold) {
  std::erase_if(amps_, [threshold](const auto& kv) { return std::abs(kv.second) < threshold; });
  return *this;
}

double SparseKet::norm2() const {
  double s = 0.0;
  for (const auto& [occ, a] : amps_) s += std::norm(a);
  return s;
}

SparseKet SparseKet::normalized() const {
  const double n = norm2();
  if (n <= 0.0) throw std::domain_error("cannot normalize a zero ket");
  return scaled(1.0 / std::sqrt(n));
}

SparseKet SparseKet::scaled(Complex factor) const {
  SparseKet out = *this;
  for (auto& [occ, a] : out.amps_) a *= factor;
  return out;
}

int SparseKet::max_photons() const {
  int m = 0;
  for (const auto& [occ, a] : amps_) m = std::max(m, total_photons(occ));
  return m;
}

SparseKet vacuum(const ModeRegister& modes) {
  return SparseKet::basis(modes, Occupation(modes.size(), 0));
}

ModeMap make_mode_map(ModeRegister inputs, ModeRegister outputs, Eigen::MatrixXcd matrix) {
  if (matrix.rows() != static_cast<Eigen::Index>(outputs.size()) ||
      matrix.cols() != static_cast<Eigen::Index>(inputs.size())) {
    throw std::invalid_argument("mode map matrix shape does not match its registers");
  }
  return ModeMap{std::move(inputs), std::move(outputs), std::move(matrix)};
}

ModeMap identity_map(const ModeRegister& modes) {
  const auto n = static_cast<Eigen::Index>(modes.size());
  return make_mode_map(modes, modes, Eigen::MatrixXcd::Identity(n, n));
}

bool is_isometry(const ModeMap& map, double tol) {
  if (map.matrix.rows() < map.matrix.cols()) return false;
  const Eigen::MatrixXcd g = map.matrix.adjoint() * map.matrix;
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(g.rows(), g.cols());
  return (g - id).cwiseAbs().maxCoeff() <= tol;
}

ModeMap compose(const ModeMap& first, const ModeMap& then) {
  if (!(first.outputs == then.inputs)) {
    throw std::invalid_argument("cannot compose mode maps: register mismatch");
  }
  return make_mode_map(first.inputs, then.outputs, then.matrix * first.matrix);
}

ModeMap permutation_map(const ModeRegister& from, const ModeRegister& target,
                        const std::map<ModeLabel, ModeLabel>& rename) {
  if (from.size() != target.size()) throw std::invalid_argument("permutation size mismatch");
  const auto n = static_cast<Eigen::Index>(from.size());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t i = 0; i < from.size(); ++i) {
    auto it = rename.find(from[i]);
    const ModeLabel& to = it == rename.end() ? from[i] : it->second;
    const auto j = target.index_of(to);
    m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
  }
  ModeMap out = make_mode_map(from, target, std::move(m));
  if (!is_isometry(out)) throw std::invalid_argument("relabeling is not a bijection");
  return out;
}

SparseKet apply_mode_map(const SparseKet& state, const ModeMap& map) {
  if (!(state.modes() == map.inputs)) {
    throw std::invalid_argument("mode map input register does not match the state");
  }
  if (!is_isometry(map)) throw std::invalid_argument("mode map is not unitary or isometric");

  const std::size_t n_in = map.inputs.size();
  const std::size_t n_out = map.outputs.size();

  std::vector<std::vector<std::pair<std::size_t, Complex>>> columns(n_in);
  for (std::size_t i = 0; i < n_in; ++i) {
    for (std::size_t j = 0; j < n_out; ++j) {
      const Complex m = map.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      if (m != Complex{}) columns[i].emplace_back(j, m);
    }
  }

  SparseKet out(map.outputs);
  out.set_truncation_weight(state.truncation_weight());

  for (const auto& [occ, amp] : state.amplitudes()) {
    // Creation-operator monomial coefficients, substituted one input mode at a time.
    std::map<Occupation, Complex> monomials{{Occupation(n_out, 0), amp / sqrt_factorial_product(occ)}};
    for (std::size_t i = 0; i < n_in; ++i) {
      const int n = occ[i];
      if (n == 0) continue;
      if (columns[i].empty()) {
        monomials.clear();
        break;
      }
      std::map<Occupation, Complex> next;
      const double n_fact = factorial(n);
      for (const auto& [exps, c] : monomials) {
        Occupation counts = exps;
        distribute(n, 0, columns[i], counts, c * n_fact, 1.0,
                   [&next](const Occupation& k, Complex v) { next[k] += v; });
      }
      monomials = std::move(next);
    }
    for (const auto& [exps, c] : monomials) out.add(exps, c * sqrt_factorial_product(exps));
  }
  out.prune();
  return out;
}

SparseKet tensor(const SparseKet& a, const SparseKet& b) {
  std::vector<ModeLabel> labels = a.modes().labels();
  labels.insert(labels.end(), b.modes().labels().begin(), b.modes().labels().end());
  SparseKet out{ModeRegister(std::move(labels))};
  for (const auto& [oa, xa] : a.amplitudes()) {
    for (const auto& [ob, xb] : b.amplitudes()) {
      Occupation occ = oa;
      occ.insert(occ.end(), ob.begin(), ob.end());
      out.add(occ, xa * xb);
    }
  }
  out.prune();
  return out;
}

std::map<Occupation, SparseKet> partition(const SparseKet& state,
                                          std::span<const std::size_t> modes) {
  const ModeRegister& reg = state.modes();
  std::vector<bool> selected(reg.size(), false);
  for (auto m : modes) {
    if (m >= reg.size()) throw std::invalid_argument("projection mode out of range");
    if (selected[m]) throw std::invalid_argument("projection mode listed twice");
    selected[m] = true;
  }
  std::vector<ModeLabel> rest_labels;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < reg.size(); ++i) {
    if (!selected[i]) {
      rest_labels.push_back(reg[i]);
      rest.push_back(i);
    }
  }
  const ModeRegister rest_reg =
      rest_labels.empty() ? ModeRegister::empty() : ModeRegister(std::move(rest_labels));

  std::map<Occupation, SparseKet> groups;
  for (const auto& [occ, amp] : state.amplitudes()) {
    Occupation key(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k) key[k] = occ[modes[k]];
    Occupation remainder(rest.size());
    for (std::size_t k = 0; k < rest.size(); ++k) remainder[k] = occ[rest[k]];
    auto it = groups.try_emplace(key, rest_reg).first;
    it->second.add(remainder, amp);
  }
  return groups;
}

Projection project_occupation(const SparseKet& state, std::span<const std::size_t> modes,
                              const Occupation& pattern) {
  if (pattern.size() != modes.size()) throw std::invalid_argument("pattern length mismatch");
  auto groups = partition(state, modes);
  auto it = groups.find(pattern);
  if (it == groups.end()) {
    // Still report the remaining register, with no amplitudes.
    auto any = partition(vacuum(state.modes()), modes);
    return Projection{0.0, SparseKet(any.begin()->second.modes())};
  }
  const double p = it->second.norm2();
  if (p <= 0.0) return Projection{0.0, SparseKet(it->second.modes())};
  return Projection{p, it->second.normalized()};
}

std::map<Occupation, double> distinguishable_transfer(const SparseKet& state, const ModeMap& map) {
  if (!(state.modes() == map.inputs)) {
    throw std::invalid_argument("mode map input register does not match the state");
  }
  if (!is_isometry(map)) throw std::invalid_argument("mode map is not unitary or isometric");
  const std::size_t n_out = map.outputs.size();

  std::map<Occupation, double> result;
  for (const auto& [occ, amp] : state.amplitudes()) {
    std::map<Occupation, double> paths{{Occupation(n_out, 0), std::norm(amp)}};
    for (std::size_t i = 0; i < occ.size(); ++i) {
      for (int photon = 0; photon < occ[i]; ++photon) {
        std::map<Occupation, double> next;
        for (const auto& [o, p] : paths) {
          for (std::size_t j = 0; j < n_out; ++j) {
            const double q =
                std::norm(map.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
            if (q == 0.0) continue;
            Occupation o2 = o;
            ++o2[j];
            next[o2] += p * q;
          }
        }
        paths = std::move(next);
      }
    }
    for (const auto& [o, p] : paths) result[o] += p;
  }
  return result;
}

}  // namespace heraldsim
