#include "heraldsim/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>

#include "heraldsim/csv.hpp"
#include "heraldsim/fock.hpp"

namespace heraldsim {

namespace {

const Complex I(0.0, 1.0);

Eigen::Vector2cd eigenvector(Basis b, bool plus) {
  const double s = 1.0 / std::numbers::sqrt2;
  Eigen::Vector2cd v;
  switch (b) {
    case Basis::Z: v = plus ? Eigen::Vector2cd(1.0, 0.0) : Eigen::Vector2cd(0.0, 1.0); break;
    case Basis::X: v = Eigen::Vector2cd(s, plus ? s : -s); break;
    case Basis::Y: v = Eigen::Vector2cd(s, plus ? I * s : -I * s); break;
  }
  return v;
}

Matrix4c projector(const MeasurementSetting& s, int outcome) {
  const bool plus1 = outcome < 2;
  const bool plus2 = outcome % 2 == 0;
  Vector4c v;
  const Eigen::Vector2cd a = eigenvector(s.first, plus1);
  const Eigen::Vector2cd b = eigenvector(s.second, plus2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) v(2 * i + j) = a(i) * b(j);
  return v * v.adjoint();
}

// Coincidence data flattened for the likelihood.
struct Observation {
  Matrix4c projector;
  double count;
};

std::vector<Observation> observations(const CountTable& counts) {
  std::vector<Observation> obs;
  for (const auto& s : counts.settings()) {
    const auto n = counts.coincidences(s);
    for (int o = 0; o < 4; ++o) obs.push_back({projector(s, o), static_cast<double>(n[o])});
  }
  return obs;
}

constexpr int kParams = 16;
using Params = Eigen::Matrix<double, kParams, 1>;

// Lower-triangular factor: diagonal entries are real, then (re, im) pairs
// for the six entries below the diagonal.
Matrix4c unpack(const Params& x) {
  Matrix4c t = Matrix4c::Zero();
  int k = 0;
  for (int i = 0; i < 4; ++i) t(i, i) = x(k++);
  for (int i = 1; i < 4; ++i) {
    for (int j = 0; j < i; ++j) {
      t(i, j) = Complex(x(k), x(k + 1));
      k += 2;
    }
  }
  return t;
}

Params pack(const Matrix4c& t) {
  Params x;
  int k = 0;
  for (int i = 0; i < 4; ++i) x(k++) = t(i, i).real();
  for (int i = 1; i < 4; ++i) {
    for (int j = 0; j < i; ++j) {
      x(k++) = t(i, j).real();
      x(k++) = t(i, j).imag();
    }
  }
  return x;
}

// Factor T with T^dag T = rho for a full-rank rho.
Matrix4c lower_factor(const Matrix4c& rho) {
  Eigen::PermutationMatrix<4> p;
  p.indices() << 3, 2, 1, 0;
  const Matrix4c reversed = p * rho * p.transpose();
  Eigen::LLT<Matrix4c> llt(reversed);
  if (llt.info() != Eigen::Success) throw std::runtime_error("initial estimate is not positive definite");
  const Matrix4c l = llt.matrixL();
  return p.transpose() * Matrix4c(l.adjoint()) * p;
}

class Likelihood {
 public:
  explicit Likelihood(std::vector<Observation> obs) : obs_(std::move(obs)) {
    for (const auto& o : obs_) total_ += o.count;
  }

  // Returns -inf when a probability with observed counts vanishes.
  double value(const Params& x) const {
    const Matrix4c t = unpack(x);
    const Matrix4c a = t.adjoint() * t;
    const double tr = a.trace().real();
    if (!(tr > 0.0)) return -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const auto& o : obs_) {
      if (o.count == 0.0) continue;
      const double p = (o.projector * a).trace().real() / tr;
      if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
      sum += o.count * std::log(p);
    }
    return sum;
  }

  Params gradient(const Params& x) const {
    const Matrix4c t = unpack(x);
    const Matrix4c a = t.adjoint() * t;
    const double tr = a.trace().real();
    Matrix4c g = -total_ * Matrix4c::Identity();
    for (const auto& o : obs_) {
      if (o.count == 0.0) continue;
      const double p = (o.projector * a).trace().real() / tr;
      g += (o.count / p) * o.projector;
    }
    g /= tr;
    const Matrix4c gt = g * t.adjoint();
    Params out;
    int k = 0;
    for (int i = 0; i < 4; ++i) out(k++) = 2.0 * gt(i, i).real();
    for (int i = 1; i < 4; ++i) {
      for (int j = 0; j < i; ++j) {
        out(k++) = 2.0 * gt(j, i).real();
        out(k++) = -2.0 * gt(j, i).imag();
      }
    }
    return out;
  }

 private:
  std::vector<Observation> obs_;
  double total_ = 0.0;
};

TwoQubitDensityMatrix to_state(const Params& x) {
  const Matrix4c t = unpack(x);
  Matrix4c a = t.adjoint() * t;
  a /= a.trace().real();
  a = 0.5 * (a + a.adjoint()).eval();
  return TwoQubitDensityMatrix(a);
}

Eigen::Matrix2cd su2(const Eigen::Vector3d& v) {
  const double theta = v.norm();
  if (theta < 1e-300) return Eigen::Matrix2cd::Identity();
  const Eigen::Vector3d n = v / theta;
  Eigen::Matrix2cd gen = n(0) * pauli(1) + n(1) * pauli(2) + n(2) * pauli(3);
  return std::cos(theta / 2) * Eigen::Matrix2cd::Identity() - I * std::sin(theta / 2) * gen;
}

// The 24 rotations of the octahedral group.
std::vector<Eigen::Matrix2cd> octahedral_starts() {
  constexpr double pi = std::numbers::pi;
  std::vector<Eigen::Matrix2cd> out{Eigen::Matrix2cd::Identity()};
  for (int axis = 0; axis < 3; ++axis) {
    for (int q = 1; q <= 3; ++q) out.push_back(su2(Eigen::Vector3d::Unit(axis) * (q * pi / 2)));
  }
  const std::array<Eigen::Vector3d, 6> edges{{{1, 1, 0}, {1, -1, 0}, {1, 0, 1}, {1, 0, -1}, {0, 1, 1}, {0, 1, -1}}};
  for (const auto& e : edges) out.push_back(su2(e.normalized() * pi));
  const std::array<Eigen::Vector3d, 4> diagonals{{{1, 1, 1}, {1, 1, -1}, {1, -1, 1}, {-1, 1, 1}}};
  for (const auto& d : diagonals) {
    for (int q = 1; q <= 2; ++q) out.push_back(su2(d.normalized() * (q * 2 * pi / 3)));
  }
  return out;
}

double local_fidelity(const TwoQubitDensityMatrix& rho, const Eigen::Matrix2cd& w) {
  const Vector4c psi = kron(Eigen::Matrix2cd::Identity(), w.adjoint()) * phi_plus();
  return (psi.adjoint() * rho.matrix() * psi)(0, 0).real();
}

// Minimizes f over R^3 from x0.
template <class F>
Eigen::Vector3d nelder_mead(const F& f, const Eigen::Vector3d& x0, double step, double ftol,
                            int max_evals) {
  std::array<Eigen::Vector3d, 4> pts;
  std::array<double, 4> vals;
  pts[0] = x0;
  for (int i = 0; i < 3; ++i) pts[i + 1] = x0 + step * Eigen::Vector3d::Unit(i);
  for (int i = 0; i < 4; ++i) vals[i] = f(pts[i]);
  int evals = 4;
  while (evals < max_evals) {
    std::array<int, 4> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    const int best = order[0];
    const int worst = order[3];
    const int second = order[2];
    if (std::abs(vals[worst] - vals[best]) <= ftol) break;
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (int i = 0; i < 3; ++i) centroid += pts[order[i]];
    centroid /= 3.0;
    const Eigen::Vector3d xr = centroid + (centroid - pts[worst]);
    const double fr = f(xr);
    ++evals;
    if (fr < vals[best]) {
      const Eigen::Vector3d xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      const Eigen::Vector3d xc = centroid + 0.5 * (pts[worst] - centroid);
      const double fc = f(xc);
      ++evals;
      if (fc < vals[worst]) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (int i = 1; i < 4; ++i) {
          const int k = order[i];
          pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
          vals[k] = f(pts[k]);
          ++evals;
        }
      }
    }
  }
  return pts[static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin())];
}

}  // namespace

std::string MeasurementSetting::name() const {
  return std::string{basis_char(first), basis_char(second)};
}

const std::array<MeasurementSetting, 9>& tomography_settings() {
  using B = Basis;
  static const std::array<MeasurementSetting, 9> s{{{B::X, B::X},
                                                    {B::Y, B::Y},
                                                    {B::Z, B::Z},
                                                    {B::X, B::Z},
                                                    {B::X, B::Y},
                                                    {B::Z, B::Y},
                                                    {B::Z, B::X},
                                                    {B::Y, B::X},
                                                    {B::Y, B::Z}}};
  return s;
}

const std::array<CountPattern, 4>& coincidence_patterns() {
  static const std::array<CountPattern, 4> p{{{1, 0, 1, 0}, {1, 0, 0, 1}, {0, 1, 1, 0}, {0, 1, 0, 1}}};
  return p;
}

std::uint64_t CountTable::count(const MeasurementSetting& s, const CountPattern& p) const {
  auto it = counts.find({s, p});
  return it == counts.end() ? 0 : it->second;
}

std::array<std::uint64_t, 4> CountTable::coincidences(const MeasurementSetting& s) const {
  std::array<std::uint64_t, 4> out{};
  for (int o = 0; o < 4; ++o) out[o] = count(s, coincidence_patterns()[o]);
  return out;
}

std::vector<MeasurementSetting> CountTable::settings() const {
  std::vector<MeasurementSetting> out;
  for (const auto& [key, n] : counts) {
    if (out.empty() || out.back() != key.first) out.push_back(key.first);
  }
  return out;
}

std::array<double, 4> expected_coincidences(const TwoQubitDensityMatrix& rho,
                                            const MeasurementSetting& setting) {
  std::array<double, 4> p{};
  for (int o = 0; o < 4; ++o) p[o] = std::max(0.0, (projector(setting, o) * rho.matrix()).trace().real());
  return p;
}

CountTable simulate_counts(const TwoQubitDensityMatrix& rho,
                           std::span<const MeasurementSetting> settings,
                           std::uint64_t events_per_setting, std::uint64_t seed) {
  if (events_per_setting < 1) throw std::invalid_argument("events_per_setting must be at least 1");
  const CounterRng root(seed);
  CountTable table;
  table.ratio = "simulated";
  for (std::size_t k = 0; k < settings.size(); ++k) {
    CounterRng rng = root.split(k);
    const auto p = expected_coincidences(rho, settings[k]);
    std::uint64_t remaining = events_per_setting;
    double mass = p[0] + p[1] + p[2] + p[3];
    for (int o = 0; o < 4; ++o) {
      std::uint64_t n = remaining;
      if (o < 3) {
        const double q = mass > 0.0 ? std::clamp(p[o] / mass, 0.0, 1.0) : 0.0;
        std::binomial_distribution<std::uint64_t> draw(remaining, q);
        n = draw(rng);
      }
      table.counts[{settings[k], coincidence_patterns()[o]}] = n;
      remaining -= n;
      mass -= p[o];
    }
  }
  return table;
}

TwoQubitDensityMatrix linear_inversion(const CountTable& counts) {
  std::vector<std::pair<Matrix4c, double>> rows;
  for (const auto& s : counts.settings()) {
    const auto n = counts.coincidences(s);
    const double total = static_cast<double>(n[0] + n[1] + n[2] + n[3]);
    if (total == 0.0) continue;
    for (int o = 0; o < 4; ++o) rows.emplace_back(projector(s, o), n[o] / total);
  }
  if (rows.empty()) throw DataError("no coincidence counts to reconstruct from");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), 16);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        a(static_cast<Eigen::Index>(r), 4 * i + j) =
            (rows[r].first * kron(pauli(i), pauli(j))).trace().real() / 4.0;
      }
    }
    b(static_cast<Eigen::Index>(r)) = rows[r].second;
  }
  const Eigen::VectorXd x = a.completeOrthogonalDecomposition().solve(b);
  Matrix4c m = Matrix4c::Zero();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m += x(4 * i + j) * kron(pauli(i), pauli(j)) / 4.0;
  if (std::abs(m.trace().real()) < 1e-12) m += Matrix4c::Identity() / 4.0;
  return TwoQubitDensityMatrix::nearest_physical(m);
}

double factor_log_likelihood(const CountTable& counts, const std::array<double, 16>& params,
                             std::array<double, 16>* gradient) {
  const Likelihood like(observations(counts));
  const Params x = Eigen::Map<const Params>(params.data());
  if (gradient != nullptr) Eigen::Map<Params>(gradient->data()) = like.gradient(x);
  return like.value(x);
}

MleResult mle_reconstruct(const CountTable& counts, const MleOptions& options) {
  const TwoQubitDensityMatrix initial = linear_inversion(counts);
  const Likelihood like(observations(counts));

  // Keep the start strictly inside the state space.
  constexpr double kMix = 1e-3;
  const Matrix4c start = (1.0 - kMix) * initial.matrix() + kMix * Matrix4c::Identity() / 4.0;
  Params x = pack(lower_factor(start));
  double f = like.value(x);
  Params g = like.gradient(x);

  MleResult result{initial, f, 0, false, {f}};
  using Hessian = Eigen::Matrix<double, kParams, kParams>;
  Hessian h = Hessian::Identity();
  bool fresh = true;
  int small_steps = 0;

  for (int it = 1; it <= options.max_iterations; ++it) {
    result.iterations = it;
    Params d = h * g;
    if (d.dot(g) <= 0.0) {
      h.setIdentity();
      fresh = true;
      d = g;
    }
    // Armijo backtracking on the log-likelihood (ascent).
    double step = 1.0;
    Params xn;
    double fn = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int halvings = 0; halvings < 80; ++halvings, step *= 0.5) {
      xn = x + step * d;
      fn = like.value(xn);
      if (std::isfinite(fn) && fn >= f + 1e-4 * step * g.dot(d)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (fresh) {
        result.converged = true;  // no ascent direction left at working precision
        break;
      }
      h.setIdentity();
      fresh = true;
      continue;
    }
    const Params gn = like.gradient(xn);
    const Params s = xn - x;
    const Params y = g - gn;  // gradient of -L changes by -(gn - g)
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (fresh) h *= sy / y.squaredNorm();
      const double rho_k = 1.0 / sy;
      const Hessian id = Hessian::Identity();
      h = (id - rho_k * s * y.transpose()) * h * (id - rho_k * y * s.transpose()) +
          rho_k * s * s.transpose();
      fresh = false;
    }
    const double improvement = fn - f;
    x = xn;
    f = fn;
    g = gn;
    result.history.push_back(f);
    if (improvement < options.tolerance * std::max(1.0, std::abs(f))) {
      if (++small_steps >= 2) {
        result.converged = true;
        break;
      }
    } else {
      small_steps = 0;
    }
  }
  result.rho = to_state(x);
  result.log_likelihood = f;
  return result;
}

LocalOptimum optimize_local_fidelity(const TwoQubitDensityMatrix& rho) {
  LocalOptimum best;
  best.fidelity = -1.0;
  for (const auto& w0 : octahedral_starts()) {
    auto objective = [&](const Eigen::Vector3d& v) { return -local_fidelity(rho, w0 * su2(v)); };
    const Eigen::Vector3d v = nelder_mead(objective, Eigen::Vector3d::Zero(), 0.4, 1e-15, 4000);
    const double fid = -objective(v);
    if (fid > best.fidelity + 1e-14) {
      best.fidelity = fid;
      best.u2 = w0 * su2(v);
    }
  }
  return best;
}

CountTable poisson_resample(const CountTable& counts, CounterRng& rng) {
  CountTable out;
  out.ratio = counts.ratio;
  for (const auto& [key, n] : counts.counts) {
    std::uint64_t draw = 0;
    if (n > 0) {
      std::poisson_distribution<std::uint64_t> poisson(static_cast<double>(n));
      draw = poisson(rng);
    }
    out.counts[key] = draw;
  }
  return out;
}

std::vector<MonteCarloSummary> monte_carlo_errors(const CountTable& counts, int n_samples,
                                                  std::uint64_t seed,
                                                  std::span<const Functional> functionals,
                                                  const Resampler& resampler,
                                                  const MleOptions& options) {
  if (n_samples < 2) throw std::invalid_argument("at least two Monte Carlo samples are required");
  const CounterRng root(seed);
  const auto n = static_cast<std::size_t>(n_samples);
  std::vector<std::optional<std::vector<double>>> values(n);

  auto run = [&](std::size_t i) {
    CounterRng rng = root.split(i);
    try {
      const MleResult r = mle_reconstruct(resampler(counts, rng), options);
      if (!r.converged) return;
      std::vector<double> v;
      for (const auto& fn : functionals) v.push_back(fn(r.rho));
      values[i] = std::move(v);
    } catch (const std::exception&) {
      // Counted below as a failure.
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
  std::vector<std::future<void>> tasks;
  for (std::size_t w = 0; w < workers; ++w) {
    tasks.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < n; i += workers) run(i);
    }));
  }
  for (auto& t : tasks) t.get();

  // Welford accumulation in sample order.
  std::vector<MonteCarloSummary> out(functionals.size());
  std::vector<double> m2(functionals.size(), 0.0);
  for (const auto& v : values) {
    for (std::size_t k = 0; k < functionals.size(); ++k) {
      auto& s = out[k];
      if (!v) {
        ++s.failures;
        continue;
      }
      ++s.samples;
      const double delta = (*v)[k] - s.mean;
      s.mean += delta / s.samples;
      m2[k] += delta * ((*v)[k] - s.mean);
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].stddev = out[k].samples > 1 ? std::sqrt(m2[k] / (out[k].samples - 1)) : 0.0;
  }
  return out;
}

MonteCarloSummary monte_carlo_errors(const CountTable& counts, int n_samples, std::uint64_t seed,
                                     const Functional& functional, const Resampler& resampler) {
  const std::array<Functional, 1> fns{functional};
  return monte_carlo_errors(counts, n_samples, seed, fns, resampler).front();
}

CountTable ingest_counts(std::istream& in) {
  static const std::vector<std::string> header{"ratio", "setting_1", "setting_2", "n1H",
                                               "n1V",   "n2H",       "n2V",       "count"};
  const auto rows = read_csv(in, header);
  if (rows.empty()) throw DataError("count table has no rows");
  CountTable table;
  table.ratio = rows.front()[0];
  for (const auto& row : rows) {
    if (row[0] != table.ratio) throw DataError("mixed ratio labels in one count table");
    MeasurementSetting s;
    try {
      if (row[1].size() != 1 || row[2].size() != 1) throw std::invalid_argument("bad setting");
      s = {parse_basis(row[1]), parse_basis(row[2])};
    } catch (const std::invalid_argument&) {
      throw DataError("unknown setting '" + row[1] + row[2] + "'");
    }
    CountPattern p{};
    for (int k = 0; k < 4; ++k) {
      const long long v = parse_integer(row[3 + k]);
      if (v < 0 || v > kDefaultPhotonCap) throw DataError("photon number out of range: " + row[3 + k]);
      p[k] = static_cast<std::uint8_t>(v);
    }
    const long long c = parse_integer(row[7]);
    if (c < 0) throw DataError("negative count: " + row[7]);
    if (!table.counts.emplace(std::pair{s, p}, static_cast<std::uint64_t>(c)).second) {
      throw DataError("duplicate entry for setting " + s.name());
    }
  }
  return table;
}

CountTable ingest_counts_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open count file '" + path + "'");
  return ingest_counts(in);
}

void write_counts(std::ostream& out, const CountTable& counts) {
  out << "ratio,setting_1,setting_2,n1H,n1V,n2H,n2V,count\n";
  for (const auto& [key, n] : counts.counts) {
    const auto& [s, p] = key;
    out << counts.ratio << ',' << basis_char(s.first) << ',' << basis_char(s.second);
    for (auto v : p) out << ',' << static_cast<int>(v);
    out << ',' << n << '\n';
  }
}

}  // namespace heraldsim
