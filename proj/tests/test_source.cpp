#include <doctest.h>

#include <cmath>

#include "heraldsim/source.hpp"

using namespace heraldsim;

TEST_SUITE("source") {
  TEST_CASE("pair terms are normalized with n + 1 components") {
    for (int n = 0; n <= 4; ++n) {
      const SparseKet t = pair_term(n);
      CHECK(t.size() == static_cast<std::size_t>(n + 1));
      CHECK(t.norm2() == doctest::Approx(1.0));
      for (const auto& [occ, amp] : t.amplitudes()) CHECK(total_photons(occ) == 2 * n);
    }
  }

  TEST_CASE("single pair is the antisymmetric polarization state") {
    const SparseKet t = pair_term(1);
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(t.amplitude({1, 0, 0, 1}) - s) < 1e-15);
    CHECK(std::abs(t.amplitude({0, 1, 1, 0}) + s) < 1e-15);
    const SparseKet plus = pair_term(1, PairPhase::Plus);
    CHECK(std::abs(plus.amplitude({0, 1, 1, 0}) - s) < 1e-15);
  }

  TEST_CASE("photon cap") {
    CHECK_THROWS_AS(pair_term(5, PairPhase::Minus, 8), std::invalid_argument);
    CHECK_NOTHROW(pair_term(5, PairPhase::Minus, 10));
  }

  TEST_CASE("pair-number distribution") {
    double sum = 0.0;
    for (int n = 0; n < 400; ++n) sum += pair_probability(0.4, n);
    CHECK(sum == doctest::Approx(1.0));
    CHECK(pair_probability(0.3, 2) == doctest::Approx(std::pow(1 - 0.09, 2) * 3 * std::pow(0.3, 4)));
  }

  TEST_CASE("truncated state records the discarded weight") {
    SpdcParams p;
    p.tau = 0.3;
    p.max_pairs = 3;
    const SparseKet s = spdc_state(p);
    CHECK(s.norm2() == doctest::Approx(1.0));
    double kept = 0.0;
    for (int n = 0; n <= 3; ++n) kept += pair_probability(0.3, n);
    CHECK(s.truncation_weight() == doctest::Approx(1.0 - kept));
    CHECK(s.max_photons() == 6);
  }

  TEST_CASE("parameter validation") {
    SpdcParams p;
    p.tau = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.tau = 0.3;
    p.max_pairs = -1;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.max_pairs = 5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.max_pairs = 3;
    p.visibility = 1.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }

  TEST_CASE("visibility splits the two-pair block") {
    const VisibilityMixture m = apply_visibility(pair_term(2), 0.862);
    CHECK(m.coherent_weight == doctest::Approx(0.862));
    CHECK(m.distinguishable_weight == doctest::Approx(0.138));
    CHECK_THROWS_AS(apply_visibility(pair_term(2), -0.1), std::invalid_argument);
  }

  TEST_CASE("tau squared is linear in pump power") {
    const double low = scale_tau_with_power(0.2, 1.2, 0.62);
    CHECK(low * low / (0.2 * 0.2) == doctest::Approx(0.62 / 1.2));
    CHECK(scale_tau_with_power(0.2, 1.2, 1.2) == doctest::Approx(0.2));
  }
}
