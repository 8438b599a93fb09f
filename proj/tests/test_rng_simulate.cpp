#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "cutbias/rng.hpp"
#include "cutbias/simulate.hpp"
#include "doctest.h"

using namespace cutbias;

TEST_CASE("seed derivation is deterministic and separates streams") {
  const SeedSpec a{42, 7};
  CHECK(a.child(3) == a.child(3));
  CHECK(a.state() == SeedSpec{42, 7}.state());
  CHECK(a.child(3).state() != a.child(4).state());
  CHECK(SeedSpec{42, 7}.state() != SeedSpec{42, 8}.state());
  CHECK(SeedSpec{42, 7}.state() != SeedSpec{43, 7}.state());
  // Children of distinct parents stay distinct.
  CHECK(SeedSpec{1, 0}.child(0).state() != SeedSpec{2, 0}.child(0).state());
}

TEST_CASE("rng streams replay exactly") {
  RngStream a{SeedSpec{9, 1}};
  RngStream b{SeedSpec{9, 1}};
  for (int i = 0; i < 1000; ++i) CHECK(a.uniform01() == b.uniform01());
  RngStream c{SeedSpec{9, 2}};
  int differs = 0;
  RngStream a2{SeedSpec{9, 1}};
  for (int i = 0; i < 100; ++i) differs += a2.uniform01() != c.uniform01();
  CHECK(differs > 90);
}

TEST_CASE("uniform01 stays in range with a sane mean") {
  RngStream rng{SeedSpec{11, 0}};
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("bernoulli matches its probability") {
  RngStream rng{SeedSpec{12, 0}};
  int hits = 0;
  for (int i = 0; i < 100000; ++i) hits += rng.bernoulli(0.3);
  CHECK(hits / 100000.0 == doctest::Approx(0.3).epsilon(0.02));
  RngStream degenerate{SeedSpec{12, 1}};
  for (int i = 0; i < 100; ++i) CHECK_FALSE(degenerate.bernoulli(0.0));
}

TEST_CASE("normal has standard moments") {
  RngStream rng{SeedSpec{13, 0}};
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(sumsq / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform_below respects its bound and covers residues") {
  RngStream rng{SeedSpec{14, 0}};
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t v = rng.uniform_below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("generate_trial fixed allocation lays out control then experimental") {
  const auto coef = EffectSetting::more_or_less_1().coefficients;
  const TrialData t = generate_trial(coef, 25, SeedSpec{77, 0});
  REQUIRE(t.size() == 50);
  CHECK(t.arm_size(0) == 25);
  CHECK(t.arm_size(1) == 25);
  for (int i = 0; i < 25; ++i) CHECK(t.arm[i] == 0);
  for (int i = 25; i < 50; ++i) CHECK(t.arm[i] == 1);
  for (const double x : t.biomarker) {
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  for (const auto y : t.response) CHECK(y <= 1);
}

TEST_CASE("generate_trial is a pure function of its seed") {
  const auto coef = EffectSetting::more_or_less_2().coefficients;
  const TrialData a = generate_trial(coef, 30, SeedSpec{5, 9});
  const TrialData b = generate_trial(coef, 30, SeedSpec{5, 9});
  CHECK(a == b);
  const TrialData c = generate_trial(coef, 30, SeedSpec{5, 10});
  CHECK_FALSE(a == c);
}

TEST_CASE("generate_trial consumes variates in subject order") {
  const ModelCoefficients coef{-0.4, 0.0, 0.2, 0.2};
  const SeedSpec seed{123, 4};

  SUBCASE("fixed equal: biomarker then response") {
    const TrialData t = generate_trial(coef, 10, seed, Allocation::FixedEqual);
    RngStream rng{seed};
    for (int i = 0; i < 20; ++i) {
      const int m = i < 10 ? 0 : 1;
      const double x = rng.uniform01();
      const bool y = rng.bernoulli(response_probability(coef, x, m));
      CHECK(t.biomarker[i] == x);
      CHECK(t.arm[i] == m);
      CHECK(t.response[i] == (y ? 1 : 0));
    }
  }

  SUBCASE("bernoulli half: biomarker, arm, response") {
    const TrialData t =
        generate_trial(coef, 10, seed, Allocation::BernoulliHalf);
    REQUIRE(t.size() == 20);
    RngStream rng{seed};
    for (int i = 0; i < 20; ++i) {
      const double x = rng.uniform01();
      const int m = rng.bernoulli(0.5) ? 1 : 0;
      const bool y = rng.bernoulli(response_probability(coef, x, m));
      CHECK(t.biomarker[i] == x);
      CHECK(t.arm[i] == m);
      CHECK(t.response[i] == (y ? 1 : 0));
    }
  }
}

TEST_CASE("bernoulli-half allocation balances arms on average") {
  const auto coef = EffectSetting::more_or_less_1().coefficients;
  const TrialData t =
      generate_trial(coef, 5000, SeedSpec{31, 0}, Allocation::BernoulliHalf);
  REQUIRE(t.size() == 10000);
  CHECK(t.arm_size(1) > 4750);
  CHECK(t.arm_size(1) < 5250);
}

TEST_CASE("control arm response rate tracks expit(beta0) when beta1 is zero") {
  const auto coef = EffectSetting::more_or_less_1().coefficients;
  const TrialData t = generate_trial(coef, 50000, SeedSpec{99, 0});
  int hits = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t.arm[i] == 0) hits += t.response[i];
  CHECK(hits / 50000.0 == doctest::Approx(expit(-0.4)).epsilon(0.02));
}

TEST_CASE("generate_trial rejects a non-positive arm size") {
  const auto coef = EffectSetting::more_or_less_1().coefficients;
  CHECK_THROWS_AS((void)generate_trial(coef, 0, SeedSpec{1, 0}),
                  std::invalid_argument);
}
