#include <gtest/gtest.h>

#include <cmath>

#include "irislab/synth.hpp"
#include "irislab/validation.hpp"

using namespace irislab;

TEST(Validation, FirstFalseMatchProbCorners) {
  for (std::size_t n : {1, 2, 100, 1400})
    for (double g : {0.0, 0.5, 1.0}) EXPECT_EQ(first_false_match_prob({n, 0.0, g}), 0.0);
  EXPECT_EQ(first_false_match_prob({1, 0.3, 1.0}), 0.0);
  EXPECT_DOUBLE_EQ(first_false_match_prob({2, 1.0, 1.0}), 0.5);
  EXPECT_DOUBLE_EQ(first_false_match_prob({2, 1.0, 0.0}), 1.0);
  EXPECT_THROW(first_false_match_prob({0, 0.1, 1.0}), ContractViolation);
  EXPECT_THROW(first_false_match_prob({10, 1.1, 1.0}), ContractViolation);
}

TEST(Validation, FirstFalseMatchProbClosedForm) {
  // Geometric sum: mean over M of 1-(1-q)^M is 1 - (1-(1-q)^n)/(n q).
  for (std::size_t n : {3, 50, 1400})
    for (double q : {1e-5, 1e-3, 0.05}) {
      const double mate_first = 1.0 - (1.0 - std::pow(1.0 - q, static_cast<double>(n))) / (static_cast<double>(n) * q);
      const double miss_all = 1.0 - std::pow(1.0 - q, static_cast<double>(n - 1));
      for (double g : {0.0, 0.7, 1.0}) {
        const double expected = g * mate_first + (1 - g) * miss_all;
        EXPECT_NEAR(first_false_match_prob({n, q, g}), expected, 1e-6 * expected);
      }
    }
}

TEST(ValidationProperty, FirstFalseMatchProbMonotone) {
  const double qs[] = {0.0, 1e-5, 1e-4, 1e-3, 0.01, 0.1, 0.5, 1.0};
  const std::size_t ns[] = {1, 2, 10, 100, 1400};
  const double gs[] = {0.0, 0.25, 0.5, 0.9, 1.0};
  for (std::size_t n : ns)
    for (double g : gs)
      for (std::size_t i = 1; i < std::size(qs); ++i)
        EXPECT_LE(first_false_match_prob({n, qs[i - 1], g}), first_false_match_prob({n, qs[i], g}) + 1e-15);
  for (double q : qs)
    for (double g : gs)
      for (std::size_t i = 1; i < std::size(ns); ++i)
        EXPECT_LE(first_false_match_prob({ns[i - 1], q, g}), first_false_match_prob({ns[i], q, g}) + 1e-15);
  // A weaker mate exposes more impostors.
  for (std::size_t n : ns)
    for (double q : qs)
      for (std::size_t i = 1; i < std::size(gs); ++i)
        EXPECT_GE(first_false_match_prob({n, q, gs[i - 1]}), first_false_match_prob({n, q, gs[i]}) - 1e-15);
}

TEST(ValidationProperty, ModelMatchesIndependentScanSimulation) {
  // Direct simulation of the model's own assumptions.
  const ScanModel m{60, 0.004, 0.9};
  Rng rng = make_stream(1, 0);
  const int runs = 200000;
  int false_matches = 0;
  for (int i = 0; i < runs; ++i) {
    const auto mate = uniform_below(rng, m.n);
    for (std::size_t pos = 0; pos < m.n; ++pos) {
      if (pos == mate) {
        if (bernoulli(rng, m.g)) break;
        continue;
      }
      if (bernoulli(rng, m.q)) {
        ++false_matches;
        break;
      }
    }
  }
  EXPECT_NEAR(static_cast<double>(false_matches) / runs, first_false_match_prob(m), 0.003);
}

TEST(Validation, NaiveSelfMatch) {
  Rng rng = make_stream(2, 0);
  const IrisTemplate a = random_template(20, 240, rng);
  const MatchScore s = naive_best_of_m(a, a, ShiftRange{3});
  EXPECT_EQ(*s.value(), 0.0);
  EXPECT_EQ(s.best_shift, 0);
}

TEST(Validation, ExhaustiveOneByEightOracle) {
  const int ranges[] = {0, 1, 2};
  const OracleReport rep = oracle_exhaustive_1x8(ranges);
  EXPECT_EQ(rep.cases, 3u * 256 * 256);
  EXPECT_EQ(rep.mismatches, 0u) << rep.first_mismatch;
}

TEST(Validation, RandomPairOracle) {
  const OracleReport rep = oracle_random_pairs(100, 20, 240, ShiftRange{14}, 3);
  EXPECT_EQ(rep.cases, 100u);
  EXPECT_TRUE(rep.ok()) << rep.first_mismatch;
}

TEST(Validation, RandomizedTrialsExerciseBothDecisions) {
  const TrialReport rep = randomized_equivalence_trials(3000, 4);
  EXPECT_TRUE(rep.ok()) << rep.first_violation;
  EXPECT_EQ(rep.trials, 3000u);
  EXPECT_GT(rep.matches, 500u);
  EXPECT_GT(rep.non_matches, 500u);
  EXPECT_GT(rep.identity_divergences, 0u);
}

TEST(Validation, EquivalenceOnPopulation) {
  SynthParams p;
  p.n_identities = 80;
  p.probes_per_identity = 2;
  const Population pop = generate_population(p);
  for (int s : {0, 5}) {
    const EquivalenceReport rep = decision_equivalence_check(pop.gallery, pop.probes, SearchParams{0.32, ShiftRange{s}}, 1);
    EXPECT_TRUE(rep.ok());
    EXPECT_EQ(rep.mean_comparisons_1n, 80.0);
    EXPECT_GT(rep.matched, 100u);
    const double frac = rep.mean_comparisons_1first_matched / 80.0;
    EXPECT_GT(frac, 0.3);
    EXPECT_LT(frac, 0.7);
  }
}

TEST(Validation, ScanModelEstimate) {
  SynthParams p;
  p.n_identities = 50;
  p.probes_per_identity = 2;
  p.block_rows = 10;
  p.block_cols = 24;
  const Population pop = generate_population(p);
  const ScanModel loose = estimate_scan_model(pop.gallery, pop.probes, 0.45, ShiftRange{5});
  const ScanModel tight = estimate_scan_model(pop.gallery, pop.probes, 0.30, ShiftRange{5});
  EXPECT_EQ(loose.n, 50u);
  EXPECT_GE(loose.q, tight.q);
  EXPECT_GE(loose.g, tight.g);
  EXPECT_GT(loose.q, 0.0);
  EXPECT_GT(loose.g, 0.9);
}
