#include <random>

#include <gtest/gtest.h>

#include "morphmap/map_analysis.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace morphmap;

namespace {

std::vector<std::vector<double>> cells_of(const MapMatrix& m) {
  std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 1; r <= m.rows(); ++r) {
    for (std::size_t c = 1; c <= m.cols(); ++c) out[r - 1][c - 1] = m.at(r, c);
  }
  return out;
}

std::vector<AttackOutcome> to_outcomes(const std::vector<oracle::Outcome>& morphs, std::size_t r_max) {
  std::vector<AttackOutcome> out;
  for (std::size_t i = 0; i < morphs.size(); ++i) out.push_back({static_cast<std::uint32_t>(i), 0, r_max, morphs[i]});
  return out;
}

// Score sets for `n_pairs` pairs (subjects 2p, 2p+1), one variant each, with
// `probes` probe scores per subject drawn from `scores`.
std::vector<ScoreSet> synthetic_sets(std::size_t n_frs, std::size_t n_pairs, std::size_t probes, std::mt19937_64& rng,
                                     std::vector<MorphPair>& pairs) {
  std::uniform_real_distribution<double> u(-0.2, 0.8);
  pairs.clear();
  for (std::uint32_t p = 0; p < n_pairs; ++p) pairs.push_back({2 * p, 2 * p + 1, 0, 0, 0.0});
  std::vector<ScoreSet> sets;
  for (std::size_t f = 0; f < n_frs; ++f) {
    ScoreSet s{"frs" + std::to_string(f), ScoreKind::Morph, {}};
    for (std::uint32_t p = 0; p < n_pairs; ++p) {
      for (std::uint32_t subject : {2 * p, 2 * p + 1}) {
        for (std::uint32_t k = 0; k < probes; ++k) s.scores.push_back({{p, 0, subject, 10 + k}, u(rng)});
      }
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

}  // namespace

TEST(MapMatrix, HandEnumeratedFixture) {
  // Morph A matches twice for both subjects on both recognizers. Morph B
  // matches once per subject on recognizer 1 and never for subject A on 2.
  const std::vector<oracle::Outcome> morphs = {{{2, 2}, {2, 2}}, {{1, 1}, {0, 1}}};
  const auto m = map_matrix(to_outcomes(morphs, 2), 2, 2);
  EXPECT_EQ(cells_of(m), (std::vector<std::vector<double>>{{1.0, 0.5}, {0.5, 0.5}}));
  EXPECT_EQ(cells_of(m), oracle::naive_map(morphs, 2, 2));
}

TEST(MapMatrix, AllOrNothing) {
  const auto all = map_matrix(to_outcomes({{{3, 3}, {3, 3}, {3, 3}}}, 3), 3, 3);
  for (double v : all.cells()) EXPECT_EQ(v, 1.0);
  const auto none = map_matrix(to_outcomes({{{0, 3}, {3, 0}, {0, 0}}, {{0, 0}, {0, 0}, {0, 0}}}, 3), 3, 3);
  for (double v : none.cells()) EXPECT_EQ(v, 0.0);
}

TEST(MapMatrix, MatchesNaiveOracleOnRandomInstances) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n_morphs = 1 + rng() % 5;
    const std::size_t n_frs = 1 + rng() % 3;
    const std::size_t r_max = 1 + rng() % 3;
    std::vector<oracle::Outcome> morphs(n_morphs);
    for (auto& m : morphs) {
      for (std::size_t f = 0; f < n_frs; ++f) m.emplace_back(rng() % (r_max + 1), rng() % (r_max + 1));
    }
    const auto got = map_matrix(to_outcomes(morphs, r_max), r_max, n_frs);
    ASSERT_EQ(cells_of(got), oracle::naive_map(morphs, r_max, n_frs)) << "trial " << trial;
    EXPECT_EQ(got.monotonicity_violations(), 0u);
    for (double v : got.cells()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, got.at(1, 1));
    }
  }
}

TEST(MapMatrix, Errors) {
  expect_code(ErrorCode::EmptyOutcomes, [] { map_matrix({}, 1, 1); });
  const auto outcomes = to_outcomes({{{1, 1}, {1, 1}}}, 2);
  expect_code(ErrorCode::InvalidArgument, [&] { map_matrix(outcomes, 1, 3); });
  expect_code(ErrorCode::InvalidArgument, [&] { map_matrix(outcomes, 3, 1); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_variant_aggregation("max"); });
}

TEST(MapMatrix, BestVariantAggregation) {
  std::vector<AttackOutcome> outcomes = {
      {0, 0, 1, {{0, 1}}},
      {0, 1, 1, {{1, 1}}},
      {1, 0, 1, {{0, 0}}},
      {1, 1, 1, {{0, 1}}},
  };
  EXPECT_DOUBLE_EQ(map_matrix(outcomes, 1, 1, VariantAggregation::None).at(1, 1), 0.25);
  const auto best = map_matrix(outcomes, 1, 1, VariantAggregation::Best);
  EXPECT_DOUBLE_EQ(best.at(1, 1), 0.5);
  EXPECT_EQ(best.n_morphs(), 2u);
}

TEST(AttackOutcomes, ThresholdExtremes) {
  std::mt19937_64 rng(3);
  std::vector<MorphPair> pairs;
  const auto sets = synthetic_sets(2, 4, 3, rng, pairs);
  for (const auto& o : attack_outcomes(sets, {-2.0, -2.0}, pairs, 3)) {
    for (const auto& [a, b] : o.matched) {
      EXPECT_EQ(a, 3u);
      EXPECT_EQ(b, 3u);
    }
  }
  for (const auto& o : attack_outcomes(sets, {2.0, 2.0}, pairs, 3)) {
    for (const auto& [a, b] : o.matched) {
      EXPECT_EQ(a, 0u);
      EXPECT_EQ(b, 0u);
    }
  }
}

TEST(AttackOutcomes, MatchesEnumerationAndUsesFirstProbes) {
  std::mt19937_64 rng(4);
  std::vector<MorphPair> pairs;
  const auto sets = synthetic_sets(3, 5, 4, rng, pairs);
  const std::vector<double> thresholds = {0.1, 0.3, 0.5};
  const auto outcomes = attack_outcomes(sets, thresholds, pairs, 3);
  ASSERT_EQ(outcomes.size(), 5u);
  for (const auto& o : outcomes) {
    for (std::size_t f = 0; f < 3; ++f) {
      std::size_t ma = 0, mb = 0;
      for (const auto& s : sets[f].scores) {
        if (s.key.source != o.pair_id || s.key.probe_sample >= 13) continue;
        if (s.similarity < thresholds[f]) continue;
        (s.key.probe_subject == pairs[o.pair_id].subject_a ? ma : mb) += 1;
      }
      EXPECT_EQ(o.matched[f], std::pair(ma, mb));
    }
  }
  expect_code(ErrorCode::InsufficientProbes, [&] { attack_outcomes(sets, thresholds, pairs, 5); });
  expect_code(ErrorCode::InvalidArgument, [&] { attack_outcomes(sets, {0.1}, pairs, 3); });
}

TEST(AttackOutcomes, RaisingOneThresholdNeverIncreasesMap) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.2, 0.8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MorphPair> pairs;
    const auto sets = synthetic_sets(3, 5, 3, rng, pairs);
    std::vector<double> thresholds = {u(rng), u(rng), u(rng)};
    const auto before = map_matrix(attack_outcomes(sets, thresholds, pairs, 3), 3, 3);
    thresholds[trial % 3] += 0.1;
    const auto after = map_matrix(attack_outcomes(sets, thresholds, pairs, 3), 3, 3);
    for (std::size_t i = 0; i < before.cells().size(); ++i) EXPECT_LE(after.cells()[i], before.cells()[i]);
  }
}

TEST(MapUnderSweep, TraceIsNonIncreasingAndEndsAtZero) {
  std::mt19937_64 rng(6);
  std::vector<MorphPair> pairs;
  const auto sets = synthetic_sets(2, 6, 3, rng, pairs);
  ThresholdSweep sweep;
  for (int i = 0; i <= 10; ++i) {
    SweepStep step;
    step.offset = -1.0 + 0.2 * i;
    step.thresholds = {-0.3 + 0.12 * i, -0.3 + 0.12 * i};
    sweep.steps.push_back(step);
  }
  const auto trace = map_under_sweep(sets, pairs, sweep, 3, 3, 2, 3, 2);
  ASSERT_EQ(trace.size(), 11u);
  EXPECT_EQ(trace.front().value, 1.0);
  EXPECT_EQ(trace.back().value, 0.0);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i].value, trace[i - 1].value);
  expect_code(ErrorCode::InvalidArgument, [&] { map_under_sweep(sets, pairs, sweep, 3, 3, 2, 4, 2); });
}

TEST(MapOutput, CsvLayout) {
  const auto m = map_matrix(to_outcomes({{{2, 2}, {2, 2}}, {{1, 1}, {0, 1}}}, 2), 2, 2);
  EXPECT_EQ(map_to_csv(m), "attempts,frs_1,frs_2\n1,1,0.5\n2,0.5,0.5\n");
}
