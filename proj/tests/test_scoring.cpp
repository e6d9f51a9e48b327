#include <random>
#include <set>

#include <gtest/gtest.h>

#include "morphmap/scoring.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace morphmap;

namespace {

// Subjects 0..n-1, `refs` references and `probes` probes each, random unit vectors.
TemplateStore random_cohort(std::uint32_t n, std::uint32_t refs, std::uint32_t probes, std::uint32_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TemplateStore s{"score", dim, {}};
  for (std::uint32_t subject = 0; subject < n; ++subject) {
    for (std::uint32_t k = 0; k < refs; ++k) s.records.push_back(make_record(subject, k, Role::Reference, Template(oracle::random_unit(rng, dim))));
    for (std::uint32_t k = 0; k < probes; ++k) s.records.push_back(make_record(subject, refs + k, Role::Probe, Template(oracle::random_unit(rng, dim))));
  }
  return s;
}

std::vector<double> as_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(Scores, SmallCohortCounts) {
  const auto store = random_cohort(2, 2, 3, 8, 1);
  EXPECT_EQ(mated_scores(store).size(), 12u);
  EXPECT_EQ(nonmated_scores(store).size(), 12u);
  EXPECT_EQ(nonmated_scores(store, 5, 7).size(), 5u);
}

TEST(Scores, SpecExampleCounts) {
  // 2 subjects, 1 reference and 3 probes each.
  const auto store = random_cohort(2, 1, 3, 8, 2);
  EXPECT_EQ(mated_scores(store).size(), 6u);
  EXPECT_EQ(nonmated_scores(store).size(), 6u);
  EXPECT_EQ(nonmated_scores(store, 1, 3).size(), 1u);
}

TEST(Scores, IdenticalProbeScoresOne) {
  TemplateStore s{"x", 3, {}};
  s.records.push_back(make_record(0, 0, Role::Reference, Template{0.6, 0.8, 0.0}));
  s.records.push_back(make_record(0, 1, Role::Probe, Template{0.6, 0.8, 0.0}));
  s.records.push_back(make_record(1, 0, Role::Probe, Template{0.0, 0.0, 1.0}));
  const auto mated = mated_scores(s);
  ASSERT_EQ(mated.size(), 1u);
  EXPECT_NEAR(mated.scores[0].similarity, 1.0, 1e-7);
  const auto non = nonmated_scores(s);
  ASSERT_EQ(non.size(), 1u);
  EXPECT_EQ(non.scores[0].key, (ScoreKey{0, 0, 1, 0}));
  EXPECT_DOUBLE_EQ(non.scores[0].similarity, 0.0);
}

TEST(Scores, ValuesMatchOracleAndPartitionIsExact) {
  const auto store = random_cohort(7, 2, 3, 16, 3);
  const auto mated = mated_scores(store);
  const auto non = nonmated_scores(store);

  std::set<ScoreKey> seen;
  std::size_t expected_mated = 0, expected_non = 0;
  for (const auto& r : store.records) {
    if (r.role != Role::Reference) continue;
    for (const auto& p : store.records) {
      if (p.role != Role::Probe) continue;
      (r.subject_id == p.subject_id ? expected_mated : expected_non) += 1;
    }
  }
  EXPECT_EQ(mated.size(), expected_mated);
  EXPECT_EQ(non.size(), expected_non);

  auto lookup = [&](std::uint32_t subject, std::uint32_t sample, Role role) {
    for (const auto& r : store.records) {
      if (r.subject_id == subject && r.sample_id == sample && r.role == role) return as_double(r.vector);
    }
    throw std::runtime_error("missing record");
  };
  for (const auto* set : {&mated, &non}) {
    for (const auto& s : set->scores) {
      EXPECT_TRUE(seen.insert(s.key).second);
      EXPECT_EQ(s.key.source == s.key.probe_subject, set == &mated);
      const double expected = oracle::cosine(lookup(s.key.source, s.key.source_sample, Role::Reference),
                                             lookup(s.key.probe_subject, s.key.probe_sample, Role::Probe));
      EXPECT_NEAR(s.similarity, expected, 1e-12);
    }
  }
  EXPECT_TRUE(std::is_sorted(non.scores.begin(), non.scores.end(), [](const auto& a, const auto& b) { return a.key < b.key; }));
}

TEST(Scores, SubsampleIsDeterministicSubset) {
  const auto store = random_cohort(10, 2, 3, 8, 4);
  const auto full = nonmated_scores(store);
  const auto a = nonmated_scores(store, 50, 99);
  const auto b = nonmated_scores(store, 50, 99);
  const auto c = nonmated_scores(store, 50, 100);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_NE(a.scores, c.scores);
  std::set<ScoreKey> all;
  for (const auto& s : full.scores) all.insert(s.key);
  std::set<ScoreKey> picked;
  for (const auto& s : a.scores) {
    EXPECT_TRUE(all.contains(s.key));
    picked.insert(s.key);
  }
  EXPECT_EQ(picked.size(), 50u);
  expect_code(ErrorCode::InvalidArgument, [&] { nonmated_scores(store, 0, 1); });
}

TEST(Scores, MorphScoresCoverBothContributors) {
  const auto probes = random_cohort(4, 1, 3, 8, 5);
  const std::vector<MorphPair> pairs = {{0, 2, 0, 0, 0.3}, {1, 3, 0, 0, 0.2}};
  std::mt19937_64 rng(6);
  TemplateStore morphs{"score", 8, {}};
  for (std::uint32_t p = 0; p < 2; ++p) {
    for (std::uint32_t v = 0; v < 2; ++v) morphs.records.push_back(make_record(p, v, Role::MorphVariant, Template(oracle::random_unit(rng, 8))));
  }
  const auto set = morph_scores(morphs, pairs, probes);
  EXPECT_EQ(set.kind, ScoreKind::Morph);
  ASSERT_EQ(set.size(), 2u * 2u * 6u);
  for (const auto& s : set.scores) {
    const auto& pair = pairs[s.key.source];
    EXPECT_TRUE(s.key.probe_subject == pair.subject_a || s.key.probe_subject == pair.subject_b);
  }

  const std::vector<MorphPair> missing = {{0, 9, 0, 0, 0.3}, {1, 3, 0, 0, 0.2}};
  expect_code(ErrorCode::MissingProbes, [&] { morph_scores(morphs, missing, probes); });
}

TEST(Scores, EmptyInputs) {
  TemplateStore only_refs{"x", 2, {}};
  only_refs.records.push_back(make_record(0, 0, Role::Reference, Template{1.0, 0.0}));
  expect_code(ErrorCode::EmptyStore, [&] { mated_scores(only_refs); });
  expect_code(ErrorCode::EmptyStore, [&] { nonmated_scores(only_refs); });
  expect_code(ErrorCode::EmptyScores, [] { ScoreSet{}.mean(); });
}

TEST(Scores, HistogramBins) {
  ScoreSet set{"x", ScoreKind::Mated, {{{}, -1.0}, {{}, 0.0}, {{}, 0.004}, {{}, 1.0}}};
  const auto h = histogram(set);
  EXPECT_EQ(h[0], 1u);
  EXPECT_EQ(h[100], 2u);
  EXPECT_EQ(h[199], 1u);
}
