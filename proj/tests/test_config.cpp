#include <filesystem>

#include <gtest/gtest.h>

#include "morphmap/config.hpp"
#include "test_support.hpp"

using namespace morphmap;

TEST(ConfigTable, ScalarsArraysAndTables) {
  const auto t = parse_config_table(R"(
top = 3
name = "a # not a comment"   # trailing comment
[sec]
x = -1.5e-3
big = 1_000
flag = true
list = [1, 2.5, "s"]
nested = [[1, 2], []]
)");
  EXPECT_EQ(std::get<std::int64_t>(t.at("top").value), 3);
  EXPECT_EQ(std::get<std::string>(t.at("name").value), "a # not a comment");
  EXPECT_DOUBLE_EQ(std::get<double>(t.at("sec.x").value), -1.5e-3);
  EXPECT_EQ(std::get<std::int64_t>(t.at("sec.big").value), 1000);
  EXPECT_TRUE(std::get<bool>(t.at("sec.flag").value));
  const auto& list = std::get<ConfigValue::Array>(t.at("sec.list").value);
  ASSERT_EQ(list.size(), 3u);
  EXPECT_EQ(std::get<std::string>(list[2].value), "s");
  EXPECT_EQ(std::get<ConfigValue::Array>(t.at("sec.nested").value).size(), 2u);
}

TEST(ConfigTable, SyntaxErrors) {
  expect_code(ErrorCode::InvalidConfig, [] { parse_config_table("x = "); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_config_table("x = \"open"); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_config_table("[sec\nx = 1"); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_config_table("x = 1\nx = 2"); });
}

TEST(ExperimentConfig, EmptyTextGivesDefaults) {
  const auto cfg = parse_experiment_config("");
  EXPECT_EQ(cfg.cohort.n_subjects, 325u);
  EXPECT_EQ(cfg.cohort.refs_per_subject, 4u);
  EXPECT_EQ(cfg.cohort.probes_per_subject, 3u);
  EXPECT_EQ(cfg.ensemble.names.size(), 4u);
  EXPECT_EQ(cfg.pairing.n_pairs, 300u);
  EXPECT_DOUBLE_EQ(cfg.calibration.target_fmr, 0.001);
  EXPECT_EQ(cfg.map_cols(), 4u);
  EXPECT_EQ(cfg.sweep_col(), 4u);
  EXPECT_EQ(cfg.sweep.steps, 11u);
  EXPECT_EQ(cfg.variants.n_variants, 100u);
  EXPECT_EQ(cfg.cohort.master_seed, cfg.seed);
}

TEST(ExperimentConfig, CheckedInDefaultMatchesBuiltIn) {
  const auto file = load_experiment_config(std::filesystem::path(MORPHMAP_FIXTURE_DIR) / ".." / ".." / "configs" / "default.toml");
  const ExperimentConfig built_in = parse_experiment_config("");
  EXPECT_EQ(file.seed, built_in.seed);
  EXPECT_EQ(file.cohort.n_subjects, built_in.cohort.n_subjects);
  EXPECT_EQ(file.cohort.reference_noise_sigma, built_in.cohort.reference_noise_sigma);
  EXPECT_EQ(file.ensemble.sample_noise_sigmas, built_in.ensemble.sample_noise_sigmas);
  EXPECT_EQ(file.ensemble.recon_noise_sigma, built_in.ensemble.recon_noise_sigma);
  EXPECT_EQ(file.calibration.nonmated_cap, built_in.calibration.nonmated_cap);
  EXPECT_EQ(file.map_cols(), 4u);
  EXPECT_EQ(file.sweep.map_row, 3u);
}

TEST(ExperimentConfig, OverridesAndParsedEnums) {
  const auto cfg = parse_experiment_config(R"(
seed = 7
output_dir = "out/x"
[map]
attempts = 2
frs_count = 3
aggregate_variants = "best"
[sweep]
map_row = 2
[variants]
objective = "frs:2"
correlation = "spearman"
attack_score = "min-of-min"
)");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.cohort.master_seed, 7u);
  EXPECT_EQ(cfg.output_dir, "out/x");
  EXPECT_EQ(cfg.map.aggregation, VariantAggregation::Best);
  EXPECT_EQ(cfg.sweep_col(), 3u);
  EXPECT_EQ(cfg.variants.objective.kind, Objective::Kind::SingleFrs);
  EXPECT_EQ(cfg.variants.objective.frs_index, 2u);
  EXPECT_EQ(cfg.variants.correlation, CorrelationMethod::Spearman);
  EXPECT_EQ(cfg.variants.attack_score, AttackScoreMode::MinOfMin);
}

TEST(ExperimentConfig, RejectsBadValues) {
  expect_code(ErrorCode::InvalidConfig, [] { parse_experiment_config("unknown_key = 1"); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_experiment_config("[cohort]\nn_subject = 3"); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_experiment_config("[calibration]\ntarget_fmr = 1.5"); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_experiment_config("[map]\nattempts = 4"); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_experiment_config("[map]\nfrs_count = 5"); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_experiment_config("[cohort]\nn_subjects = \"many\""); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_experiment_config("[cohort]\nn_subjects = -3"); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_experiment_config("[ensemble]\nnames = [\"a\"]"); });
  expect_code(ErrorCode::InvalidConfig, [] { parse_experiment_config("[variants]\nobjective = \"frs:9\""); });
  expect_code(ErrorCode::InvalidConfig, [] { load_experiment_config("/nonexistent/config.toml"); });
}
