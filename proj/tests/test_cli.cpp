#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "morphmap/csv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSmallConfig = fs::path(MORPHMAP_FIXTURE_DIR) / "small.toml";

int run(const std::string& args) {
  const std::string cmd = std::string(MORPHMAP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("morphmap_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(dir);
  return dir;
}

// Subset of JSON Schema used by docs/report.schema.json.
void validate(const json& schema, const json& value, const std::string& path, std::vector<std::string>& errors) {
  auto fail = [&](const std::string& what) { errors.push_back(path + ": " + what); };
  if (schema.contains("const") && value != schema["const"]) fail("const mismatch");
  if (schema.contains("type")) {
    const std::string t = schema["type"];
    const bool ok = (t == "object" && value.is_object()) || (t == "array" && value.is_array()) ||
                    (t == "string" && value.is_string()) || (t == "number" && value.is_number()) ||
                    (t == "integer" && value.is_number_integer()) || (t == "boolean" && value.is_boolean());
    if (!ok) {
      fail("expected " + t);
      return;
    }
  }
  if (value.is_number()) {
    if (schema.contains("minimum") && value.get<double>() < schema["minimum"].get<double>()) fail("below minimum");
    if (schema.contains("maximum") && value.get<double>() > schema["maximum"].get<double>()) fail("above maximum");
  }
  if (value.is_object()) {
    for (const auto& key : schema.value("required", json::array())) {
      if (!value.contains(key.get<std::string>())) fail("missing " + key.get<std::string>());
    }
    const auto props = schema.value("properties", json::object());
    for (const auto& [key, v] : value.items()) {
      if (props.contains(key)) {
        validate(props[key], v, path + "." + key, errors);
      } else if (schema.contains("additionalProperties") && !schema["additionalProperties"].get<bool>()) {
        fail("unexpected property " + key);
      }
    }
  }
  if (value.is_array()) {
    if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>()) fail("too few items");
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < value.size(); ++i) validate(schema["items"], value[i], path + "[" + std::to_string(i) + "]", errors);
    }
  }
}

class SmallRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fresh_dir("small");
    status_ = run("run-all -c " + kSmallConfig.string() + " -o " + dir_.string());
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static inline fs::path dir_;
  static inline int status_ = -1;
};

}  // namespace

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("map --help"), 0);
  EXPECT_EQ(run("variants --help"), 0);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("map"), 1);
}

TEST(Cli, MissingConfigExitsOneWithoutOutputs) {
  const auto dir = fresh_dir("missing");
  EXPECT_EQ(run("map -c " + (dir / "nope.toml").string() + " -o " + dir.string()), 1);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Cli, InvalidConfigExitsOne) {
  const auto dir = fresh_dir("invalid");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.toml") << "[cohort]\nn_subjectz = 3\n";
  EXPECT_EQ(run("gen-cohort -c " + (dir / "bad.toml").string() + " -o " + (dir / "out").string()), 1);
  EXPECT_FALSE(fs::exists(dir / "out"));
  fs::remove_all(dir);
}

TEST(Cli, MissingArtifactsExitTwo) {
  const auto dir = fresh_dir("empty");
  fs::create_directories(dir);
  EXPECT_EQ(run("report -d " + dir.string()), 2);
  EXPECT_EQ(run("map -c " + kSmallConfig.string() + " -o " + dir.string()), 2);
  fs::remove_all(dir);
}

TEST_F(SmallRun, ProducesMapWithConfiguredShape) {
  ASSERT_EQ(status_, 0);
  const auto table = morphmap::csv::read(dir_ / "map_matrix.csv");
  EXPECT_EQ(table.header, (std::vector<std::string>{"attempts", "frs_1", "frs_2", "frs_3", "frs_4"}));
  ASSERT_EQ(table.rows.size(), 3u);
  for (const auto& file : {"cohort_latent.btsf", "pairs.csv", "operating_points.csv", "map_matrix.txt", "sweep.csv",
                           "variant_study.csv", "resample_trace.csv", "correlation.csv", "report.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / file)) << file;
  }
}

TEST_F(SmallRun, ReportMatchesSchema) {
  ASSERT_EQ(status_, 0);
  const auto schema = json::parse(slurp(MORPHMAP_SCHEMA_PATH));
  const auto report = json::parse(slurp(dir_ / "report.json"));
  std::vector<std::string> errors;
  validate(schema, report, "$", errors);
  for (const auto& e : errors) ADD_FAILURE() << e;
  EXPECT_EQ(report["map_matrix"]["rows"], 3);
  EXPECT_EQ(report["map_matrix"]["cols"], 4);
  EXPECT_EQ(report["sweep"]["steps"].size(), 11u);
  EXPECT_EQ(report["variant_study"]["n_variants"], 30);
}

TEST_F(SmallRun, RerunIsByteIdenticalAcrossThreadCounts) {
  ASSERT_EQ(status_, 0);
  const auto again = fresh_dir("again");
  ASSERT_EQ(run("--threads 1 run-all -c " + kSmallConfig.string() + " -o " + again.string()), 0);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    const auto name = entry.path().filename();
    ASSERT_TRUE(fs::exists(again / name)) << name;
    EXPECT_EQ(slurp(entry.path()), slurp(again / name)) << name;
    ++compared;
  }
  EXPECT_GT(compared, 10u);
  fs::remove_all(again);
}

TEST_F(SmallRun, StagesRerunFromArtifacts) {
  ASSERT_EQ(status_, 0);
  const auto before = slurp(dir_ / "map_matrix.csv");
  EXPECT_EQ(run("map -c " + kSmallConfig.string() + " -o " + dir_.string()), 0);
  EXPECT_EQ(slurp(dir_ / "map_matrix.csv"), before);
  const auto report_before = slurp(dir_ / "report.json");
  EXPECT_EQ(run("report -d " + dir_.string()), 0);
  EXPECT_EQ(slurp(dir_ / "report.json"), report_before);
}
