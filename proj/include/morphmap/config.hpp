#pragma once

// Experiment configuration in a TOML subset: `[table]` headers, `key = value`
// lines, `#` comments, and values that are booleans, integers, floats,
// double-quoted strings or single-line arrays of those.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "morphmap/calibration.hpp"
#include "morphmap/error.hpp"
#include "morphmap/frs_simulator.hpp"
#include "morphmap/map_analysis.hpp"
#include "morphmap/scoring.hpp"
#include "morphmap/stochastic_variation.hpp"

namespace morphmap {

struct ConfigValue {
  using Array = std::vector<ConfigValue>;
  std::variant<bool, std::int64_t, double, std::string, Array> value;
  int line = 0;
};

using ConfigTable = std::map<std::string, ConfigValue>;  // dotted keys, e.g. "cohort.n_subjects"

namespace detail {

class ConfigParser {
 public:
  explicit ConfigParser(std::string_view text) : text_(text) {}

  ConfigTable parse() {
    ConfigTable table;
    std::string prefix;
    std::istringstream in{std::string(text_)};
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_;
      line_text_ = strip_comment(raw);
      pos_ = 0;
      skip_ws();
      if (at_end()) continue;
      if (peek() == '[') {
        ++pos_;
        const auto name = bare_key();
        expect(']');
        skip_ws();
        if (!at_end()) fail("unexpected text after table header");
        prefix = name + ".";
        continue;
      }
      const auto key = prefix + bare_key();
      skip_ws();
      expect('=');
      skip_ws();
      auto value = parse_value();
      skip_ws();
      if (!at_end()) fail("unexpected text after value");
      if (!table.emplace(key, std::move(value)).second) fail("duplicate key '" + key + "'");
    }
    return table;
  }

 private:
  static std::string strip_comment(const std::string& raw) {
    bool in_string = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"' && (i == 0 || raw[i - 1] != '\\')) in_string = !in_string;
      if (raw[i] == '#' && !in_string) return raw.substr(0, i);
    }
    return raw;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_) + ": " + what);
  }

  bool at_end() const { return pos_ >= line_text_.size(); }
  char peek() const { return at_end() ? '\0' : line_text_[pos_]; }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }
  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string bare_key() {
    skip_ws();
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-' ||
                         peek() == '.')) {
      ++pos_;
    }
    if (start == pos_) fail("expected a key");
    return line_text_.substr(start, pos_ - start);
  }

  ConfigValue parse_value() {
    ConfigValue v;
    v.line = line_;
    const char c = peek();
    if (c == '"') {
      v.value = parse_string();
    } else if (c == '[') {
      ++pos_;
      ConfigValue::Array items;
      skip_ws();
      if (peek() == ']') {
        ++pos_;
      } else {
        while (true) {
          skip_ws();
          items.push_back(parse_value());
          skip_ws();
          if (peek() == ',') {
            ++pos_;
            skip_ws();
            if (peek() == ']') {
              ++pos_;
              break;
            }
            continue;
          }
          expect(']');
          break;
        }
      }
      v.value = std::move(items);
    } else {
      const std::size_t start = pos_;
      while (!at_end() && peek() != ',' && peek() != ']' && !std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
      const std::string token = line_text_.substr(start, pos_ - start);
      if (token.empty()) fail("expected a value");
      if (token == "true" || token == "false") {
        v.value = token == "true";
      } else {
        std::string digits;
        for (char ch : token) {
          if (ch != '_') digits.push_back(ch);
        }
        const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
        try {
          if (is_float) {
            v.value = csv::parse_number<double>(digits);
          } else {
            v.value = csv::parse_number<std::int64_t>(digits.starts_with('+') ? digits.substr(1) : digits);
          }
        } catch (const Error&) {
          fail("invalid value '" + token + "'");
        }
      }
    }
    return v;
  }

  std::string parse_string() {
    ++pos_;  // opening quote
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated string");
      const char c = line_text_[pos_++];
      if (c == '"') break;
      if (c == '\\') {
        if (at_end()) fail("unterminated escape");
        const char e = line_text_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out.push_back(c);
      }
    }
    return out;
  }

  std::string_view text_;
  std::string line_text_;
  std::size_t pos_ = 0;
  int line_ = 0;
};

}  // namespace detail

inline ConfigTable parse_config_table(std::string_view text) { return detail::ConfigParser(text).parse(); }

struct PairingConfig {
  std::size_t n_pairs = 300;
  std::size_t max_uses_per_subject = 4;
  std::size_t selector_frs = 0;
};

struct CalibrationConfig {
  double target_fmr = 0.001;
  std::size_t nonmated_cap = kDefaultNonMatedCap;
};

struct MapConfig {
  std::size_t attempts = 3;   // R
  std::size_t frs_count = 0;  // C; 0 means the ensemble size
  std::size_t variants_per_pair = 1;
  VariantAggregation aggregation = VariantAggregation::None;
};

struct SweepConfig {
  std::size_t steps = 11;
  RelativeRange range{};
  std::size_t map_row = 3;
  std::size_t map_col = 0;  // 0 means the MAP column count
};

struct VariantConfig {
  std::size_t n_variants = 100;
  std::size_t pair_index = 0;
  Objective objective = Objective::min_across();
  CorrelationMethod correlation = CorrelationMethod::Pearson;
  AttackScoreMode attack_score = AttackScoreMode::MinOfMean;
};

struct ExperimentConfig {
  std::uint64_t seed = 20240917;
  std::filesystem::path output_dir = "morphmap_out";
  CohortConfig cohort;
  EnsembleConfig ensemble;
  PairingConfig pairing;
  CalibrationConfig calibration;
  MapConfig map;
  SweepConfig sweep;
  VariantConfig variants;

  std::size_t map_cols() const { return map.frs_count == 0 ? ensemble.names.size() : map.frs_count; }
  std::size_t sweep_col() const { return sweep.map_col == 0 ? map_cols() : sweep.map_col; }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    cohort.validate();
    ensemble.validate();
    if (pairing.n_pairs < 1) fail("pairing.n_pairs must be >= 1");
    if (pairing.max_uses_per_subject < 1) fail("pairing.max_uses_per_subject must be >= 1");
    if (pairing.selector_frs >= ensemble.names.size()) fail("pairing.selector_frs out of range");
    if (!(calibration.target_fmr > 0.0 && calibration.target_fmr < 1.0)) fail("calibration.target_fmr must lie in (0, 1)");
    if (calibration.nonmated_cap < 1) fail("calibration.nonmated_cap must be >= 1");
    if (map.attempts < 1 || map.attempts > cohort.probes_per_subject) {
      fail("map.attempts must lie in [1, cohort.probes_per_subject]");
    }
    if (map_cols() < 1 || map_cols() > ensemble.names.size()) fail("map.frs_count must lie in [1, ensemble size]");
    if (map.variants_per_pair < 1) fail("map.variants_per_pair must be >= 1");
    if (sweep.steps < 1) fail("sweep.steps must be >= 1");
    if (!(sweep.range.lo <= sweep.range.hi)) fail("sweep range must satisfy lo <= hi");
    if (sweep.map_row < 1 || sweep.map_row > map.attempts) fail("sweep.map_row must lie in [1, map.attempts]");
    if (sweep_col() < 1 || sweep_col() > map_cols()) fail("sweep.map_col must lie in [1, MAP columns]");
    if (variants.n_variants < 1) fail("variants.n_variants must be >= 1");
    if (variants.pair_index >= pairing.n_pairs) fail("variants.pair_index must be < pairing.n_pairs");
    if (variants.objective.kind == Objective::Kind::SingleFrs && variants.objective.frs_index >= ensemble.names.size()) {
      fail("variants.objective FRS index out of range");
    }
    if (output_dir.empty()) fail("output_dir must not be empty");
  }
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(ConfigTable table) : table_(std::move(table)) {}

  template <typename T>
  void get(const std::string& key, T& out) {
    const auto it = table_.find(key);
    if (it == table_.end()) return;
    used_.insert(key);
    convert(it->second, out, key);
  }

  void reject_unknown() const {
    for (const auto& [key, value] : table_) {
      if (!used_.contains(key)) {
        throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(value.line) + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  [[noreturn]] static void type_error(const ConfigValue& v, const std::string& key, const char* expected) {
    throw Error(ErrorCode::InvalidConfig,
                "line " + std::to_string(v.line) + ": '" + key + "' must be " + expected);
  }

  static void convert(const ConfigValue& v, double& out, const std::string& key) {
    if (const auto* d = std::get_if<double>(&v.value)) {
      out = *d;
    } else if (const auto* i = std::get_if<std::int64_t>(&v.value)) {
      out = static_cast<double>(*i);
    } else {
      type_error(v, key, "a number");
    }
  }

  template <typename T>
    requires std::is_unsigned_v<T>
  static void convert(const ConfigValue& v, T& out, const std::string& key) {
    const auto* i = std::get_if<std::int64_t>(&v.value);
    if (i == nullptr || *i < 0 || static_cast<std::uint64_t>(*i) > std::numeric_limits<T>::max()) {
      type_error(v, key, "a non-negative integer");
    }
    out = static_cast<T>(*i);
  }

  static void convert(const ConfigValue& v, std::string& out, const std::string& key) {
    const auto* s = std::get_if<std::string>(&v.value);
    if (s == nullptr) type_error(v, key, "a string");
    out = *s;
  }

  static void convert(const ConfigValue& v, std::filesystem::path& out, const std::string& key) {
    std::string s;
    convert(v, s, key);
    out = s;
  }

  template <typename T>
  static void convert(const ConfigValue& v, std::vector<T>& out, const std::string& key) {
    const auto* arr = std::get_if<ConfigValue::Array>(&v.value);
    if (arr == nullptr) type_error(v, key, "an array");
    out.clear();
    for (const auto& item : *arr) {
      T x{};
      convert(item, x, key);
      out.push_back(std::move(x));
    }
  }

  ConfigTable table_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Builds an experiment config from TOML text. Absent keys keep their
/// defaults; unknown keys are errors.
inline ExperimentConfig parse_experiment_config(std::string_view text) {
  detail::ConfigReader r(parse_config_table(text));
  ExperimentConfig cfg;
  r.get("seed", cfg.seed);
  r.get("output_dir", cfg.output_dir);

  r.get("cohort.n_subjects", cfg.cohort.n_subjects);
  r.get("cohort.refs_per_subject", cfg.cohort.refs_per_subject);
  r.get("cohort.probes_per_subject", cfg.cohort.probes_per_subject);
  r.get("cohort.latent_dim", cfg.cohort.latent_dim);
  r.get("cohort.frs_dim", cfg.cohort.frs_dim);
  r.get("cohort.reference_noise_sigma", cfg.cohort.reference_noise_sigma);
  r.get("cohort.probe_noise_multiplier", cfg.cohort.probe_noise_multiplier);

  r.get("ensemble.names", cfg.ensemble.names);
  r.get("ensemble.sample_noise_sigmas", cfg.ensemble.sample_noise_sigmas);
  r.get("ensemble.recon_noise_sigma", cfg.ensemble.recon_noise_sigma);
  r.get("ensemble.attacker_index", cfg.ensemble.attacker_index);

  r.get("pairing.n_pairs", cfg.pairing.n_pairs);
  r.get("pairing.max_uses_per_subject", cfg.pairing.max_uses_per_subject);
  r.get("pairing.selector_frs", cfg.pairing.selector_frs);

  r.get("calibration.target_fmr", cfg.calibration.target_fmr);
  r.get("calibration.nonmated_cap", cfg.calibration.nonmated_cap);

  r.get("map.attempts", cfg.map.attempts);
  r.get("map.frs_count", cfg.map.frs_count);
  r.get("map.variants_per_pair", cfg.map.variants_per_pair);
  std::string aggregation = "none";
  r.get("map.aggregate_variants", aggregation);
  cfg.map.aggregation = parse_variant_aggregation(aggregation);

  r.get("sweep.steps", cfg.sweep.steps);
  r.get("sweep.range_lo", cfg.sweep.range.lo);
  r.get("sweep.range_hi", cfg.sweep.range.hi);
  r.get("sweep.map_row", cfg.sweep.map_row);
  r.get("sweep.map_col", cfg.sweep.map_col);

  r.get("variants.n_variants", cfg.variants.n_variants);
  r.get("variants.pair_index", cfg.variants.pair_index);
  std::string objective = "min", correlation = "pearson", attack = "min-of-mean";
  r.get("variants.objective", objective);
  r.get("variants.correlation", correlation);
  r.get("variants.attack_score", attack);
  cfg.variants.objective = parse_objective(objective);
  cfg.variants.correlation = parse_correlation_method(correlation);
  cfg.variants.attack_score = parse_attack_score_mode(attack);

  r.reject_unknown();
  cfg.cohort.master_seed = cfg.seed;
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

}  // namespace morphmap
