#pragma once

// Morph Attack Potential (ISO/IEC 20059).
//
// MAP[r, c] is the proportion of morphs that reach a match decision in at
// least r verification attempts for each contributing subject on at least c
// of the evaluated recognizers. An attempt is one probe comparison; the first
// r_max probes of each subject (ascending sample id) are the attempts, and
// any r of them may succeed.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "morphmap/calibration.hpp"
#include "morphmap/csv.hpp"
#include "morphmap/error.hpp"
#include "morphmap/pair_selection.hpp"
#include "morphmap/scoring.hpp"

namespace morphmap {

/// Successful attempts (m_a, m_b) of one morph per recognizer.
struct AttackOutcome {
  std::uint32_t pair_id = 0;
  std::uint32_t variant_id = 0;
  std::size_t r_max = 0;
  std::vector<std::pair<std::size_t, std::size_t>> matched;

  bool operator==(const AttackOutcome&) const = default;

  /// Attempts that succeeded for both subjects on recognizer f.
  std::size_t both(std::size_t f) const { return std::min(matched[f].first, matched[f].second); }
};

enum class VariantAggregation {
  /// Every (pair, variant) is its own attack.
  None,
  /// One attack per pair; it succeeds in a cell when any of its variants does.
  Best,
};

inline VariantAggregation parse_variant_aggregation(std::string_view s) {
  if (s == "none") return VariantAggregation::None;
  if (s == "best") return VariantAggregation::Best;
  throw Error(ErrorCode::InvalidConfig, "variant aggregation must be 'none' or 'best', got '" + std::string(s) + "'");
}

class MapMatrix {
 public:
  MapMatrix(std::size_t rows, std::size_t cols, std::size_t n_morphs)
      : rows_(rows), cols_(cols), n_morphs_(n_morphs), cells_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t n_morphs() const noexcept { return n_morphs_; }

  /// 1-based (attempts r, recognizers c).
  double at(std::size_t r, std::size_t c) const { return cells_.at((r - 1) * cols_ + (c - 1)); }
  double& at(std::size_t r, std::size_t c) { return cells_.at((r - 1) * cols_ + (c - 1)); }
  const std::vector<double>& cells() const noexcept { return cells_; }

  /// Number of adjacent cell pairs that increase along r or c.
  std::size_t monotonicity_violations() const {
    std::size_t violations = 0;
    for (std::size_t r = 1; r <= rows_; ++r) {
      for (std::size_t c = 1; c <= cols_; ++c) {
        if (r < rows_ && at(r + 1, c) > at(r, c)) ++violations;
        if (c < cols_ && at(r, c + 1) > at(r, c)) ++violations;
      }
    }
    return violations;
  }

  bool operator==(const MapMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::size_t n_morphs_;
  std::vector<double> cells_;
};

/// Per-recognizer success counts for every morph in `morph_sets` (one score set
/// per recognizer, as produced by `morph_scores`). Thresholds are indexed like
/// `morph_sets`.
inline std::vector<AttackOutcome> attack_outcomes(const std::vector<ScoreSet>& morph_sets,
                                                  const std::vector<double>& thresholds,
                                                  const std::vector<MorphPair>& pairs, std::size_t r_max) {
  if (morph_sets.empty()) throw Error(ErrorCode::EmptyOutcomes, "no recognizer score sets");
  if (morph_sets.size() != thresholds.size()) {
    throw Error(ErrorCode::InvalidArgument, "one threshold per recognizer required");
  }
  if (r_max < 1) throw Error(ErrorCode::InvalidArgument, "r_max must be >= 1");

  using MorphId = std::pair<std::uint32_t, std::uint32_t>;
  using SubjectScores = std::map<std::uint32_t, std::map<std::uint32_t, double>>;  // subject -> probe -> score
  std::vector<std::map<MorphId, SubjectScores>> grouped(morph_sets.size());
  for (std::size_t f = 0; f < morph_sets.size(); ++f) {
    for (const auto& s : morph_sets[f].scores) {
      grouped[f][{s.key.source, s.key.source_sample}][s.key.probe_subject][s.key.probe_sample] = s.similarity;
    }
  }

  std::vector<AttackOutcome> outcomes;
  for (const auto& [id, unused] : grouped.front()) {
    const auto [pair_id, variant_id] = id;
    if (pair_id >= pairs.size()) throw Error(ErrorCode::InvalidArgument, "unknown pair id " + std::to_string(pair_id));
    const auto& pair = pairs[pair_id];
    AttackOutcome out{pair_id, variant_id, r_max, {}};
    for (std::size_t f = 0; f < morph_sets.size(); ++f) {
      auto count = [&](std::uint32_t subject) -> std::size_t {
        const auto it = grouped[f].find(id);
        const std::map<std::uint32_t, double>* probes = nullptr;
        if (it != grouped[f].end()) {
          if (auto sit = it->second.find(subject); sit != it->second.end()) probes = &sit->second;
        }
        if (probes == nullptr || probes->size() < r_max) {
          throw Error(ErrorCode::InsufficientProbes,
                      "pair " + std::to_string(pair_id) + " variant " + std::to_string(variant_id) + " subject " +
                          std::to_string(subject) + " has fewer than " + std::to_string(r_max) + " probe scores on " +
                          morph_sets[f].frs_name);
        }
        std::size_t m = 0;
        std::size_t taken = 0;
        for (const auto& [sample, score] : *probes) {
          if (taken++ == r_max) break;
          if (score >= thresholds[f]) ++m;
        }
        return m;
      };
      out.matched.emplace_back(count(pair.subject_a), count(pair.subject_b));
    }
    outcomes.push_back(std::move(out));
  }
  if (outcomes.empty()) throw Error(ErrorCode::EmptyOutcomes, "no morph scores");
  return outcomes;
}

/// MAP matrix with `rows` attempt levels (r = 1..rows) and `cols` recognizer
/// counts (c = 1..cols).
inline MapMatrix map_matrix(const std::vector<AttackOutcome>& outcomes, std::size_t rows, std::size_t cols,
                            VariantAggregation aggregation = VariantAggregation::None) {
  if (outcomes.empty()) throw Error(ErrorCode::EmptyOutcomes, "MAP of no morphs");
  const std::size_t n_frs = outcomes.front().matched.size();
  const std::size_t r_max = outcomes.front().r_max;
  if (rows < 1 || cols < 1) throw Error(ErrorCode::InvalidArgument, "MAP needs R >= 1 and C >= 1");
  if (cols > n_frs) throw Error(ErrorCode::InvalidArgument, "C exceeds the number of recognizers");
  if (rows > r_max) throw Error(ErrorCode::InvalidArgument, "R exceeds the attempts per subject");
  for (const auto& o : outcomes) {
    if (o.matched.size() != n_frs || o.r_max != r_max) {
      throw Error(ErrorCode::InvalidArgument, "outcomes disagree on recognizer count or r_max");
    }
  }

  // Per attack unit: for each r, the number of recognizers where both
  // subjects matched in >= r attempts. Units are outcomes or pairs.
  std::map<std::uint32_t, std::vector<bool>> unit_success;  // key -> cell flags (row-major)
  std::size_t unit_key = 0;
  for (const auto& o : outcomes) {
    const std::uint32_t key = aggregation == VariantAggregation::Best ? o.pair_id : static_cast<std::uint32_t>(unit_key++);
    auto& flags = unit_success.try_emplace(key, rows * cols, false).first->second;
    for (std::size_t r = 1; r <= rows; ++r) {
      std::size_t systems = 0;
      for (std::size_t f = 0; f < n_frs; ++f) systems += o.both(f) >= r ? 1 : 0;
      for (std::size_t c = 1; c <= cols; ++c) {
        if (systems >= c) flags[(r - 1) * cols + (c - 1)] = true;
      }
    }
  }

  MapMatrix map(rows, cols, unit_success.size());
  for (std::size_t cell = 0; cell < rows * cols; ++cell) {
    std::size_t hits = 0;
    for (const auto& [key, flags] : unit_success) hits += flags[cell] ? 1 : 0;
    map.at(cell / cols + 1, cell % cols + 1) = static_cast<double>(hits) / static_cast<double>(unit_success.size());
  }
  return map;
}

struct MapTracePoint {
  double offset = 0.0;
  double value = 0.0;
  MapMatrix matrix{1, 1, 0};
};

/// Recomputes attack outcomes at every sweep step and reports MAP[r_sel, c_sel].
inline std::vector<MapTracePoint> map_under_sweep(const std::vector<ScoreSet>& morph_sets,
                                                  const std::vector<MorphPair>& pairs, const ThresholdSweep& sweep,
                                                  std::size_t r_max, std::size_t rows, std::size_t cols,
                                                  std::size_t r_sel, std::size_t c_sel,
                                                  VariantAggregation aggregation = VariantAggregation::None) {
  if (r_sel < 1 || r_sel > rows || c_sel < 1 || c_sel > cols) {
    throw Error(ErrorCode::InvalidArgument, "selected MAP cell outside the matrix");
  }
  std::vector<MapTracePoint> trace;
  for (const auto& step : sweep.steps) {
    auto m = map_matrix(attack_outcomes(morph_sets, step.thresholds, pairs, r_max), rows, cols, aggregation);
    const double v = m.at(r_sel, c_sel);
    trace.push_back({step.offset, v, std::move(m)});
  }
  return trace;
}

inline std::string map_to_csv(const MapMatrix& m) {
  std::string out = "attempts";
  for (std::size_t c = 1; c <= m.cols(); ++c) out += ",frs_" + std::to_string(c);
  out += '\n';
  for (std::size_t r = 1; r <= m.rows(); ++r) {
    out += std::to_string(r);
    for (std::size_t c = 1; c <= m.cols(); ++c) out += ',' + csv::format_double(m.at(r, c));
    out += '\n';
  }
  return out;
}

inline std::string map_to_text(const MapMatrix& m) {
  std::string out = "MAP (rows: verification attempts r, cols: recognizers c), n_morphs = " +
                    std::to_string(m.n_morphs()) + "\n      ";
  char buf[32];
  for (std::size_t c = 1; c <= m.cols(); ++c) {
    std::snprintf(buf, sizeof buf, "  c=%-5zu", c);
    out += buf;
  }
  out += '\n';
  for (std::size_t r = 1; r <= m.rows(); ++r) {
    std::snprintf(buf, sizeof buf, "r=%-4zu", r);
    out += buf;
    for (std::size_t c = 1; c <= m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "  %6.2f%%", 100.0 * m.at(r, c));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

/// One row per sweep step: offset, per-recognizer thresholds, averaged rates
/// and the selected MAP cell.
inline std::string sweep_to_csv(const ThresholdSweep& sweep, const std::vector<MapTracePoint>& trace,
                                std::size_t r_sel, std::size_t c_sel) {
  std::string out = "offset";
  for (const auto& name : sweep.frs_names) out += ",threshold_" + name;
  out += ",avg_fmr,avg_fnmr,map_" + std::to_string(r_sel) + "_" + std::to_string(c_sel) + "\n";
  for (std::size_t i = 0; i < sweep.steps.size(); ++i) {
    const auto& step = sweep.steps[i];
    out += csv::format_double(step.offset);
    for (double t : step.thresholds) out += ',' + csv::format_double(t);
    out += ',' + csv::format_double(step.avg_fmr) + ',' + csv::format_double(step.avg_fnmr) + ',' +
           csv::format_double(trace.at(i).value) + '\n';
  }
  return out;
}

}  // namespace morphmap
