#pragma once

// Decision thresholds and error rates. A comparison is a match when its score
// is >= the threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "morphmap/csv.hpp"
#include "morphmap/error.hpp"
#include "morphmap/scoring.hpp"

namespace morphmap {

inline constexpr double kNoFalseMatchMargin = 1e-6;

namespace detail {

inline void require_nonempty(std::span<const double> scores, const char* what) {
  if (scores.empty()) throw Error(ErrorCode::EmptyScores, std::string(what) + " scores are empty");
}

inline void require_rate(double target) {
  if (!(target > 0.0 && target < 1.0)) throw Error(ErrorCode::InvalidTarget, "target rate must lie in (0, 1)");
}

}  // namespace detail

/// Threshold whose FMR over `nonmated` does not exceed `target_fmr`.
///
/// With scores sorted descending s(1) >= ... >= s(N) and k = floor(N * target),
/// the threshold sits halfway between s(k) and s(k+1), so exactly k scores
/// match. Ties at the cut slide k down until they break. k = 0 yields
/// s(1) + 1e-6 (no false matches at all).
inline double threshold_at_fmr(std::span<const double> nonmated, double target_fmr) {
  detail::require_nonempty(nonmated, "non-mated");
  detail::require_rate(target_fmr);
  std::vector<double> s(nonmated.begin(), nonmated.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  auto k = static_cast<std::size_t>(std::floor(static_cast<double>(s.size()) * target_fmr));
  k = std::min(k, s.size() - 1);
  // s(k) is s[k - 1] and s(k + 1) is s[k] in 0-based indexing.
  while (k > 0 && s[k - 1] == s[k]) --k;
  if (k == 0) return s.front() + kNoFalseMatchMargin;
  const double mid = 0.5 * (s[k - 1] + s[k]);
  return mid > s[k] ? mid : s[k - 1];
}

inline double threshold_at_fmr(const ScoreSet& nonmated, double target_fmr) {
  return threshold_at_fmr(nonmated.values(), target_fmr);
}

/// Threshold whose FNMR over `mated` does not exceed `target_fnmr`: sorted
/// ascending, exactly floor(N * target) scores (ties slide down) fall below it.
inline double threshold_at_fnmr(std::span<const double> mated, double target_fnmr) {
  detail::require_nonempty(mated, "mated");
  detail::require_rate(target_fnmr);
  std::vector<double> s(mated.begin(), mated.end());
  std::sort(s.begin(), s.end());
  auto k = static_cast<std::size_t>(std::floor(static_cast<double>(s.size()) * target_fnmr));
  k = std::min(k, s.size() - 1);
  while (k > 0 && s[k - 1] == s[k]) --k;
  if (k == 0) return s.front();
  const double mid = 0.5 * (s[k - 1] + s[k]);
  return mid > s[k - 1] ? mid : s[k];
}

/// #{s >= t} / N
inline double fmr_at_threshold(std::span<const double> nonmated, double t) {
  detail::require_nonempty(nonmated, "non-mated");
  const auto n = std::count_if(nonmated.begin(), nonmated.end(), [t](double s) { return s >= t; });
  return static_cast<double>(n) / static_cast<double>(nonmated.size());
}

/// #{s < t} / N
inline double fnmr_at_threshold(std::span<const double> mated, double t) {
  detail::require_nonempty(mated, "mated");
  const auto n = std::count_if(mated.begin(), mated.end(), [t](double s) { return s < t; });
  return static_cast<double>(n) / static_cast<double>(mated.size());
}

struct OperatingPoint {
  std::string frs_name;
  double threshold = 0.0;
  double target_fmr = 0.0;
  double achieved_fmr = 0.0;
  double fnmr = 0.0;
  std::size_t n_nonmated = 0;
  std::size_t n_mated = 0;
};

inline OperatingPoint operating_point(const ScoreSet& mated, const ScoreSet& nonmated, double target_fmr) {
  const auto nm = nonmated.values();
  const auto m = mated.values();
  OperatingPoint op;
  op.frs_name = nonmated.frs_name;
  op.threshold = threshold_at_fmr(nm, target_fmr);
  op.target_fmr = target_fmr;
  op.achieved_fmr = fmr_at_threshold(nm, op.threshold);
  op.fnmr = fnmr_at_threshold(m, op.threshold);
  op.n_nonmated = nm.size();
  op.n_mated = m.size();
  return op;
}

inline constexpr const char* kOperatingPointsCsvHeader =
    "frs,threshold,target_fmr,achieved_fmr,fnmr,n_nonmated,n_mated";

inline std::string operating_points_to_csv(const std::vector<OperatingPoint>& points) {
  std::string out = std::string(kOperatingPointsCsvHeader) + "\n";
  for (const auto& p : points) {
    out += p.frs_name + ',' + csv::format_double(p.threshold) + ',' + csv::format_double(p.target_fmr) + ',' +
           csv::format_double(p.achieved_fmr) + ',' + csv::format_double(p.fnmr) + ',' +
           std::to_string(p.n_nonmated) + ',' + std::to_string(p.n_mated) + '\n';
  }
  return out;
}

inline std::vector<OperatingPoint> read_operating_points_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  if (csv::split(kOperatingPointsCsvHeader) != table.header) {
    throw Error(ErrorCode::InvalidArgument, "unexpected operating point CSV header in " + path.string());
  }
  std::vector<OperatingPoint> points;
  for (const auto& row : table.rows) {
    points.push_back({row[0], csv::parse_number<double>(row[1]), csv::parse_number<double>(row[2]),
                      csv::parse_number<double>(row[3]), csv::parse_number<double>(row[4]),
                      csv::parse_number<std::size_t>(row[5]), csv::parse_number<std::size_t>(row[6])});
  }
  return points;
}

// ---------------------------------------------------------------------------
// Threshold sweep

/// Scores sorted ascending for O(log N) rate queries.
class SortedScores {
 public:
  explicit SortedScores(std::vector<double> scores) : s_(std::move(scores)) {
    detail::require_nonempty(s_, "sweep");
    std::sort(s_.begin(), s_.end());
  }
  std::span<const double> values() const noexcept { return s_; }
  double rate_at_or_above(double t) const {
    return static_cast<double>(s_.end() - std::lower_bound(s_.begin(), s_.end(), t)) / static_cast<double>(s_.size());
  }
  double rate_below(double t) const { return 1.0 - rate_at_or_above(t); }

 private:
  std::vector<double> s_;
};

struct SweepInput {
  std::string frs_name;
  std::vector<double> mated;
  std::vector<double> nonmated;
};

struct SweepAnchors {
  double base = 0.0;         // threshold at the target FMR
  double convenience = 0.0;  // min(threshold at FMR 10%, base)
  double security = 0.0;     // max(threshold at FNMR 10%, base)
};

struct RelativeRange {
  double lo = -1.0;
  double hi = 1.0;
};

struct SweepStep {
  double offset = 0.0;
  std::vector<double> thresholds;
  std::vector<double> fmr;
  std::vector<double> fnmr;
  double avg_fmr = 0.0;
  double avg_fnmr = 0.0;
};

struct ThresholdSweep {
  std::vector<std::string> frs_names;
  std::vector<SweepAnchors> anchors;
  std::vector<SweepStep> steps;
};

inline constexpr double kSweepAnchorRate = 0.10;

/// Per-recognizer threshold for a relative offset: offset 0 is the base
/// operating point, +1 the FNMR = 10% point, -1 the FMR = 10% point.
inline double sweep_threshold(const SweepAnchors& a, double offset) {
  return offset >= 0.0 ? a.base + offset * (a.security - a.base) : a.base + offset * (a.base - a.convenience);
}

inline std::vector<double> sweep_offsets(RelativeRange range, std::size_t n_steps) {
  if (n_steps < 1) throw Error(ErrorCode::InvalidArgument, "sweep needs at least one step");
  if (!(range.lo <= range.hi)) throw Error(ErrorCode::InvalidArgument, "sweep range must satisfy lo <= hi");
  std::vector<double> offsets(n_steps);
  for (std::size_t i = 0; i < n_steps; ++i) {
    offsets[i] = n_steps == 1 ? range.lo
                              : range.lo + (range.hi - range.lo) * static_cast<double>(i) /
                                               static_cast<double>(n_steps - 1);
  }
  return offsets;
}

/// Sweeps every recognizer's threshold together from the convenience side to
/// the security side; FMR/FNMR are additionally averaged over recognizers.
inline ThresholdSweep threshold_sweep(const std::vector<SweepInput>& inputs, double target_fmr,
                                      RelativeRange range, std::size_t n_steps) {
  if (inputs.empty()) throw Error(ErrorCode::EmptyScores, "sweep needs at least one recognizer");
  ThresholdSweep sweep;
  std::vector<SortedScores> mated;
  std::vector<SortedScores> nonmated;
  for (const auto& in : inputs) {
    sweep.frs_names.push_back(in.frs_name);
    SweepAnchors a;
    a.base = threshold_at_fmr(in.nonmated, target_fmr);
    a.convenience = std::min(threshold_at_fmr(in.nonmated, kSweepAnchorRate), a.base);
    a.security = std::max(threshold_at_fnmr(in.mated, kSweepAnchorRate), a.base);
    sweep.anchors.push_back(a);
    mated.emplace_back(in.mated);
    nonmated.emplace_back(in.nonmated);
  }
  const double n_frs = static_cast<double>(inputs.size());
  for (double offset : sweep_offsets(range, n_steps)) {
    SweepStep step;
    step.offset = offset;
    for (std::size_t f = 0; f < inputs.size(); ++f) {
      const double t = sweep_threshold(sweep.anchors[f], offset);
      step.thresholds.push_back(t);
      step.fmr.push_back(nonmated[f].rate_at_or_above(t));
      step.fnmr.push_back(mated[f].rate_below(t));
      step.avg_fmr += step.fmr.back() / n_frs;
      step.avg_fnmr += step.fnmr.back() / n_frs;
    }
    sweep.steps.push_back(std::move(step));
  }
  return sweep;
}

}  // namespace morphmap
