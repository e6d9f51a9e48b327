#pragma once

// Stochastic morph variation: many reconstructions of one fixed morph, the
// resampling maximization over them, and cross-recognizer correlation of the
// variants' attack scores.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "morphmap/csv.hpp"
#include "morphmap/datastore.hpp"
#include "morphmap/error.hpp"
#include "morphmap/frs_simulator.hpp"
#include "morphmap/pair_selection.hpp"
#include "morphmap/parallel.hpp"
#include "morphmap/seeds.hpp"

namespace morphmap {

/// How a variant's probe scores for the two contributors collapse into one
/// attack score per recognizer.
enum class AttackScoreMode {
  MinOfMean,  // min over subjects of the mean probe similarity
  MinOfMin,   // min over subjects of the worst probe similarity
};

inline AttackScoreMode parse_attack_score_mode(std::string_view s) {
  if (s == "min-of-mean") return AttackScoreMode::MinOfMean;
  if (s == "min-of-min") return AttackScoreMode::MinOfMin;
  throw Error(ErrorCode::InvalidConfig, "attack score must be 'min-of-mean' or 'min-of-min'");
}

/// Probe templates of both contributors in one recognizer's space.
struct ContributorProbes {
  std::vector<Template> subject_a;
  std::vector<Template> subject_b;
};

inline ContributorProbes contributor_probes(const TemplateStore& store, const MorphPair& pair) {
  ContributorProbes out;
  for (const auto& g : detail::group_by_subject(store, Role::Probe)) {
    if (g.subject_id == pair.subject_a) out.subject_a = g.templates;
    if (g.subject_id == pair.subject_b) out.subject_b = g.templates;
  }
  if (out.subject_a.empty() || out.subject_b.empty()) {
    throw Error(ErrorCode::MissingProbes, "contributing subjects need probes in " + store.frs_name);
  }
  return out;
}

inline double attack_score(const Template& morph, const ContributorProbes& probes, AttackScoreMode mode) {
  auto reduce = [&](const std::vector<Template>& ps) {
    if (ps.empty()) throw Error(ErrorCode::MissingProbes, "contributor without probes");
    double acc = mode == AttackScoreMode::MinOfMean ? 0.0 : 1.0;
    for (const auto& p : ps) {
      const double s = cosine_similarity(morph, p);
      acc = mode == AttackScoreMode::MinOfMean ? acc + s : std::min(acc, s);
    }
    return mode == AttackScoreMode::MinOfMean ? acc / static_cast<double>(ps.size()) : acc;
  };
  return std::min(reduce(probes.subject_a), reduce(probes.subject_b));
}

struct VariantStudy {
  std::uint32_t pair_id = 0;
  std::vector<std::string> frs_names;
  std::vector<std::uint64_t> seeds;
  /// scores[variant][frs]
  std::vector<std::vector<double>> scores;

  std::size_t n_variants() const noexcept { return scores.size(); }
  std::size_t n_frs() const noexcept { return frs_names.size(); }

  std::vector<double> frs_column(std::size_t f) const {
    std::vector<double> col;
    col.reserve(scores.size());
    for (const auto& row : scores) col.push_back(row.at(f));
    return col;
  }

  bool operator==(const VariantStudy&) const = default;
};

inline std::uint64_t variant_study_seed(std::uint64_t master_seed, std::size_t variant) {
  return derive_seed(master_seed, SeedTag::Variant, variant);
}

/// Generates `n_variants` reconstructions of `morph_latent_vec` and scores
/// each on every recognizer. `probes` is indexed like `ensemble.models`.
inline VariantStudy run_variant_study(std::uint32_t pair_id, std::span<const double> morph_latent_vec,
                                      const FrsEnsemble& ensemble, const std::vector<ContributorProbes>& probes,
                                      std::size_t n_variants, std::uint64_t master_seed,
                                      AttackScoreMode mode = AttackScoreMode::MinOfMean) {
  if (n_variants < 1) throw Error(ErrorCode::InvalidArgument, "n_variants must be >= 1");
  if (probes.size() != ensemble.size()) throw Error(ErrorCode::InvalidArgument, "one probe set per recognizer");
  VariantStudy study;
  study.pair_id = pair_id;
  for (const auto& m : ensemble.models) study.frs_names.push_back(m.name());
  study.seeds.resize(n_variants);
  study.scores.assign(n_variants, std::vector<double>(ensemble.size(), 0.0));
  parallel_for(n_variants, [&](std::size_t i) {
    study.seeds[i] = variant_study_seed(master_seed, i);
    const auto templates = reconstruct_variant(ensemble, morph_latent_vec, study.seeds[i]);
    for (std::size_t f = 0; f < ensemble.size(); ++f) {
      study.scores[i][f] = attack_score(templates[f], probes[f], mode);
    }
  });
  return study;
}

struct Objective {
  enum class Kind { SingleFrs, MinAcrossFrs, MeanAcrossFrs };
  Kind kind = Kind::MinAcrossFrs;
  std::size_t frs_index = 0;  // SingleFrs only

  static Objective single(std::size_t f) { return {Kind::SingleFrs, f}; }
  static Objective min_across() { return {Kind::MinAcrossFrs, 0}; }
  static Objective mean_across() { return {Kind::MeanAcrossFrs, 0}; }
};

/// Accepts "min", "mean" or "frs:<index>".
inline Objective parse_objective(std::string_view s) {
  if (s == "min") return Objective::min_across();
  if (s == "mean") return Objective::mean_across();
  if (s.starts_with("frs:")) return Objective::single(csv::parse_number<std::size_t>(s.substr(4)));
  throw Error(ErrorCode::InvalidConfig, "objective must be 'min', 'mean' or 'frs:<index>'");
}

inline std::string to_string(const Objective& o) {
  switch (o.kind) {
    case Objective::Kind::SingleFrs: return "frs:" + std::to_string(o.frs_index);
    case Objective::Kind::MinAcrossFrs: return "min";
    case Objective::Kind::MeanAcrossFrs: return "mean";
  }
  return "unknown";
}

inline std::vector<double> objective_values(const VariantStudy& study, const Objective& objective) {
  std::vector<double> values;
  values.reserve(study.n_variants());
  for (const auto& row : study.scores) {
    switch (objective.kind) {
      case Objective::Kind::SingleFrs:
        if (objective.frs_index >= row.size()) throw Error(ErrorCode::InvalidArgument, "objective FRS index out of range");
        values.push_back(row[objective.frs_index]);
        break;
      case Objective::Kind::MinAcrossFrs:
        values.push_back(*std::min_element(row.begin(), row.end()));
        break;
      case Objective::Kind::MeanAcrossFrs:
        values.push_back(std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size()));
        break;
    }
  }
  return values;
}

struct ResampleResult {
  std::size_t best_variant = 0;
  double best_value = 0.0;
  /// trace[k] = max over the first k + 1 variants.
  std::vector<double> running_max;
};

/// Best-of-N resampling: argmax (lowest index on ties) and the running maximum.
inline ResampleResult resample_maximize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyStudy, "no variants to resample");
  ResampleResult r{0, values[0], {}};
  r.running_max.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > r.best_value) {
      r.best_value = values[i];
      r.best_variant = i;
    }
    r.running_max.push_back(r.best_value);
  }
  return r;
}

inline ResampleResult resample_maximize(const VariantStudy& study, const Objective& objective) {
  if (study.n_variants() == 0) throw Error(ErrorCode::EmptyStudy, "no variants to resample");
  return resample_maximize(objective_values(study, objective));
}

enum class CorrelationMethod { Pearson, Spearman };

inline CorrelationMethod parse_correlation_method(std::string_view s) {
  if (s == "pearson") return CorrelationMethod::Pearson;
  if (s == "spearman") return CorrelationMethod::Spearman;
  throw Error(ErrorCode::InvalidConfig, "correlation must be 'pearson' or 'spearman'");
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimMismatch, "correlation inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "correlation needs at least 2 observations");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "correlation of a constant score vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Ranks starting at 1; ties get their average rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

struct CorrelationMatrix {
  std::vector<std::string> frs_names;
  std::vector<double> entries;  // row-major, size C x C

  std::size_t size() const noexcept { return frs_names.size(); }
  double at(std::size_t i, std::size_t j) const { return entries.at(i * size() + j); }
};

/// Correlation of the per-variant attack scores between every recognizer
/// pair. The diagonal is exactly 1 and the matrix exactly symmetric.
inline CorrelationMatrix correlation_matrix(const VariantStudy& study,
                                            CorrelationMethod method = CorrelationMethod::Pearson) {
  if (study.n_variants() < 2) throw Error(ErrorCode::InvalidArgument, "correlation needs n_variants >= 2");
  const std::size_t c = study.n_frs();
  std::vector<std::vector<double>> cols;
  for (std::size_t f = 0; f < c; ++f) {
    cols.push_back(study.frs_column(f));
    const auto [lo, hi] = std::minmax_element(cols.back().begin(), cols.back().end());
    if (*lo == *hi) throw Error(ErrorCode::ZeroVariance, "constant attack scores on " + study.frs_names[f]);
  }
  CorrelationMatrix m{study.frs_names, std::vector<double>(c * c, 0.0)};
  for (std::size_t i = 0; i < c; ++i) {
    m.entries[i * c + i] = 1.0;
    for (std::size_t j = i + 1; j < c; ++j) {
      const double r = method == CorrelationMethod::Pearson ? pearson(cols[i], cols[j]) : spearman(cols[i], cols[j]);
      m.entries[i * c + j] = r;
      m.entries[j * c + i] = r;
    }
  }
  return m;
}

inline std::string variant_study_to_csv(const VariantStudy& study, const std::vector<double>& objective) {
  std::string out = "variant_id,seed";
  for (const auto& n : study.frs_names) out += ',' + n;
  out += ",objective\n";
  for (std::size_t i = 0; i < study.n_variants(); ++i) {
    out += std::to_string(i) + ',' + std::to_string(study.seeds[i]);
    for (double s : study.scores[i]) out += ',' + csv::format_double(s);
    out += ',' + csv::format_double(objective.at(i)) + '\n';
  }
  return out;
}

inline std::string correlation_to_csv(const CorrelationMatrix& m) {
  std::string out = "frs";
  for (const auto& n : m.frs_names) out += ',' + n;
  out += '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += m.frs_names[i];
    for (std::size_t j = 0; j < m.size(); ++j) out += ',' + csv::format_double(m.at(i, j));
    out += '\n';
  }
  return out;
}

inline std::string resample_trace_to_csv(const ResampleResult& r) {
  std::string out = "n_variants,running_max\n";
  for (std::size_t k = 0; k < r.running_max.size(); ++k) {
    out += std::to_string(k + 1) + ',' + csv::format_double(r.running_max[k]) + '\n';
  }
  return out;
}

}  // namespace morphmap
