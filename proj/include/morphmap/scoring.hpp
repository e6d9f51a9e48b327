#pragma once

// Mated, non-mated and morph comparison score sets for one recognizer.
// All comparisons are reference-vs-probe (enrolment image vs gate capture).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <iterator>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "morphmap/csv.hpp"
#include "morphmap/datastore.hpp"
#include "morphmap/error.hpp"
#include "morphmap/pair_selection.hpp"
#include "morphmap/parallel.hpp"
#include "morphmap/seeds.hpp"
#include "morphmap/template_core.hpp"

namespace morphmap {

enum class ScoreKind { Mated, NonMated, Morph };

inline constexpr std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Mated: return "mated";
    case ScoreKind::NonMated: return "nonmated";
    case ScoreKind::Morph: return "morph";
  }
  return "unknown";
}

/// Identifies one comparison. For mated/non-mated scores the first two fields
/// are the reference (subject, sample); for morph scores they are
/// (pair id, variant id). The last two are always the probe's (subject, sample).
struct ScoreKey {
  std::uint32_t source = 0;
  std::uint32_t source_sample = 0;
  std::uint32_t probe_subject = 0;
  std::uint32_t probe_sample = 0;

  auto operator<=>(const ScoreKey&) const = default;
};

struct Score {
  ScoreKey key;
  double similarity = 0.0;

  bool operator==(const Score&) const = default;
};

struct ScoreSet {
  std::string frs_name;
  ScoreKind kind = ScoreKind::Mated;
  std::vector<Score> scores;

  std::size_t size() const noexcept { return scores.size(); }
  bool empty() const noexcept { return scores.empty(); }

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(scores.size());
    for (const auto& s : scores) v.push_back(s.similarity);
    return v;
  }

  double mean() const {
    if (scores.empty()) throw Error(ErrorCode::EmptyScores, "mean of an empty score set");
    double acc = 0.0;
    for (const auto& s : scores) acc += s.similarity;
    return acc / static_cast<double>(scores.size());
  }
};

inline constexpr std::size_t kDefaultNonMatedCap = 1'000'000;

/// All same-subject reference-vs-probe comparisons, ordered by
/// (subject, reference sample, probe sample).
inline ScoreSet mated_scores(const TemplateStore& store) {
  const auto refs = detail::group_by_subject(store, Role::Reference);
  const auto probes = detail::group_by_subject(store, Role::Probe);
  std::map<std::uint32_t, const detail::SubjectTemplates*> probe_by_subject;
  for (const auto& p : probes) probe_by_subject[p.subject_id] = &p;

  ScoreSet out{store.frs_name, ScoreKind::Mated, {}};
  for (const auto& r : refs) {
    const auto it = probe_by_subject.find(r.subject_id);
    if (it == probe_by_subject.end()) continue;
    const auto& p = *it->second;
    for (std::size_t i = 0; i < r.templates.size(); ++i) {
      for (std::size_t j = 0; j < p.templates.size(); ++j) {
        out.scores.push_back({{r.subject_id, r.sample_ids[i], p.subject_id, p.sample_ids[j]},
                              cosine_similarity(r.templates[i], p.templates[j])});
      }
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptyStore, "no subject has both reference and probe samples");
  return out;
}

/// Cross-subject reference-vs-probe comparisons. When more than `cap` exist, a
/// uniform subsample of exactly `cap` (drawn from `seed`) is kept; order is
/// always (reference subject, reference sample, probe subject, probe sample).
inline ScoreSet nonmated_scores(const TemplateStore& store, std::size_t cap = kDefaultNonMatedCap,
                                std::uint64_t seed = 0) {
  if (cap < 1) throw Error(ErrorCode::InvalidArgument, "non-mated sampling cap must be >= 1");
  const auto ref_groups = detail::group_by_subject(store, Role::Reference);
  const auto probe_groups = detail::group_by_subject(store, Role::Probe);

  struct Flat {
    std::uint32_t subject;
    std::uint32_t sample;
    const Template* t;
  };
  std::vector<Flat> refs;
  std::vector<Flat> probes;
  std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> probe_block;  // [lo, hi)
  for (const auto& g : ref_groups) {
    for (std::size_t i = 0; i < g.templates.size(); ++i) refs.push_back({g.subject_id, g.sample_ids[i], &g.templates[i]});
  }
  for (const auto& g : probe_groups) {
    const std::size_t lo = probes.size();
    for (std::size_t i = 0; i < g.templates.size(); ++i) probes.push_back({g.subject_id, g.sample_ids[i], &g.templates[i]});
    probe_block[g.subject_id] = {lo, probes.size()};
  }

  // prefix[r] = number of comparisons contributed by references before r.
  std::vector<std::size_t> prefix(refs.size() + 1, 0);
  std::vector<std::pair<std::size_t, std::size_t>> own_block(refs.size(), {0, 0});
  for (std::size_t r = 0; r < refs.size(); ++r) {
    if (auto it = probe_block.find(refs[r].subject); it != probe_block.end()) own_block[r] = it->second;
    prefix[r + 1] = prefix[r] + probes.size() - (own_block[r].second - own_block[r].first);
  }
  const std::size_t total = prefix.back();
  if (total == 0) throw Error(ErrorCode::EmptyStore, "no cross-subject reference/probe comparisons");

  std::vector<std::size_t> picked;
  if (total > cap) {
    picked.reserve(cap);
    Rng rng(derive_seed(seed, SeedTag::NonMatedSubsample, 0));
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Selection sampling over a forward range keeps the picked indices ordered.
    std::sample(all.begin(), all.end(), std::back_inserter(picked), static_cast<std::ptrdiff_t>(cap), rng);
  }
  const std::size_t n = picked.empty() ? total : picked.size();

  ScoreSet out{store.frs_name, ScoreKind::NonMated, std::vector<Score>(n)};
  parallel_for(n, [&](std::size_t i) {
    const std::size_t idx = picked.empty() ? i : picked[i];
    const auto r = static_cast<std::size_t>(std::upper_bound(prefix.begin(), prefix.end(), idx) - prefix.begin()) - 1;
    std::size_t p = idx - prefix[r];
    const auto [lo, hi] = own_block[r];
    if (p >= lo) p += hi - lo;
    out.scores[i] = {{refs[r].subject, refs[r].sample, probes[p].subject, probes[p].sample},
                     cosine_similarity(*refs[r].t, *probes[p].t)};
  });
  return out;
}

/// Each morph record (subject_id = pair id, sample_id = variant id) against
/// every probe of both contributing subjects. Ordered by
/// (pair, variant, subject, probe sample).
inline ScoreSet morph_scores(const TemplateStore& morph_store, const std::vector<MorphPair>& pairs,
                             const TemplateStore& probe_store) {
  if (morph_store.dim != probe_store.dim) throw Error(ErrorCode::DimMismatch, "morph store vs probe store dim");
  const auto probe_groups = detail::group_by_subject(probe_store, Role::Probe);
  std::map<std::uint32_t, const detail::SubjectTemplates*> probes;
  for (const auto& g : probe_groups) probes[g.subject_id] = &g;

  std::vector<const TemplateRecord*> morphs;
  for (const auto& r : morph_store.records) {
    if (r.role == Role::MorphVariant) morphs.push_back(&r);
  }
  std::ranges::sort(morphs, {}, [](const TemplateRecord* r) { return std::pair(r->subject_id, r->sample_id); });

  ScoreSet out{probe_store.frs_name, ScoreKind::Morph, {}};
  for (const auto* m : morphs) {
    if (m->subject_id >= pairs.size()) {
      throw Error(ErrorCode::InvalidArgument, "morph references unknown pair id " + std::to_string(m->subject_id));
    }
    const auto& pair = pairs[m->subject_id];
    const auto morph = to_template(*m);
    for (std::uint32_t subject : {pair.subject_a, pair.subject_b}) {
      const auto it = probes.find(subject);
      if (it == probes.end()) {
        throw Error(ErrorCode::MissingProbes, "no probes for contributing subject " + std::to_string(subject));
      }
      const auto& g = *it->second;
      for (std::size_t j = 0; j < g.templates.size(); ++j) {
        out.scores.push_back({{m->subject_id, m->sample_id, subject, g.sample_ids[j]},
                              cosine_similarity(morph, g.templates[j])});
      }
    }
  }
  return out;
}

inline constexpr const char* kScoresCsvHeader = "kind,source,source_sample,probe_subject,probe_sample,score";

/// One CSV for any number of score sets; `source` is the reference subject or
/// the pair id (morph rows), `source_sample` the reference sample or variant id.
inline std::string scores_to_csv(std::initializer_list<const ScoreSet*> sets) {
  std::string out = std::string(kScoresCsvHeader) + "\n";
  for (const auto* set : sets) {
    const std::string kind(to_string(set->kind));
    for (const auto& s : set->scores) {
      out += kind + ',' + std::to_string(s.key.source) + ',' + std::to_string(s.key.source_sample) + ',' +
             std::to_string(s.key.probe_subject) + ',' + std::to_string(s.key.probe_sample) + ',' +
             csv::format_double(s.similarity) + '\n';
    }
  }
  return out;
}

inline constexpr std::size_t kHistogramBins = 200;  // width 0.01 over [-1, 1]

inline std::array<std::size_t, kHistogramBins> histogram(const ScoreSet& set) {
  std::array<std::size_t, kHistogramBins> counts{};
  for (const auto& s : set.scores) {
    const double pos = std::floor((s.similarity + 1.0) * 100.0);
    const auto bin = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(kHistogramBins - 1)));
    ++counts[bin];
  }
  return counts;
}

inline std::string histograms_to_csv(std::initializer_list<const ScoreSet*> sets) {
  std::string out = "kind,bin_lower,bin_upper,count\n";
  for (const auto* set : sets) {
    const auto counts = histogram(*set);
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
      const double lo = -1.0 + 0.01 * static_cast<double>(b);
      out += std::string(to_string(set->kind)) + ',' + csv::format_double(lo) + ',' +
             csv::format_double(lo + 0.01) + ',' + std::to_string(counts[b]) + '\n';
    }
  }
  return out;
}

}  // namespace morphmap
