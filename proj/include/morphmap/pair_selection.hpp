#pragma once

// Morph pair selection by non-mated similarity of reference templates.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "morphmap/csv.hpp"
#include "morphmap/datastore.hpp"
#include "morphmap/error.hpp"
#include "morphmap/parallel.hpp"
#include "morphmap/template_core.hpp"

namespace morphmap {

/// Best-matching reference pair between two different subjects.
struct SubjectPairSimilarity {
  std::uint32_t subject_a = 0;
  std::uint32_t subject_b = 0;  // subject_a < subject_b
  std::uint32_t sample_a = 0;
  std::uint32_t sample_b = 0;
  double similarity = 0.0;

  bool operator==(const SubjectPairSimilarity&) const = default;
};

/// Ordered by (subject_a, subject_b).
using SimilarityTable = std::vector<SubjectPairSimilarity>;

struct MorphPair {
  std::uint32_t subject_a = 0;
  std::uint32_t subject_b = 0;
  std::uint32_t ref_sample_a = 0;
  std::uint32_t ref_sample_b = 0;
  double selection_score = 0.0;

  bool operator==(const MorphPair&) const = default;
};

namespace detail {

struct SubjectTemplates {
  std::uint32_t subject_id = 0;
  std::vector<std::uint32_t> sample_ids;
  std::vector<Template> templates;
};

/// Records of one role grouped by subject, subjects and samples ascending.
inline std::vector<SubjectTemplates> group_by_subject(const TemplateStore& store, Role role) {
  std::map<std::uint32_t, std::map<std::uint32_t, const TemplateRecord*>> grouped;
  for (const auto& r : store.records) {
    if (r.role == role) grouped[r.subject_id][r.sample_id] = &r;
  }
  std::vector<SubjectTemplates> out;
  out.reserve(grouped.size());
  for (const auto& [subject, samples] : grouped) {
    SubjectTemplates st{subject, {}, {}};
    for (const auto& [sample, rec] : samples) {
      st.sample_ids.push_back(sample);
      st.templates.push_back(to_template(*rec));
    }
    out.push_back(std::move(st));
  }
  return out;
}

}  // namespace detail

/// For every pair of distinct subjects, the maximum cosine similarity over all
/// cross-subject reference sample pairs, with the argmax samples (first in
/// (sample_a, sample_b) order on ties). Mated comparisons never enter.
inline SimilarityTable nonmated_similarity(const TemplateStore& selector_store) {
  const auto subjects = detail::group_by_subject(selector_store, Role::Reference);
  if (subjects.size() < 2) {
    throw Error(ErrorCode::InsufficientSubjects, "need at least 2 subjects with reference templates");
  }
  const std::size_t n = subjects.size();
  // Row i holds pairs (i, j) for j > i; offsets keep the flat table in order.
  std::vector<std::size_t> row_offset(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) row_offset[i + 1] = row_offset[i] + (n - 1 - i);
  SimilarityTable table(row_offset[n]);

  parallel_for(n, [&](std::size_t i) {
    const auto& a = subjects[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& b = subjects[j];
      SubjectPairSimilarity best{a.subject_id, b.subject_id, a.sample_ids[0], b.sample_ids[0], -2.0};
      for (std::size_t p = 0; p < a.templates.size(); ++p) {
        for (std::size_t q = 0; q < b.templates.size(); ++q) {
          const double s = cosine_similarity(a.templates[p], b.templates[q]);
          if (s > best.similarity) {
            best.sample_a = a.sample_ids[p];
            best.sample_b = b.sample_ids[q];
            best.similarity = s;
          }
        }
      }
      table[row_offset[i] + (j - i - 1)] = best;
    }
  });
  return table;
}

/// Greedy selection by descending similarity (ties by (subject_a, subject_b))
/// with each subject used at most `max_uses_per_subject` times.
inline std::vector<MorphPair> select_pairs(const SimilarityTable& table, std::size_t n_pairs,
                                           std::size_t max_uses_per_subject) {
  if (n_pairs < 1) throw Error(ErrorCode::InvalidArgument, "n_pairs must be >= 1");
  if (max_uses_per_subject < 1) throw Error(ErrorCode::InvalidArgument, "max_uses_per_subject must be >= 1");

  std::vector<const SubjectPairSimilarity*> order;
  order.reserve(table.size());
  for (const auto& e : table) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](const auto* x, const auto* y) {
    if (x->similarity != y->similarity) return x->similarity > y->similarity;
    return std::tie(x->subject_a, x->subject_b) < std::tie(y->subject_a, y->subject_b);
  });

  std::map<std::uint32_t, std::size_t> uses;
  std::vector<MorphPair> pairs;
  for (const auto* e : order) {
    if (pairs.size() == n_pairs) break;
    if (e->subject_a == e->subject_b) continue;
    auto& ua = uses[e->subject_a];
    auto& ub = uses[e->subject_b];
    if (ua >= max_uses_per_subject || ub >= max_uses_per_subject) continue;
    ++ua;
    ++ub;
    pairs.push_back({e->subject_a, e->subject_b, e->sample_a, e->sample_b, e->similarity});
  }
  if (pairs.size() < n_pairs) {
    throw Error(ErrorCode::NotEnoughPairs, "requested " + std::to_string(n_pairs) + " pairs, only " +
                                               std::to_string(pairs.size()) + " feasible");
  }
  return pairs;
}

inline constexpr const char* kPairsCsvHeader = "subject_a,subject_b,ref_sample_a,ref_sample_b,selection_score";

inline std::string pairs_to_csv(const std::vector<MorphPair>& pairs) {
  std::string out = std::string(kPairsCsvHeader) + "\n";
  for (const auto& p : pairs) {
    out += std::to_string(p.subject_a) + ',' + std::to_string(p.subject_b) + ',' +
           std::to_string(p.ref_sample_a) + ',' + std::to_string(p.ref_sample_b) + ',' +
           csv::format_double(p.selection_score) + '\n';
  }
  return out;
}

/// Pair ids are row indices (0-based) in file order.
inline std::vector<MorphPair> read_pairs_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  if (csv::split(kPairsCsvHeader) != table.header) {
    throw Error(ErrorCode::InvalidArgument, "unexpected pairs CSV header in " + path.string());
  }
  std::vector<MorphPair> pairs;
  for (const auto& row : table.rows) {
    pairs.push_back({csv::parse_number<std::uint32_t>(row[0]), csv::parse_number<std::uint32_t>(row[1]),
                     csv::parse_number<std::uint32_t>(row[2]), csv::parse_number<std::uint32_t>(row[3]),
                     csv::parse_number<double>(row[4])});
  }
  return pairs;
}

}  // namespace morphmap
