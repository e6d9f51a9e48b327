#pragma once

// Stage orchestration for the CLI. Every stage reads its inputs from the
// output directory and writes its own artifacts there, so running the stages
// one by one and running them all in one process give identical files.
//
// Artifacts:
//   cohort_latent.btsf            latent reference/probe captures
//   templates_<frs>.btsf          per-recognizer templates
//   pairs.csv                     selected morph pairs (pair id = row index)
//   morph_latents.btsf            morph per pair in latent space (sample 0)
//   morphs_<frs>.btsf             morph variants per recognizer
//   scores_<frs>.csv              mated / non-mated / morph scores
//   histogram_<frs>.csv           score histograms, bin width 0.01
//   operating_points.csv          thresholds at the target FMR
//   map_matrix.csv, .txt          MAP matrix
//   sweep.csv                     threshold sweep with the selected MAP cell
//   variant_study.csv, resample_trace.csv, correlation.csv
//   report.json                   summary of all of the above

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphmap/calibration.hpp"
#include "morphmap/config.hpp"
#include "morphmap/csv.hpp"
#include "morphmap/datastore.hpp"
#include "morphmap/error.hpp"
#include "morphmap/frs_simulator.hpp"
#include "morphmap/map_analysis.hpp"
#include "morphmap/pair_selection.hpp"
#include "morphmap/scoring.hpp"
#include "morphmap/seeds.hpp"
#include "morphmap/stochastic_variation.hpp"

namespace morphmap::pipeline {

inline constexpr const char* kLatentStoreName = "latent";
inline constexpr int kReportSchemaVersion = 1;

namespace files {
inline std::string cohort() { return "cohort_latent.btsf"; }
inline std::string templates(const std::string& frs) { return "templates_" + frs + ".btsf"; }
inline std::string pairs() { return "pairs.csv"; }
inline std::string morph_latents() { return "morph_latents.btsf"; }
inline std::string morphs(const std::string& frs) { return "morphs_" + frs + ".btsf"; }
inline std::string scores(const std::string& frs) { return "scores_" + frs + ".csv"; }
inline std::string histogram(const std::string& frs) { return "histogram_" + frs + ".csv"; }
inline std::string operating_points() { return "operating_points.csv"; }
inline std::string map_csv() { return "map_matrix.csv"; }
inline std::string map_txt() { return "map_matrix.txt"; }
inline std::string sweep() { return "sweep.csv"; }
inline std::string variant_study() { return "variant_study.csv"; }
inline std::string resample_trace() { return "resample_trace.csv"; }
inline std::string correlation() { return "correlation.csv"; }
inline std::string report() { return "report.json"; }
}  // namespace files

/// Seed for the morph variants used in the MAP stage.
inline std::uint64_t map_variant_seed(std::uint64_t seed, std::uint32_t pair_id, std::uint32_t variant) {
  return derive_seed(seed, SeedTag::Variant, pair_id, variant);
}

/// Seed for the variant study (distinct from the MAP-stage variant seeds).
inline std::uint64_t study_master_seed(std::uint64_t seed) {
  return derive_seed(seed, SeedTag::Variant, 0xffffffffULL);
}

/// Loaded config, the regenerated ensemble, and cached inputs shared by the
/// stages of one process.
class Workspace {
 public:
  explicit Workspace(ExperimentConfig cfg)
      : cfg_(std::move(cfg)),
        ensemble_(make_ensemble(cfg_.ensemble, cfg_.cohort.latent_dim, cfg_.cohort.frs_dim, cfg_.seed)) {}

  const ExperimentConfig& config() const { return cfg_; }
  const FrsEnsemble& ensemble() const { return ensemble_; }
  std::filesystem::path path(const std::string& name) const { return cfg_.output_dir / name; }

  void ensure_output_dir() const {
    std::error_code ec;
    std::filesystem::create_directories(cfg_.output_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + cfg_.output_dir.string() + ": " + ec.message());
  }

  const TemplateStore& store(const std::string& name) {
    auto it = stores_.find(name);
    if (it == stores_.end()) {
      const auto p = path(name);
      if (!std::filesystem::exists(p)) {
        throw Error(ErrorCode::MissingArtifact, p.string() + " (run the earlier stages first)");
      }
      it = stores_.emplace(name, read_store(p)).first;
    }
    return it->second;
  }

  const std::vector<MorphPair>& pairs() {
    if (!pairs_) {
      const auto p = path(files::pairs());
      if (!std::filesystem::exists(p)) throw Error(ErrorCode::MissingArtifact, p.string());
      pairs_ = read_pairs_csv(p);
    }
    return *pairs_;
  }

  const ScoreSet& mated(std::size_t f) {
    auto& slot = mated_[f];
    if (!slot) slot = mated_scores(templates(f));
    return *slot;
  }

  const ScoreSet& nonmated(std::size_t f) {
    auto& slot = nonmated_[f];
    if (!slot) slot = nonmated_scores(templates(f), cfg_.calibration.nonmated_cap, cfg_.seed);
    return *slot;
  }

  const ScoreSet& morph(std::size_t f) {
    auto& slot = morph_[f];
    if (!slot) slot = morph_scores(store(files::morphs(frs_name(f))), pairs(), templates(f));
    return *slot;
  }

  const TemplateStore& templates(std::size_t f) { return store(files::templates(frs_name(f))); }
  const std::string& frs_name(std::size_t f) const { return ensemble_.models.at(f).name(); }

  std::vector<ScoreSet> morph_sets() {
    std::vector<ScoreSet> sets;
    for (std::size_t f = 0; f < ensemble_.size(); ++f) sets.push_back(morph(f));
    return sets;
  }

  /// Stage outputs are written through here; a rerun replaces them.
  void write(const std::string& name, const std::string& text) const { csv::write_text(path(name), text); }
  void write_store_file(const std::string& name, const TemplateStore& s) {
    write_store(path(name), s);
    stores_.erase(name);
  }

 private:
  ExperimentConfig cfg_;
  FrsEnsemble ensemble_;
  std::map<std::string, TemplateStore> stores_;
  std::optional<std::vector<MorphPair>> pairs_;
  std::map<std::size_t, std::optional<ScoreSet>> mated_;
  std::map<std::size_t, std::optional<ScoreSet>> nonmated_;
  std::map<std::size_t, std::optional<ScoreSet>> morph_;
};

inline void gen_cohort(Workspace& ws) {
  const auto& cfg = ws.config();
  const auto cohort = generate_cohort(cfg.cohort);
  TemplateStore store{kLatentStoreName, cfg.cohort.latent_dim, {}};
  store.records.reserve(cohort.samples.size());
  for (const auto& s : cohort.samples) store.records.push_back(make_record(s.subject_id, s.sample_id, s.role, Template(s.latent)));
  ws.ensure_output_dir();
  ws.write_store_file(files::cohort(), store);
}

inline void extract(Workspace& ws) {
  const auto& latent = ws.store(files::cohort());
  std::vector<LatentSample> samples;
  samples.reserve(latent.records.size());
  for (const auto& r : latent.records) {
    if (r.role == Role::MorphVariant) continue;
    samples.push_back({r.subject_id, r.sample_id, r.role, std::vector<double>(r.vector.begin(), r.vector.end())});
  }
  for (const auto& model : ws.ensemble().models) {
    ws.write_store_file(files::templates(model.name()), extract_store(model, samples));
  }
}

inline void select_morph_pairs(Workspace& ws) {
  const auto& cfg = ws.config().pairing;
  const auto table = nonmated_similarity(ws.templates(cfg.selector_frs));
  ws.write(files::pairs(), pairs_to_csv(select_pairs(table, cfg.n_pairs, cfg.max_uses_per_subject)));
}

inline void morph(Workspace& ws) {
  const auto& cfg = ws.config();
  const auto& ensemble = ws.ensemble();
  const auto& pairs = ws.pairs();
  const auto& attacker_store = ws.templates(ensemble.attacker_index);

  std::map<std::pair<std::uint32_t, std::uint32_t>, const TemplateRecord*> refs;
  for (const auto& r : attacker_store.records) {
    if (r.role == Role::Reference) refs[{r.subject_id, r.sample_id}] = &r;
  }
  auto ref = [&](std::uint32_t subject, std::uint32_t sample) {
    const auto it = refs.find({subject, sample});
    if (it == refs.end()) {
      throw Error(ErrorCode::InvalidArgument, "pair references missing reference sample " + std::to_string(subject) +
                                                  "/" + std::to_string(sample));
    }
    return to_template(*it->second);
  };

  TemplateStore latents{kLatentStoreName, cfg.cohort.latent_dim, {}};
  std::vector<TemplateStore> per_frs;
  for (const auto& m : ensemble.models) per_frs.push_back({m.name(), static_cast<std::uint32_t>(m.frs_dim()), {}});

  for (std::uint32_t id = 0; id < pairs.size(); ++id) {
    const auto& p = pairs[id];
    const auto latent = morph_latent(ensemble.attacker(), ref(p.subject_a, p.ref_sample_a), ref(p.subject_b, p.ref_sample_b));
    latents.records.push_back(make_record(id, 0, Role::MorphVariant, Template(latent)));
    // Downstream stages see the f32-rounded latent; reconstruct from it too.
    const auto stored = to_template(latents.records.back());
    const std::vector<double> stored_latent(stored.values().begin(), stored.values().end());
    for (std::uint32_t v = 0; v < cfg.map.variants_per_pair; ++v) {
      const auto variants = reconstruct_variant(ensemble, stored_latent, map_variant_seed(cfg.seed, id, v));
      for (std::size_t f = 0; f < ensemble.size(); ++f) {
        per_frs[f].records.push_back(make_record(id, v, Role::MorphVariant, variants[f]));
      }
    }
  }
  ws.write_store_file(files::morph_latents(), latents);
  for (const auto& s : per_frs) ws.write_store_file(files::morphs(s.frs_name), s);
}

inline void score(Workspace& ws) {
  for (std::size_t f = 0; f < ws.ensemble().size(); ++f) {
    const auto& m = ws.mated(f);
    const auto& nm = ws.nonmated(f);
    const auto& mo = ws.morph(f);
    ws.write(files::scores(ws.frs_name(f)), scores_to_csv({&m, &nm, &mo}));
    ws.write(files::histogram(ws.frs_name(f)), histograms_to_csv({&m, &nm, &mo}));
  }
}

inline std::vector<OperatingPoint> operating_points(Workspace& ws) {
  std::vector<OperatingPoint> points;
  for (std::size_t f = 0; f < ws.ensemble().size(); ++f) {
    points.push_back(operating_point(ws.mated(f), ws.nonmated(f), ws.config().calibration.target_fmr));
  }
  return points;
}

inline void calibrate(Workspace& ws) { ws.write(files::operating_points(), operating_points_to_csv(operating_points(ws))); }

inline std::vector<double> calibrated_thresholds(Workspace& ws) {
  const auto p = ws.path(files::operating_points());
  if (!std::filesystem::exists(p)) throw Error(ErrorCode::MissingArtifact, p.string() + " (run calibrate first)");
  const auto points = read_operating_points_csv(p);
  std::vector<double> thresholds;
  for (std::size_t f = 0; f < ws.ensemble().size(); ++f) {
    if (f >= points.size() || points[f].frs_name != ws.frs_name(f)) {
      throw Error(ErrorCode::InvalidArgument, "operating points do not match the ensemble");
    }
    thresholds.push_back(points[f].threshold);
  }
  return thresholds;
}

inline MapMatrix compute_map(Workspace& ws) {
  const auto& cfg = ws.config();
  const auto outcomes = attack_outcomes(ws.morph_sets(), calibrated_thresholds(ws), ws.pairs(), cfg.map.attempts);
  return map_matrix(outcomes, cfg.map.attempts, cfg.map_cols(), cfg.map.aggregation);
}

inline void map(Workspace& ws) {
  const auto m = compute_map(ws);
  ws.write(files::map_csv(), map_to_csv(m));
  ws.write(files::map_txt(), map_to_text(m));
}

struct SweepResult {
  ThresholdSweep sweep;
  std::vector<MapTracePoint> trace;
};

inline SweepResult compute_sweep(Workspace& ws) {
  const auto& cfg = ws.config();
  std::vector<SweepInput> inputs;
  for (std::size_t f = 0; f < ws.ensemble().size(); ++f) {
    inputs.push_back({ws.frs_name(f), ws.mated(f).values(), ws.nonmated(f).values()});
  }
  SweepResult r;
  r.sweep = threshold_sweep(inputs, cfg.calibration.target_fmr, cfg.sweep.range, cfg.sweep.steps);
  r.trace = map_under_sweep(ws.morph_sets(), ws.pairs(), r.sweep, cfg.map.attempts, cfg.map.attempts, cfg.map_cols(),
                            cfg.sweep.map_row, cfg.sweep_col(), cfg.map.aggregation);
  return r;
}

inline void sweep(Workspace& ws) {
  const auto r = compute_sweep(ws);
  ws.write(files::sweep(), sweep_to_csv(r.sweep, r.trace, ws.config().sweep.map_row, ws.config().sweep_col()));
}

struct VariantResult {
  VariantStudy study;
  std::vector<double> objective;
  ResampleResult resample;
  CorrelationMatrix correlation;
};

inline VariantResult compute_variants(Workspace& ws) {
  const auto& cfg = ws.config();
  const auto& pairs = ws.pairs();
  const auto pair_id = static_cast<std::uint32_t>(cfg.variants.pair_index);
  if (pair_id >= pairs.size()) throw Error(ErrorCode::InvalidArgument, "variants.pair_index beyond the selected pairs");
  const auto& pair = pairs[pair_id];

  const TemplateRecord* latent = nullptr;
  for (const auto& r : ws.store(files::morph_latents()).records) {
    if (r.subject_id == pair_id && r.role == Role::MorphVariant) latent = &r;
  }
  if (latent == nullptr) throw Error(ErrorCode::MissingArtifact, "morph latent for pair " + std::to_string(pair_id));
  const std::vector<double> morph_vec(latent->vector.begin(), latent->vector.end());

  std::vector<ContributorProbes> probes;
  for (std::size_t f = 0; f < ws.ensemble().size(); ++f) probes.push_back(contributor_probes(ws.templates(f), pair));

  VariantResult r;
  r.study = run_variant_study(pair_id, morph_vec, ws.ensemble(), probes, cfg.variants.n_variants,
                              study_master_seed(cfg.seed), cfg.variants.attack_score);
  r.objective = objective_values(r.study, cfg.variants.objective);
  r.resample = resample_maximize(r.objective);
  r.correlation = correlation_matrix(r.study, cfg.variants.correlation);
  return r;
}

inline void variants(Workspace& ws) {
  const auto r = compute_variants(ws);
  ws.write(files::variant_study(), variant_study_to_csv(r.study, r.objective));
  ws.write(files::resample_trace(), resample_trace_to_csv(r.resample));
  ws.write(files::correlation(), correlation_to_csv(r.correlation));
}

// ---------------------------------------------------------------------------
// Report

namespace detail {

inline csv::Table require_csv(const std::filesystem::path& dir, const std::string& name) {
  const auto p = dir / name;
  if (!std::filesystem::exists(p)) throw Error(ErrorCode::MissingArtifact, p.string());
  return csv::read(p);
}

inline double num(const std::string& s) { return csv::parse_number<double>(s); }

}  // namespace detail

/// Summarizes the artifacts in `dir` as one JSON document (schema in
/// docs/report.schema.json). Contains no timestamps or paths, so identical
/// artifacts give a byte-identical report.
inline std::string build_report(const std::filesystem::path& dir) {
  using nlohmann::ordered_json;
  ordered_json report;
  report["schema"] = "morphmap.report";
  report["schema_version"] = kReportSchemaVersion;

  const auto ops = read_operating_points_csv([&] {
    const auto p = dir / files::operating_points();
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::MissingArtifact, p.string());
    return p;
  }());
  ordered_json op_json = ordered_json::array();
  for (const auto& p : ops) {
    op_json.push_back({{"frs", p.frs_name},
                       {"threshold", p.threshold},
                       {"target_fmr", p.target_fmr},
                       {"achieved_fmr", p.achieved_fmr},
                       {"fnmr", p.fnmr},
                       {"n_nonmated", p.n_nonmated},
                       {"n_mated", p.n_mated}});
  }
  report["operating_points"] = op_json;

  const auto map_table = detail::require_csv(dir, files::map_csv());
  ordered_json cells = ordered_json::array();
  for (const auto& row : map_table.rows) {
    ordered_json r = ordered_json::array();
    for (std::size_t c = 1; c < row.size(); ++c) r.push_back(detail::num(row[c]));
    cells.push_back(r);
  }
  report["map_matrix"] = {{"rows", map_table.rows.size()},
                          {"cols", map_table.header.size() - 1},
                          {"cells", cells}};

  const auto sweep_table = detail::require_csv(dir, files::sweep());
  const std::string map_column = sweep_table.header.back();
  ordered_json steps = ordered_json::array();
  for (const auto& row : sweep_table.rows) {
    const std::size_t n = row.size();
    steps.push_back({{"offset", detail::num(row[0])},
                     {"avg_fmr", detail::num(row[n - 3])},
                     {"avg_fnmr", detail::num(row[n - 2])},
                     {"map", detail::num(row[n - 1])}});
  }
  report["sweep"] = {{"map_cell", map_column}, {"steps", steps}};

  const auto study = detail::require_csv(dir, files::variant_study());
  const auto trace = detail::require_csv(dir, files::resample_trace());
  std::vector<double> objective;
  for (const auto& row : study.rows) objective.push_back(detail::num(row.back()));
  if (objective.empty()) throw Error(ErrorCode::MissingArtifact, "variant study is empty");
  const auto best = resample_maximize(objective);
  report["variant_study"] = {{"n_variants", study.rows.size()},
                             {"best_variant", best.best_variant},
                             {"best_value", best.best_value},
                             {"final_running_max", detail::num(trace.rows.back().back())}};

  const auto corr = detail::require_csv(dir, files::correlation());
  ordered_json names = ordered_json::array();
  ordered_json matrix = ordered_json::array();
  for (const auto& row : corr.rows) {
    names.push_back(row[0]);
    ordered_json r = ordered_json::array();
    for (std::size_t c = 1; c < row.size(); ++c) r.push_back(detail::num(row[c]));
    matrix.push_back(r);
  }
  report["correlation"] = {{"frs", names}, {"matrix", matrix}};
  return report.dump(2) + "\n";
}

inline void report(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::MissingArtifact, dir.string() + " is not a directory");
  const auto text = build_report(dir);
  csv::write_text(dir / files::report(), text);
}

inline void run_all(Workspace& ws) {
  gen_cohort(ws);
  extract(ws);
  select_morph_pairs(ws);
  morph(ws);
  score(ws);
  calibrate(ws);
  map(ws);
  sweep(ws);
  variants(ws);
  report(ws.config().output_dir);
}

}  // namespace morphmap::pipeline
