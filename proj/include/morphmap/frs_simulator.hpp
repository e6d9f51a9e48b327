#pragma once

// Synthetic face recognition ensemble.
//
// Subjects are unit prototypes in a shared identity latent space. A capture is
// the prototype plus isotropic Gaussian noise, renormalized. Each recognizer
// maps a latent to its own template space through a projection with
// orthonormal rows, adds its own measurement noise and renormalizes. Because
// every projection preserves inner products, a morph built in one
// recognizer's space carries over to the others.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "morphmap/datastore.hpp"
#include "morphmap/error.hpp"
#include "morphmap/parallel.hpp"
#include "morphmap/seeds.hpp"
#include "morphmap/template_core.hpp"

namespace morphmap {

struct IdentityLatent {
  std::uint32_t id = 0;
  std::vector<double> prototype;
};

struct LatentSample {
  std::uint32_t subject_id = 0;
  std::uint32_t sample_id = 0;
  Role role = Role::Reference;
  std::vector<double> latent;
};

struct CohortConfig {
  std::uint32_t n_subjects = 325;
  std::uint32_t refs_per_subject = 4;
  std::uint32_t probes_per_subject = 3;
  std::uint32_t latent_dim = 512;
  std::uint32_t frs_dim = 512;
  double reference_noise_sigma = 0.05;
  double probe_noise_multiplier = 1.5;
  std::uint64_t master_seed = 20240917;

  double probe_noise_sigma() const { return reference_noise_sigma * probe_noise_multiplier; }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (n_subjects < 1) fail("n_subjects must be >= 1");
    if (refs_per_subject < 1) fail("refs_per_subject must be >= 1");
    if (probes_per_subject < 1) fail("probes_per_subject must be >= 1");
    if (latent_dim < 2) fail("latent_dim must be >= 2");
    if (frs_dim < 2 || frs_dim > latent_dim) fail("frs_dim must lie in [2, latent_dim]");
    if (!(reference_noise_sigma >= 0.0) || !std::isfinite(reference_noise_sigma)) {
      fail("reference_noise_sigma must be finite and >= 0");
    }
    if (!(probe_noise_multiplier >= 1.0) || !std::isfinite(probe_noise_multiplier)) {
      fail("probe_noise_multiplier must be finite and >= 1");
    }
  }
};

struct Cohort {
  std::vector<IdentityLatent> identities;
  /// Subject-major; within a subject, references (by sample id) then probes.
  std::vector<LatentSample> samples;
};

namespace detail {

inline std::vector<double> gaussian_vector(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = normal(rng);
  return v;
}

/// normalize(base + sigma * eta), eta ~ N(0, I) drawn from `seed`.
inline std::vector<double> perturb_on_sphere(std::span<const double> base, double sigma,
                                             std::uint64_t seed) {
  std::vector<double> v(base.begin(), base.end());
  if (sigma > 0.0) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& x : v) x += sigma * normal(rng);
  }
  return normalized(std::move(v));
}

}  // namespace detail

/// Draws identity prototypes and their reference/probe latent captures.
/// Deterministic in `cfg.master_seed`; each subject draws from its own child seed.
inline Cohort generate_cohort(const CohortConfig& cfg) {
  cfg.validate();
  Cohort cohort;
  cohort.identities.resize(cfg.n_subjects);
  const std::size_t per_subject = std::size_t{cfg.refs_per_subject} + cfg.probes_per_subject;
  cohort.samples.resize(per_subject * cfg.n_subjects);

  parallel_for(cfg.n_subjects, [&](std::size_t s) {
    const auto id = static_cast<std::uint32_t>(s);
    Rng rng(derive_seed(cfg.master_seed, SeedTag::Subject, id));
    auto prototype = detail::normalized(detail::gaussian_vector(rng, cfg.latent_dim));

    std::size_t slot = s * per_subject;
    auto emit = [&](Role role, std::uint32_t count, double sigma) {
      for (std::uint32_t k = 0; k < count; ++k) {
        const auto seed = derive_seed(cfg.master_seed, SeedTag::Sample, id,
                                      static_cast<std::uint64_t>(role), k);
        cohort.samples[slot++] = {id, k, role, detail::perturb_on_sphere(prototype, sigma, seed)};
      }
    };
    emit(Role::Reference, cfg.refs_per_subject, cfg.reference_noise_sigma);
    emit(Role::Probe, cfg.probes_per_subject, cfg.probe_noise_sigma());
    cohort.identities[s] = {id, std::move(prototype)};
  });
  return cohort;
}

/// One synthetic recognizer.
class FrsModel {
 public:
  FrsModel(std::string name, Eigen::MatrixXd projection, double sample_noise_sigma,
           double recon_noise_sigma, std::uint64_t seed)
      : name_(std::move(name)),
        projection_(std::move(projection)),
        sample_noise_sigma_(sample_noise_sigma),
        recon_noise_sigma_(recon_noise_sigma),
        seed_(seed) {
    if (projection_.rows() < 2 || projection_.rows() > projection_.cols()) {
      throw Error(ErrorCode::InvalidConfig, "projection must be D_frs x D_latent with 2 <= D_frs <= D_latent");
    }
    const Eigen::MatrixXd gram = projection_ * projection_.transpose();
    const double deviation =
        (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    if (deviation > 1e-6) throw Error(ErrorCode::InvalidConfig, "projection rows are not orthonormal");
    if (!(sample_noise_sigma_ >= 0.0) || !(recon_noise_sigma_ >= 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "noise sigmas must be >= 0");
    }
  }

  /// Projection with orthonormal rows from the QR factorization of a seeded
  /// Gaussian matrix.
  static FrsModel random(std::string name, std::uint32_t frs_dim, std::uint32_t latent_dim,
                         double sample_noise_sigma, double recon_noise_sigma, std::uint64_t seed) {
    if (frs_dim < 2 || frs_dim > latent_dim) {
      throw Error(ErrorCode::InvalidConfig, "frs_dim must lie in [2, latent_dim]");
    }
    Rng rng(derive_seed(seed, SeedTag::Projection, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd gaussian(latent_dim, frs_dim);
    for (Eigen::Index c = 0; c < gaussian.cols(); ++c) {
      for (Eigen::Index r = 0; r < gaussian.rows(); ++r) gaussian(r, c) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(latent_dim, frs_dim);
    return FrsModel(std::move(name), q.transpose(), sample_noise_sigma, recon_noise_sigma, seed);
  }

  static FrsModel identity(std::string name, std::uint32_t dim, double sample_noise_sigma = 0.0,
                           double recon_noise_sigma = 0.0, std::uint64_t seed = 0) {
    return FrsModel(std::move(name), Eigen::MatrixXd::Identity(dim, dim), sample_noise_sigma,
                    recon_noise_sigma, seed);
  }

  const std::string& name() const noexcept { return name_; }
  const Eigen::MatrixXd& projection() const noexcept { return projection_; }
  std::size_t latent_dim() const noexcept { return static_cast<std::size_t>(projection_.cols()); }
  std::size_t frs_dim() const noexcept { return static_cast<std::size_t>(projection_.rows()); }
  double sample_noise_sigma() const noexcept { return sample_noise_sigma_; }
  double recon_noise_sigma() const noexcept { return recon_noise_sigma_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Template = normalize(P * latent + sigma_sample * eta). The noise term is
  /// drawn from `noise_seed` and only added when `with_sample_noise` is set.
  Template extract(std::span<const double> latent, bool with_sample_noise,
                   std::uint64_t noise_seed = 0) const {
    if (latent.size() != latent_dim()) {
      throw Error(ErrorCode::DimMismatch, "latent dim " + std::to_string(latent.size()) +
                                              " vs model latent dim " + std::to_string(latent_dim()));
    }
    const Eigen::Map<const Eigen::VectorXd> x(latent.data(), static_cast<Eigen::Index>(latent.size()));
    const Eigen::VectorXd y = projection_ * x;
    std::vector<double> out(y.data(), y.data() + y.size());
    const double sigma = with_sample_noise ? sample_noise_sigma_ : 0.0;
    return Template(detail::perturb_on_sphere(out, sigma, noise_seed));
  }

  /// Maps a template back to the latent space (P^T t, renormalized). Exact
  /// inverse of noise-free extraction when the projection is square.
  std::vector<double> invert(const Template& t) const {
    if (t.dim() != frs_dim()) throw Error(ErrorCode::DimMismatch, "template dim vs model frs dim");
    const Eigen::Map<const Eigen::VectorXd> y(t.values().data(), static_cast<Eigen::Index>(t.dim()));
    const Eigen::VectorXd x = projection_.transpose() * y;
    return detail::normalized(std::vector<double>(x.data(), x.data() + x.size()));
  }

 private:
  std::string name_;
  Eigen::MatrixXd projection_;
  double sample_noise_sigma_;
  double recon_noise_sigma_;
  std::uint64_t seed_;
};

/// Parameters of the default ensemble: four recognizers standing in for the
/// ArcFace / AdaFace / CurricularFace / MagFace line-up. The last one is the
/// attacker (the recognizer whose template space is morphed).
struct EnsembleConfig {
  std::vector<std::string> names = {"arcface_sim", "adaface_sim", "curricularface_sim", "magface_sim"};
  std::vector<double> sample_noise_sigmas = {0.010, 0.012, 0.014, 0.008};
  double recon_noise_sigma = 0.04;
  std::size_t attacker_index = 3;

  void validate() const {
    if (names.empty()) throw Error(ErrorCode::InvalidConfig, "ensemble needs at least one model");
    if (names.size() != sample_noise_sigmas.size()) {
      throw Error(ErrorCode::InvalidConfig, "ensemble names and sample_noise_sigmas differ in length");
    }
    if (attacker_index >= names.size()) throw Error(ErrorCode::InvalidConfig, "attacker_index out of range");
    if (!(recon_noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "recon_noise_sigma must be >= 0");
    for (const auto& n : names) {
      if (n.empty() || n.size() > kFrsNameBytes) {
        throw Error(ErrorCode::InvalidConfig, "model names must have 1..32 bytes");
      }
    }
  }
};

struct FrsEnsemble {
  std::vector<FrsModel> models;
  std::size_t attacker_index = 0;

  std::size_t size() const noexcept { return models.size(); }
  const FrsModel& attacker() const { return models.at(attacker_index); }

  void validate() const {
    if (models.empty()) throw Error(ErrorCode::InvalidConfig, "ensemble needs at least one model");
    if (attacker_index >= models.size()) throw Error(ErrorCode::InvalidConfig, "attacker_index out of range");
    for (const auto& m : models) {
      if (m.latent_dim() != models.front().latent_dim()) {
        throw Error(ErrorCode::InvalidConfig, "ensemble models disagree on latent dim");
      }
    }
  }
};

inline FrsEnsemble make_ensemble(const EnsembleConfig& cfg, std::uint32_t latent_dim,
                                 std::uint32_t frs_dim, std::uint64_t master_seed) {
  cfg.validate();
  FrsEnsemble ensemble;
  ensemble.attacker_index = cfg.attacker_index;
  ensemble.models.reserve(cfg.names.size());
  for (std::size_t i = 0; i < cfg.names.size(); ++i) {
    ensemble.models.push_back(FrsModel::random(cfg.names[i], frs_dim, latent_dim,
                                               cfg.sample_noise_sigmas[i], cfg.recon_noise_sigma,
                                               derive_seed(master_seed, SeedTag::Model, i)));
  }
  ensemble.validate();
  return ensemble;
}

/// Noise seed for extracting one capture with a model.
inline std::uint64_t capture_noise_seed(const FrsModel& model, std::uint32_t subject_id,
                                        std::uint32_t sample_id, Role role) {
  return derive_seed(model.seed(), SeedTag::ExtractNoise, subject_id,
                     static_cast<std::uint64_t>(role), sample_id);
}

/// Extracts every cohort capture with one model into a template store.
inline TemplateStore extract_store(const FrsModel& model, const std::vector<LatentSample>& samples) {
  TemplateStore store{model.name(), static_cast<std::uint32_t>(model.frs_dim()), {}};
  store.records.resize(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const auto& s = samples[i];
    const auto t = model.extract(s.latent, true, capture_noise_seed(model, s.subject_id, s.sample_id, s.role));
    store.records[i] = make_record(s.subject_id, s.sample_id, s.role, t);
  });
  return store;
}

/// Morph in the attacker's template space, then mapped back to the latent
/// space (the simulated template inversion).
inline std::vector<double> morph_latent(const FrsModel& attacker, const Template& ref_a,
                                        const Template& ref_b, MorphWeight gamma = MorphWeight{}) {
  return attacker.invert(slerp(normalize(ref_a), normalize(ref_b), gamma));
}

/// One stochastic reconstruction of a fixed morph: a shared latent
/// v = normalize(morph + sigma_recon * eta(variant_seed)) using the attacker's
/// reconstruction noise, then extracted by every model with its own noise.
inline std::vector<Template> reconstruct_variant(const FrsEnsemble& ensemble,
                                                 std::span<const double> morph_latent_vec,
                                                 std::uint64_t variant_seed) {
  ensemble.validate();
  if (morph_latent_vec.size() != ensemble.attacker().latent_dim()) {
    throw Error(ErrorCode::DimMismatch, "morph latent dim vs ensemble latent dim");
  }
  const auto v = detail::perturb_on_sphere(morph_latent_vec, ensemble.attacker().recon_noise_sigma(),
                                           derive_seed(variant_seed, SeedTag::Variant, 0));
  std::vector<Template> out;
  out.reserve(ensemble.size());
  for (std::size_t f = 0; f < ensemble.size(); ++f) {
    out.push_back(ensemble.models[f].extract(v, true, derive_seed(variant_seed, SeedTag::ExtractNoise, f)));
  }
  return out;
}

}  // namespace morphmap
