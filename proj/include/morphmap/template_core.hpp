#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "morphmap/error.hpp"

namespace morphmap {

/// A biometric template: a real embedding vector of dimension >= 2 with all
/// values finite. Arithmetic is done in double even when storage is float.
class Template {
 public:
  Template() = default;

  explicit Template(std::vector<double> values) : values_(std::move(values)) { validate(); }

  Template(std::initializer_list<double> values) : values_(values) { validate(); }

  template <typename T>
  static Template from_span(std::span<const T> values) {
    return Template(std::vector<double>(values.begin(), values.end()));
  }

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const Template&) const = default;

 private:
  void validate() const {
    if (values_.size() < 2) {
      throw Error(ErrorCode::InvalidArgument,
                  "template dimension must be >= 2, got " + std::to_string(values_.size()));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "template has non-finite value");
    }
  }

  std::vector<double> values_;
};

/// Interpolation weight in [0, 1]; 0 yields the first contributor.
class MorphWeight {
 public:
  constexpr MorphWeight() = default;
  explicit MorphWeight(double gamma) : gamma_(gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "morph weight must lie in [0, 1]");
    }
  }
  constexpr double value() const noexcept { return gamma_; }

 private:
  double gamma_ = 0.5;
};

inline constexpr double kZeroNormEpsilon = 1e-12;
inline constexpr double kAntipodalMargin = 1e-6;
inline constexpr double kParallelAngle = 1e-7;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void require_same_dim(const Template& a, const Template& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimMismatch,
                std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
}

inline std::vector<double> normalized(std::vector<double> v) {
  const double n = norm(v);
  if (n < kZeroNormEpsilon) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  for (double& x : v) x /= n;
  return v;
}

}  // namespace detail

inline double norm(const Template& t) { return detail::norm(t.values()); }

inline Template normalize(const Template& t) {
  return Template(detail::normalized(std::vector<double>(t.values().begin(), t.values().end())));
}

/// Cosine similarity, clamped to [-1, 1].
inline double cosine_similarity(const Template& a, const Template& b) {
  detail::require_same_dim(a, b);
  const double na = norm(a);
  const double nb = norm(b);
  if (na < kZeroNormEpsilon || nb < kZeroNormEpsilon) {
    throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  }
  return std::clamp(detail::dot(a.values(), b.values()) / (na * nb), -1.0, 1.0);
}

/// Angle in radians in [0, pi]. The norms divide the dot product inside the
/// arccos argument.
inline double angle_between(const Template& a, const Template& b) {
  return std::acos(cosine_similarity(a, b));
}

/// Spherical linear interpolation between unit templates a and b.
///
/// Returns sin((1-g)t)/sin(t) * a + sin(g t)/sin(t) * b with t the angle
/// between a and b. For t < 1e-7 the result is the renormalized linear blend.
/// Antipodal inputs (t >= pi - 1e-6) have no unique geodesic and are rejected.
inline Template slerp(const Template& a, const Template& b, MorphWeight weight = MorphWeight{}) {
  detail::require_same_dim(a, b);
  for (const Template* t : {&a, &b}) {
    if (std::abs(norm(*t) - 1.0) > 1e-6) {
      throw Error(ErrorCode::InvalidArgument, "slerp inputs must be unit-norm");
    }
  }
  const double gamma = weight.value();
  const double theta = angle_between(a, b);
  if (theta >= std::numbers::pi - kAntipodalMargin) {
    throw Error(ErrorCode::AntipodalInputs, "slerp geodesic is not unique for antipodal inputs");
  }

  std::vector<double> out(a.dim());
  if (theta < kParallelAngle) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - gamma) * a[i] + gamma * b[i];
    return Template(detail::normalized(std::move(out)));
  }
  const double s = std::sin(theta);
  const double wa = std::sin((1.0 - gamma) * theta) / s;
  const double wb = std::sin(gamma * theta) / s;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return Template(std::move(out));
}

}  // namespace morphmap
