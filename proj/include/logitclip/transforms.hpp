#pragma once

#include <span>
#include <string>

#include "logitclip/numerics.hpp"

namespace logitclip {

enum class ClipKind { Identity, ByNorm, ByValue, LogitNorm };

/// Logit-level transform applied before softmax.
///
/// `tau` is the norm threshold for ByNorm, the per-component bound for
/// ByValue and the temperature for LogitNorm; it is ignored by Identity.
/// `p` only matters for ByNorm.
struct ClipConfig {
  ClipKind kind = ClipKind::Identity;
  double tau = 1.0;
  NormOrder p = NormOrder::L2;

  static ClipConfig identity() { return {}; }
  static ClipConfig by_norm(double tau, NormOrder p = NormOrder::L2) {
    return {ClipKind::ByNorm, tau, p};
  }
  static ClipConfig by_value(double lambda) { return {ClipKind::ByValue, lambda, NormOrder::L2}; }
  static ClipConfig logit_norm(double temperature) {
    return {ClipKind::LogitNorm, temperature, NormOrder::L2};
  }

  /// Throws ConfigError when tau is not a positive finite number.
  void validate() const;
  /// Whether an analytic Jacobian exists (ByNorm needs p = 2).
  bool differentiable() const noexcept;

  bool operator==(const ClipConfig&) const = default;
};

std::string to_string(ClipKind kind);
ClipKind clip_kind_from_string(const std::string& name);

/// tau * z / ||z||_p when ||z||_p >= tau, otherwise z.
Vec64 clip_by_norm(std::span<const double> z, double tau, NormOrder p);
/// Directional derivative of the Euclidean clip at z along v.
Vec64 clip_by_norm_jvp(std::span<const double> z, double tau, std::span<const double> v);

Vec64 clip_by_value(std::span<const double> z, double lambda);
/// Pass-through strictly inside (-lambda, lambda), zero elsewhere.
Vec64 clip_by_value_jvp(std::span<const double> z, double lambda, std::span<const double> v);

/// z / (tau * ||z||_2). Throws DomainError for the zero vector.
Vec64 logit_norm(std::span<const double> z, double tau);
Vec64 logit_norm_jvp(std::span<const double> z, double tau, std::span<const double> v);

Vec64 apply_transform(const ClipConfig& cfg, std::span<const double> z);

/// Jacobian-vector product of `apply_transform`. Every supported Jacobian is
/// symmetric, so the same call also serves as the vector-Jacobian product
/// during backpropagation. Throws ConfigError for ByNorm with p != 2.
Vec64 transform_jvp(const ClipConfig& cfg, std::span<const double> z, std::span<const double> v);

}  // namespace logitclip
