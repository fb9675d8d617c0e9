#include "logitclip/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "logitclip/errors.hpp"

namespace logitclip {

void ClipConfig::validate() const {
  if (kind == ClipKind::Identity) return;
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ConfigError("clip threshold must be positive and finite, got " + std::to_string(tau));
  }
}

bool ClipConfig::differentiable() const noexcept {
  return kind != ClipKind::ByNorm || p == NormOrder::L2;
}

std::string to_string(ClipKind kind) {
  switch (kind) {
    case ClipKind::Identity: return "identity";
    case ClipKind::ByNorm: return "by_norm";
    case ClipKind::ByValue: return "by_value";
    case ClipKind::LogitNorm: return "logit_norm";
  }
  return "identity";
}

ClipKind clip_kind_from_string(const std::string& name) {
  if (name == "identity" || name == "none") return ClipKind::Identity;
  if (name == "by_norm") return ClipKind::ByNorm;
  if (name == "by_value") return ClipKind::ByValue;
  if (name == "logit_norm") return ClipKind::LogitNorm;
  throw ConfigError("unknown clip kind '" + name + "'");
}

namespace {

void require_same_size(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("tangent length does not match logits");
}

// (scale) * (v - z (z.v) / ||z||^2)
Vec64 scaled_tangent_projection(std::span<const double> z, double norm, double scale,
                                std::span<const double> v) {
  double dot = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) dot += z[i] * v[i];
  const double radial = dot / (norm * norm);
  Vec64 out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = scale * (v[i] - z[i] * radial);
  return out;
}

}  // namespace

Vec64 clip_by_norm(std::span<const double> z, double tau, NormOrder p) {
  const double norm = pnorm(z, p);
  Vec64 out(z.begin(), z.end());
  if (norm >= tau && norm > 0.0) {
    const double scale = tau / norm;
    for (double& x : out) x *= scale;
  }
  return out;
}

Vec64 clip_by_norm_jvp(std::span<const double> z, double tau, std::span<const double> v) {
  require_same_size(z, v);
  const double norm = pnorm(z, NormOrder::L2);
  if (norm < tau || norm == 0.0) return Vec64(v.begin(), v.end());
  return scaled_tangent_projection(z, norm, tau / norm, v);
}

Vec64 clip_by_value(std::span<const double> z, double lambda) {
  Vec64 out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::clamp(z[i], -lambda, lambda);
  return out;
}

Vec64 clip_by_value_jvp(std::span<const double> z, double lambda, std::span<const double> v) {
  require_same_size(z, v);
  Vec64 out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = (z[i] > -lambda && z[i] < lambda) ? v[i] : 0.0;
  }
  return out;
}

Vec64 logit_norm(std::span<const double> z, double tau) {
  const double norm = pnorm(z, NormOrder::L2);
  if (norm == 0.0) throw DomainError("logit_norm: zero logit vector has no direction");
  Vec64 out(z.begin(), z.end());
  const double scale = 1.0 / (tau * norm);
  for (double& x : out) x *= scale;
  return out;
}

Vec64 logit_norm_jvp(std::span<const double> z, double tau, std::span<const double> v) {
  require_same_size(z, v);
  const double norm = pnorm(z, NormOrder::L2);
  if (norm == 0.0) throw DomainError("logit_norm: zero logit vector has no direction");
  return scaled_tangent_projection(z, norm, 1.0 / (tau * norm), v);
}

Vec64 apply_transform(const ClipConfig& cfg, std::span<const double> z) {
  switch (cfg.kind) {
    case ClipKind::Identity: return Vec64(z.begin(), z.end());
    case ClipKind::ByNorm: return clip_by_norm(z, cfg.tau, cfg.p);
    case ClipKind::ByValue: return clip_by_value(z, cfg.tau);
    case ClipKind::LogitNorm: return logit_norm(z, cfg.tau);
  }
  return Vec64(z.begin(), z.end());
}

Vec64 transform_jvp(const ClipConfig& cfg, std::span<const double> z, std::span<const double> v) {
  switch (cfg.kind) {
    case ClipKind::Identity:
      require_same_size(z, v);
      return Vec64(v.begin(), v.end());
    case ClipKind::ByNorm:
      if (cfg.p != NormOrder::L2) {
        throw ConfigError("clip-by-norm gradients are only available for the Euclidean norm");
      }
      return clip_by_norm_jvp(z, cfg.tau, v);
    case ClipKind::ByValue: return clip_by_value_jvp(z, cfg.tau, v);
    case ClipKind::LogitNorm: return logit_norm_jvp(z, cfg.tau, v);
  }
  return Vec64(v.begin(), v.end());
}

}  // namespace logitclip
