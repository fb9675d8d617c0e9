#include "logitclip/bounds.hpp"

#include <cmath>
#include <string>

#include "logitclip/errors.hpp"

namespace logitclip {

namespace {

void check(std::size_t k, double tau) {
  if (k < 2) throw DomainError("class count must be at least 2, got " + std::to_string(k));
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
}

// log(1 + (K-1) e^{2 tau}) = 2 tau + log((K-1) + e^{-2 tau}); finite for any tau.
double upper_bound(double km1, double tau) { return 2.0 * tau + std::log(km1 + std::exp(-2.0 * tau)); }

double lower_bound(double km1, double tau) { return std::log1p(km1 * std::exp(-2.0 * tau)); }

}  // namespace

LossBounds ce_clip_bounds(std::size_t k, double tau) {
  check(k, tau);
  const double km1 = static_cast<double>(k - 1);
  return LossBounds{lower_bound(km1, tau), upper_bound(km1, tau), k, tau};
}

double a_const(std::size_t k, double tau) {
  const LossBounds b = ce_clip_bounds(k, tau);
  return b.upper - b.lower;
}

double sym_risk_gap(std::size_t k, double tau, double eta) {
  check(k, tau);
  const double kd = static_cast<double>(k);
  if (!(eta >= 0.0) || !(eta < 1.0 - 1.0 / kd)) {
    throw DomainError("symmetric risk gap needs 0 <= eta < 1 - 1/K");
  }
  const double denom = (1.0 - eta) * kd - 1.0;
  if (!(denom > 0.0)) throw DomainError("symmetric risk gap denominator is not positive");
  return eta * kd / denom * a_const(k, tau);
}

double asym_risk_gap(std::size_t k, double tau, double mean_retention) {
  check(k, tau);
  if (!(mean_retention > 0.0) || mean_retention > 1.0) {
    throw DomainError("mean retention E[1 - eta_i] must lie in (0, 1]");
  }
  return static_cast<double>(k) * a_const(k, tau) * mean_retention;
}

double instance_risk_gap(std::size_t k, double tau, double mean_retention) {
  return asym_risk_gap(k, tau, mean_retention);
}

ProbabilityRange clipped_probability_range(std::size_t k, double tau) {
  const LossBounds b = ce_clip_bounds(k, tau);
  // M = e^{-upper}, N = e^{-lower}.
  return ProbabilityRange{std::exp(-b.upper), std::exp(-b.lower)};
}

LipschitzBound lipschitz_composite_bound(double lipschitz, std::size_t k, double tau, double phi_at_m) {
  if (!(lipschitz >= 0.0)) throw DomainError("Lipschitz constant must be non-negative");
  const ProbabilityRange r = clipped_probability_range(k, tau);
  return LipschitzBound{lipschitz * (r.max - r.min) + std::abs(phi_at_m), r};
}

double noisy_risk_decomposition(double clean_risk, double full_sum_risk, std::size_t k, double eta) {
  if (k < 2) throw DomainError("class count must be at least 2");
  const double km1 = static_cast<double>(k - 1);
  return (1.0 - eta * static_cast<double>(k) / km1) * clean_risk + eta / km1 * full_sum_risk;
}

}  // namespace logitclip
