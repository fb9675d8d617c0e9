#pragma once

#include <cstddef>

namespace logitclip {

/// Range of CE under logit clipping for K classes and threshold tau.
struct LossBounds {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t k = 0;
  double tau = 0.0;
};

/// log(1 + (K-1) e^{-2 tau}) <= CE <= log(1 + (K-1) e^{2 tau}).
LossBounds ce_clip_bounds(std::size_t k, double tau);

/// upper - lower of `ce_clip_bounds`, i.e. log((1+(K-1)e^{2tau}) / (1+(K-1)e^{-2tau})).
double a_const(std::size_t k, double tau);

/// eta K / ((1-eta) K - 1) * A. Requires 0 <= eta < 1 - 1/K.
double sym_risk_gap(std::size_t k, double tau, double eta);

/// K * A * E[1 - eta_i]; `mean_retention` must lie in (0, 1]. With the
/// instance-wise mean retention this is also the instance-dependent constant.
double asym_risk_gap(std::size_t k, double tau, double mean_retention);
double instance_risk_gap(std::size_t k, double tau, double mean_retention);

/// Extreme softmax probabilities reachable from logits in [-tau, tau]^K.
struct ProbabilityRange {
  double min = 0.0;  // 1 / (1 + (K-1) e^{2 tau})
  double max = 0.0;  // 1 / (1 + (K-1) e^{-2 tau})
};
ProbabilityRange clipped_probability_range(std::size_t k, double tau);

struct LipschitzBound {
  double bound = 0.0;
  ProbabilityRange range;
};

/// L (N - M) + |phi(M)| for a base loss that is L-Lipschitz on [M, N].
LipschitzBound lipschitz_composite_bound(double lipschitz, std::size_t k, double tau, double phi_at_m);

/// Expected loss under symmetric noise for a fixed classifier:
/// (1 - eta K / (K-1)) R_clean + eta / (K-1) * R_fullsum.
double noisy_risk_decomposition(double clean_risk, double full_sum_risk, std::size_t k, double eta);

}  // namespace logitclip
