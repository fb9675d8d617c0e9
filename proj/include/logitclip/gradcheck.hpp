#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "logitclip/losses.hpp"

namespace logitclip {

/// Central differences with per-coordinate step h_i = rel_step * max(1, |z_i|).
Vec64 finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                 std::span<const double> z, double rel_step = 1e-6);

/// ||a - n||_2 / max(1, ||a||_2, ||n||_2).
double gradient_relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// True when z (or one of its finite-difference stencil points) sits close
/// enough to a non-differentiable point of the composite loss that the
/// central difference straddles two smooth pieces.
bool near_kink(const LossSpec& spec, std::span<const double> z, std::size_t y, double rel_step = 1e-6);

struct GradCheckOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  double tolerance = 1e-6;
  double rel_step = 1e-6;
  /// Test hook: perturbs the first analytic gradient entry to prove the check can fail.
  bool corrupt_gradient = false;
};

struct GradCheckCase {
  std::string loss;
  std::string transform;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // kink-adjacent draws
  double max_rel_error = 0.0;
  bool passed = true;
};

/// Each of the 12 base losses (NCE+MAE stands for the active-passive family).
std::vector<BaseLoss> gradcheck_losses();
/// identity, clip-by-norm (tau = 2), clip-by-value (lambda = 2), LogitNorm (tau = 0.5).
std::vector<ClipConfig> gradcheck_transforms();

/// Draws `trials` random (z, y) cases per loss x transform combination.
/// Logits are U[-5, 5] scaled by a random factor in {0.1, 1, 3} over K in {2, 3, 5, 10}.
std::vector<GradCheckCase> run_gradcheck(std::span<const BaseLoss> losses, std::span<const ClipConfig> transforms,
                                         const GradCheckOptions& opts);

}  // namespace logitclip
