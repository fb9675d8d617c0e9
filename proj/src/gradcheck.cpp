#include "logitclip/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "logitclip/errors.hpp"

namespace logitclip {

Vec64 finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                 std::span<const double> z, double rel_step) {
  Vec64 point(z.begin(), z.end());
  Vec64 grad(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(z[i]));
    point[i] = z[i] + h;
    const double up = f(point);
    point[i] = z[i] - h;
    const double down = f(point);
    point[i] = z[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double gradient_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw DimensionError("gradient lengths differ");
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({1.0, std::sqrt(na), std::sqrt(nn)});
}

namespace {

constexpr double kClipMargin = 1e-3;

// Collects the phuber_ce thresholds hidden anywhere inside a loss.
void phuber_thresholds(const BaseLoss& loss, std::vector<double>& out) {
  if (const auto* ph = std::get_if<base::PHuberCe>(&loss.as_variant())) {
    out.push_back(ph->tau_h);
  } else if (const auto* c = std::get_if<Combo>(&loss.as_variant())) {
    if (c->active) phuber_thresholds(*c->active, out);
    if (c->passive) phuber_thresholds(*c->passive, out);
  }
}

// Which smooth piece of the composite loss z falls in.
std::vector<bool> piece(const LossSpec& spec, std::span<const double> z, std::size_t y,
                        const std::vector<double>& taus) {
  std::vector<bool> sig;
  if (spec.clip.kind == ClipKind::ByNorm) sig.push_back(pnorm(z, spec.clip.p) >= spec.clip.tau);
  if (spec.clip.kind == ClipKind::ByValue) {
    for (double v : z) sig.push_back(std::abs(v) < spec.clip.tau);
  }
  if (!taus.empty()) {
    const Vec64 logp = log_softmax(apply_transform(spec.clip, z));
    for (double t : taus) sig.push_back(logp[y] >= -std::log(t));
  }
  return sig;
}

}  // namespace

bool near_kink(const LossSpec& spec, std::span<const double> z, std::size_t y, double rel_step) {
  if (spec.clip.kind == ClipKind::ByNorm && std::abs(pnorm(z, spec.clip.p) - spec.clip.tau) <= kClipMargin) {
    return true;
  }
  if (spec.clip.kind == ClipKind::ByValue) {
    for (double v : z) {
      if (std::abs(std::abs(v) - spec.clip.tau) < kClipMargin) return true;
    }
  }
  std::vector<double> taus;
  phuber_thresholds(spec.base, taus);
  if (taus.empty() && spec.clip.kind != ClipKind::ByNorm && spec.clip.kind != ClipKind::ByValue) return false;

  // A stencil ten times wider than the one used for differencing.
  const auto centre = piece(spec, z, y, taus);
  Vec64 point(z.begin(), z.end());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double h = 10.0 * rel_step * std::max(1.0, std::abs(z[i]));
    for (double s : {-h, h}) {
      point[i] = z[i] + s;
      if (piece(spec, point, y, taus) != centre) return true;
    }
    point[i] = z[i];
  }
  return false;
}

std::vector<BaseLoss> gradcheck_losses() {
  return {base::Ce{},  base::Focal{}, base::Mae{}, base::Gce{}, base::Sce{},  base::PHuberCe{},
          base::TaylorCe{}, base::Nce{}, base::Ael{}, base::Aul{}, base::Agce{}, nce_mae(), nce_agce()};
}

std::vector<ClipConfig> gradcheck_transforms() {
  return {ClipConfig::identity(), ClipConfig::by_norm(2.0), ClipConfig::by_value(2.0), ClipConfig::logit_norm(0.5)};
}

std::vector<GradCheckCase> run_gradcheck(std::span<const BaseLoss> losses, std::span<const ClipConfig> transforms,
                                         const GradCheckOptions& opts) {
  static constexpr std::size_t kClasses[] = {2, 3, 5, 10};
  static constexpr double kScales[] = {0.1, 1.0, 3.0};
  std::vector<GradCheckCase> out;
  const Rng root(opts.seed);
  for (std::size_t li = 0; li < losses.size(); ++li) {
    for (std::size_t ti = 0; ti < transforms.size(); ++ti) {
      const LossSpec spec{losses[li], transforms[ti], 0.0};
      GradCheckCase result;
      result.loss = describe(spec.base);
      result.transform = to_string(spec.clip.kind);
      Rng rng = root.split(li).split(ti);
      for (std::size_t t = 0; t < opts.trials; ++t) {
        const std::size_t k = kClasses[rng.index(std::size(kClasses))];
        const double scale = kScales[rng.index(std::size(kScales))];
        Vec64 z(k);
        for (double& v : z) v = scale * rng.uniform(-5.0, 5.0);
        const std::size_t y = rng.index(k);
        if (near_kink(spec, z, y, opts.rel_step)) {
          ++result.skipped;
          continue;
        }
        LossValueGrad vg = loss_forward_backward(spec, z, y);
        if (opts.corrupt_gradient) vg.grad_z[0] += 1e-3 * (1.0 + std::abs(vg.grad_z[0]));
        const Vec64 numeric = finite_difference_gradient(
            [&](std::span<const double> x) { return loss_value(spec, x, y); }, z, opts.rel_step);
        const double err = gradient_relative_error(vg.grad_z, numeric);
        result.max_rel_error = std::max(result.max_rel_error, std::isnan(err) ? INFINITY : err);
        ++result.checked;
      }
      result.passed = result.max_rel_error < opts.tolerance;
      out.push_back(std::move(result));
    }
  }
  return out;
}

}  // namespace logitclip
