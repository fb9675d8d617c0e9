#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>

#include "logitclip/numerics.hpp"
#include "logitclip/transforms.hpp"

namespace logitclip {

// Base losses over the probability simplex. Defaults are the settings used for
// the CIFAR-10 experiments of the LogitClip study.
namespace base {

struct Ce {
  bool operator==(const Ce&) const = default;
};
struct Focal {
  double gamma = 0.5;
  bool operator==(const Focal&) const = default;
};
struct Mae {
  bool operator==(const Mae&) const = default;
};
struct Gce {
  double q = 0.7;
  bool operator==(const Gce&) const = default;
};
/// alpha * CE + beta * RCE, with log(0) in RCE replaced by `a_clamp`.
struct Sce {
  double alpha = 0.5;
  double beta = 1.0;
  double a_clamp = -4.0;
  bool operator==(const Sce&) const = default;
};
struct PHuberCe {
  double tau_h = 10.0;
  bool operator==(const PHuberCe&) const = default;
};
struct TaylorCe {
  int order = 2;
  bool operator==(const TaylorCe&) const = default;
};
struct Nce {
  bool operator==(const Nce&) const = default;
};
struct Ael {
  double a = 2.5;
  bool operator==(const Ael&) const = default;
};
struct Aul {
  double a = 5.5;
  double q = 3.0;
  bool operator==(const Aul&) const = default;
};
struct Agce {
  double a = 1.8;
  double q = 3.0;
  bool operator==(const Agce&) const = default;
};

}  // namespace base

struct BaseLoss;

/// alpha * active + beta * passive.
struct Combo {
  double alpha = 1.0;
  double beta = 1.0;
  std::shared_ptr<const BaseLoss> active;
  std::shared_ptr<const BaseLoss> passive;

  bool operator==(const Combo& other) const;
};

struct BaseLoss
    : std::variant<base::Ce, base::Focal, base::Mae, base::Gce, base::Sce, base::PHuberCe,
                   base::TaylorCe, base::Nce, base::Ael, base::Aul, base::Agce, Combo> {
  using variant::variant;

  const variant& as_variant() const { return *this; }
  bool operator==(const BaseLoss& other) const { return as_variant() == other.as_variant(); }
};

Combo make_combo(double alpha, BaseLoss active, double beta, BaseLoss passive);
/// NCE+MAE with alpha=50, beta=1.
BaseLoss nce_mae();
/// NCE+AGCE with alpha=50, beta=0.1, a=1.8, q=3.
BaseLoss nce_agce();

/// Lower-case identifier used in configs ("ce", "gce", "combo", ...).
std::string loss_name(const BaseLoss& loss);
/// Human-readable label including hyperparameters that differ from defaults.
std::string describe(const BaseLoss& loss);
/// Throws ConfigError for out-of-range hyperparameters.
void validate(const BaseLoss& loss);

/// Full composite loss: base(softmax(transform(z))) + norm_reg_lambda * ||z||_2.
struct LossSpec {
  BaseLoss base = base::Ce{};
  ClipConfig clip;
  double norm_reg_lambda = 0.0;

  void validate() const;
  bool operator==(const LossSpec&) const = default;
};

struct LossValueGrad {
  double value = 0.0;
  Vec64 grad_z;
};

// Probability-space evaluations. `p` must lie on the simplex and y < p.size().
double ce(std::span<const double> p, std::size_t y);
double focal(std::span<const double> p, std::size_t y, double gamma = 0.5);
double mae(std::span<const double> p, std::size_t y);
double gce(std::span<const double> p, std::size_t y, double q = 0.7);
/// Reverse cross entropy with log(0) := a_clamp, i.e. -a_clamp * (1 - p_y).
double rce(std::span<const double> p, std::size_t y, double a_clamp = -4.0);
double sce(std::span<const double> p, std::size_t y, double alpha = 0.5, double beta = 1.0,
           double a_clamp = -4.0);
double phuber_ce(std::span<const double> p, std::size_t y, double tau_h = 10.0);
double taylor_ce(std::span<const double> p, std::size_t y, int order = 2);
/// Throws DomainError if any p_k is zero.
double nce(std::span<const double> p, std::size_t y);
double ael(std::span<const double> p, std::size_t y, double a = 2.5);
double aul(std::span<const double> p, std::size_t y, double a = 5.5, double q = 3.0);
double agce(std::span<const double> p, std::size_t y, double a = 1.8, double q = 3.0);
double combo(std::span<const double> p, std::size_t y, double alpha, double beta,
             const BaseLoss& active, const BaseLoss& passive);

double base_loss_value(const BaseLoss& loss, std::span<const double> p, std::size_t y);
/// d(loss)/dp, the input to the softmax Jacobian chain rule.
Vec64 base_loss_grad_p(const BaseLoss& loss, std::span<const double> p, std::size_t y);

/// CE after clip-by-norm. Any norm order is accepted.
double ce_with_clip(std::span<const double> z, std::size_t y, double tau, NormOrder p);

/// Forward-only composite loss; accepts every norm order.
double loss_value(const LossSpec& spec, std::span<const double> z, std::size_t y);

/// Value and gradient with respect to the raw logits. Throws ConfigError when
/// the transform has no analytic Jacobian and DomainError for NCE on a
/// distribution with an exactly-zero component.
LossValueGrad loss_forward_backward(const LossSpec& spec, std::span<const double> z, std::size_t y);

}  // namespace logitclip
