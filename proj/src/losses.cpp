#include "logitclip/losses.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "logitclip/errors.hpp"

namespace logitclip {

bool Combo::operator==(const Combo& other) const {
  auto same = [](const std::shared_ptr<const BaseLoss>& a, const std::shared_ptr<const BaseLoss>& b) {
    if (!a || !b) return a == b;
    return *a == *b;
  };
  return alpha == other.alpha && beta == other.beta && same(active, other.active) &&
         same(passive, other.passive);
}

Combo make_combo(double alpha, BaseLoss active, double beta, BaseLoss passive) {
  return Combo{alpha, beta, std::make_shared<const BaseLoss>(std::move(active)),
               std::make_shared<const BaseLoss>(std::move(passive))};
}

BaseLoss nce_mae() { return make_combo(50.0, base::Nce{}, 1.0, base::Mae{}); }

BaseLoss nce_agce() { return make_combo(50.0, base::Nce{}, 0.1, base::Agce{1.8, 3.0}); }

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace

std::string loss_name(const BaseLoss& loss) {
  return std::visit(Overloaded{
                        [](const base::Ce&) { return std::string("ce"); },
                        [](const base::Focal&) { return std::string("focal"); },
                        [](const base::Mae&) { return std::string("mae"); },
                        [](const base::Gce&) { return std::string("gce"); },
                        [](const base::Sce&) { return std::string("sce"); },
                        [](const base::PHuberCe&) { return std::string("phuber_ce"); },
                        [](const base::TaylorCe&) { return std::string("taylor_ce"); },
                        [](const base::Nce&) { return std::string("nce"); },
                        [](const base::Ael&) { return std::string("ael"); },
                        [](const base::Aul&) { return std::string("aul"); },
                        [](const base::Agce&) { return std::string("agce"); },
                        [](const Combo&) { return std::string("combo"); },
                    },
                    loss.as_variant());
}

std::string describe(const BaseLoss& loss) {
  return std::visit(
      Overloaded{
          [](const base::Focal& l) { return "focal(gamma=" + fmt(l.gamma) + ")"; },
          [](const base::Gce& l) { return "gce(q=" + fmt(l.q) + ")"; },
          [](const base::Sce& l) {
            return "sce(alpha=" + fmt(l.alpha) + ",beta=" + fmt(l.beta) + ",A=" + fmt(l.a_clamp) + ")";
          },
          [](const base::PHuberCe& l) { return "phuber_ce(tau=" + fmt(l.tau_h) + ")"; },
          [](const base::TaylorCe& l) { return "taylor_ce(T=" + std::to_string(l.order) + ")"; },
          [](const base::Ael& l) { return "ael(a=" + fmt(l.a) + ")"; },
          [](const base::Aul& l) { return "aul(a=" + fmt(l.a) + ",q=" + fmt(l.q) + ")"; },
          [](const base::Agce& l) { return "agce(a=" + fmt(l.a) + ",q=" + fmt(l.q) + ")"; },
          [](const Combo& c) {
            const std::string a = c.active ? describe(*c.active) : "?";
            const std::string p = c.passive ? describe(*c.passive) : "?";
            return fmt(c.alpha) + "*" + a + "+" + fmt(c.beta) + "*" + p;
          },
          [&loss](const auto&) { return loss_name(loss); },
      },
      loss.as_variant());
}

void validate(const BaseLoss& loss) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  std::visit(Overloaded{
                 [](const base::Ce&) {},
                 [](const base::Mae&) {},
                 [](const base::Nce&) {},
                 [&](const base::Focal& l) { require(l.gamma >= 0.0, "focal: gamma must be >= 0"); },
                 [&](const base::Gce& l) { require(l.q > 0.0 && l.q <= 1.0, "gce: q must be in (0, 1]"); },
                 [&](const base::Sce& l) {
                   require(l.alpha > 0.0 && l.beta > 0.0, "sce: alpha and beta must be positive");
                   require(l.a_clamp < 0.0, "sce: log(0) clamp must be negative");
                 },
                 [&](const base::PHuberCe& l) { require(l.tau_h > 1.0, "phuber_ce: tau must exceed 1"); },
                 [&](const base::TaylorCe& l) { require(l.order >= 1, "taylor_ce: order must be >= 1"); },
                 [&](const base::Ael& l) { require(l.a > 0.0, "ael: a must be positive"); },
                 [&](const base::Aul& l) {
                   require(l.a > 1.0, "aul: a must exceed 1");
                   require(l.q > 0.0, "aul: q must be positive");
                 },
                 [&](const base::Agce& l) {
                   require(l.a > 0.0 && l.q > 0.0, "agce: a and q must be positive");
                 },
                 [&](const Combo& c) {
                   require(c.alpha >= 0.0 && c.beta >= 0.0, "combo: weights must be >= 0");
                   require(c.active && c.passive, "combo: both components are required");
                   validate(*c.active);
                   validate(*c.passive);
                 },
             },
             loss.as_variant());
}

void LossSpec::validate() const {
  logitclip::validate(base);
  clip.validate();
  if (!(norm_reg_lambda >= 0.0) || !std::isfinite(norm_reg_lambda)) {
    throw ConfigError("norm_reg_lambda must be a finite non-negative number");
  }
}

namespace {

// A point on the simplex seen through both p and log p, so CE-type terms stay
// exact when p_y underflows.
struct SimplexPoint {
  std::span<const double> p;
  std::span<const double> logp;
};

// Loss value and its gradient with respect to log-probabilities.
struct LogSpaceTerm {
  double value = 0.0;
  Vec64 dlogp;
};

double complement(const SimplexPoint& s, std::size_t y) {
  double acc = 0.0;
  for (std::size_t k = 0; k < s.p.size(); ++k) {
    if (k != y) acc += s.p[k];
  }
  return acc;
}

LogSpaceTerm single_class(std::size_t k, std::size_t y, double value, double dlogp_y) {
  LogSpaceTerm t{value, Vec64(k, 0.0)};
  t.dlogp[y] = dlogp_y;
  return t;
}

LogSpaceTerm evaluate(const BaseLoss& loss, const SimplexPoint& s, std::size_t y) {
  const std::size_t k = s.p.size();
  const double py = s.p[y];
  const double logpy = s.logp[y];
  return std::visit(
      Overloaded{
          [&](const base::Ce&) { return single_class(k, y, -logpy, -1.0); },
          [&](const base::Focal& l) {
            const double q = complement(s, y);
            if (l.gamma == 0.0) return single_class(k, y, -logpy, -1.0);
            const double w = std::pow(q, l.gamma);
            // d/du [(1-e^u)^g (-u)] = g p u (1-p)^(g-1) - (1-p)^g, zero in the limit q -> 0.
            const double shape = q > 0.0 ? l.gamma * py * logpy * std::pow(q, l.gamma - 1.0) : 0.0;
            return single_class(k, y, -w * logpy, shape - w);
          },
          [&](const base::Mae&) { return single_class(k, y, 2.0 * complement(s, y), -2.0 * py); },
          [&](const base::Gce& l) {
            const double pq = std::exp(l.q * logpy);
            return single_class(k, y, (1.0 - pq) / l.q, -pq);
          },
          [&](const base::Sce& l) {
            const double q = complement(s, y);
            return single_class(k, y, l.alpha * -logpy + l.beta * -l.a_clamp * q,
                                -l.alpha + l.beta * l.a_clamp * py);
          },
          [&](const base::PHuberCe& l) {
            if (logpy >= -std::log(l.tau_h)) return single_class(k, y, -logpy, -1.0);
            return single_class(k, y, -l.tau_h * py + std::log(l.tau_h) + 1.0, -l.tau_h * py);
          },
          [&](const base::TaylorCe& l) {
            const double q = complement(s, y);
            double value = 0.0;
            double dp = 0.0;
            double qt = 1.0;  // q^(t-1)
            for (int t = 1; t <= l.order; ++t) {
              dp += qt;
              qt *= q;
              value += qt / t;
            }
            return single_class(k, y, value, -py * dp);
          },
          [&](const base::Nce&) {
            for (double pk : s.p) {
              if (pk == 0.0) throw DomainError("nce: probability vector has a zero component");
            }
            double total = 0.0;
            for (double lp : s.logp) total -= lp;
            const double cey = -logpy;
            LogSpaceTerm t{cey / total, Vec64(k, cey / (total * total))};
            t.dlogp[y] -= 1.0 / total;
            return t;
          },
          [&](const base::Ael& l) {
            const double e = std::exp(-py / l.a);
            return single_class(k, y, e, -py / l.a * e);
          },
          [&](const base::Aul& l) {
            const double value = (std::pow(l.a - py, l.q) - std::pow(l.a - 1.0, l.q)) / l.q;
            return single_class(k, y, value, -py * std::pow(l.a - py, l.q - 1.0));
          },
          [&](const base::Agce& l) {
            const double value = (std::pow(l.a + 1.0, l.q) - std::pow(l.a + py, l.q)) / l.q;
            return single_class(k, y, value, -py * std::pow(l.a + py, l.q - 1.0));
          },
          [&](const Combo& c) {
            if (!c.active || !c.passive) throw ConfigError("combo: both components are required");
            LogSpaceTerm a = evaluate(*c.active, s, y);
            const LogSpaceTerm b = evaluate(*c.passive, s, y);
            a.value = c.alpha * a.value + c.beta * b.value;
            for (std::size_t j = 0; j < k; ++j) a.dlogp[j] = c.alpha * a.dlogp[j] + c.beta * b.dlogp[j];
            return a;
          },
      },
      loss.as_variant());
}

void check_class(std::span<const double> p, std::size_t y) {
  if (p.empty()) throw DimensionError("empty probability vector");
  if (y >= p.size()) throw DimensionError("class index " + std::to_string(y) + " out of range");
}

LogSpaceTerm evaluate_probs(const BaseLoss& loss, std::span<const double> p, std::size_t y) {
  check_class(p, y);
  Vec64 logp(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) logp[k] = std::log(p[k]);
  return evaluate(loss, SimplexPoint{p, logp}, y);
}

}  // namespace

double base_loss_value(const BaseLoss& loss, std::span<const double> p, std::size_t y) {
  return evaluate_probs(loss, p, y).value;
}

Vec64 base_loss_grad_p(const BaseLoss& loss, std::span<const double> p, std::size_t y) {
  LogSpaceTerm t = evaluate_probs(loss, p, y);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (t.dlogp[k] != 0.0) t.dlogp[k] /= p[k];
  }
  return t.dlogp;
}

double ce(std::span<const double> p, std::size_t y) {
  check_class(p, y);
  return p[y] > 0.0 ? -std::log(p[y]) : std::numeric_limits<double>::infinity();
}
double focal(std::span<const double> p, std::size_t y, double gamma) {
  return base_loss_value(base::Focal{gamma}, p, y);
}
double mae(std::span<const double> p, std::size_t y) { return base_loss_value(base::Mae{}, p, y); }
double gce(std::span<const double> p, std::size_t y, double q) {
  return base_loss_value(base::Gce{q}, p, y);
}
double rce(std::span<const double> p, std::size_t y, double a_clamp) {
  check_class(p, y);
  double rest = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k != y) rest += p[k];
  }
  return -a_clamp * rest;
}
double sce(std::span<const double> p, std::size_t y, double alpha, double beta, double a_clamp) {
  return base_loss_value(base::Sce{alpha, beta, a_clamp}, p, y);
}
double phuber_ce(std::span<const double> p, std::size_t y, double tau_h) {
  return base_loss_value(base::PHuberCe{tau_h}, p, y);
}
double taylor_ce(std::span<const double> p, std::size_t y, int order) {
  return base_loss_value(base::TaylorCe{order}, p, y);
}
double nce(std::span<const double> p, std::size_t y) { return base_loss_value(base::Nce{}, p, y); }
double ael(std::span<const double> p, std::size_t y, double a) {
  return base_loss_value(base::Ael{a}, p, y);
}
double aul(std::span<const double> p, std::size_t y, double a, double q) {
  return base_loss_value(base::Aul{a, q}, p, y);
}
double agce(std::span<const double> p, std::size_t y, double a, double q) {
  return base_loss_value(base::Agce{a, q}, p, y);
}
double combo(std::span<const double> p, std::size_t y, double alpha, double beta,
             const BaseLoss& active, const BaseLoss& passive) {
  return alpha * base_loss_value(active, p, y) + beta * base_loss_value(passive, p, y);
}

namespace {

struct Forward {
  Vec64 transformed;
  Vec64 logp;
  Vec64 p;
};

Forward forward(const LossSpec& spec, std::span<const double> z, std::size_t y) {
  if (z.empty()) throw DimensionError("empty logit vector");
  if (y >= z.size()) throw DimensionError("class index " + std::to_string(y) + " out of range");
  Forward f;
  f.transformed = apply_transform(spec.clip, z);
  f.logp = log_softmax(f.transformed);
  f.p.resize(f.logp.size());
  for (std::size_t k = 0; k < f.p.size(); ++k) f.p[k] = std::exp(f.logp[k]);
  return f;
}

}  // namespace

double ce_with_clip(std::span<const double> z, std::size_t y, double tau, NormOrder p) {
  return loss_value(LossSpec{base::Ce{}, ClipConfig::by_norm(tau, p), 0.0}, z, y);
}

double loss_value(const LossSpec& spec, std::span<const double> z, std::size_t y) {
  const Forward f = forward(spec, z, y);
  double value = evaluate(spec.base, SimplexPoint{f.p, f.logp}, y).value;
  if (spec.norm_reg_lambda > 0.0) value += spec.norm_reg_lambda * pnorm(z, NormOrder::L2);
  return value;
}

LossValueGrad loss_forward_backward(const LossSpec& spec, std::span<const double> z, std::size_t y) {
  if (!spec.clip.differentiable()) {
    throw ConfigError("gradient requested for clip-by-norm with a non-Euclidean norm");
  }
  const Forward f = forward(spec, z, y);
  const LogSpaceTerm term = evaluate(spec.base, SimplexPoint{f.p, f.logp}, y);

  // d/dc_j of phi(log softmax(c)) = g_j - p_j * sum_k g_k.
  double g_sum = 0.0;
  for (double g : term.dlogp) g_sum += g;
  Vec64 grad_c(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) grad_c[j] = term.dlogp[j] - f.p[j] * g_sum;

  LossValueGrad out{term.value, transform_jvp(spec.clip, z, grad_c)};
  if (spec.norm_reg_lambda > 0.0) {
    const double norm = pnorm(z, NormOrder::L2);
    out.value += spec.norm_reg_lambda * norm;
    if (norm > 0.0) {
      for (std::size_t j = 0; j < z.size(); ++j) out.grad_z[j] += spec.norm_reg_lambda * z[j] / norm;
    }
  }
  return out;
}

}  // namespace logitclip
