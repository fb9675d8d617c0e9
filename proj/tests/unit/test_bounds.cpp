#include <cmath>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "doctest.h"
#include "logitclip/bounds.hpp"
#include "logitclip/errors.hpp"
#include "logitclip/losses.hpp"

using namespace logitclip;
using boost::multiprecision::cpp_dec_float_50;

namespace {

struct Oracle {
  double lower, upper, a;
};

// 50-digit evaluation of the textbook formulas, independent of the stable forms.
Oracle oracle(std::size_t k, double tau) {
  const cpp_dec_float_50 km1 = static_cast<double>(k - 1), t = tau;
  const cpp_dec_float_50 lo = log(1 + km1 * exp(-2 * t));
  const cpp_dec_float_50 hi = log(1 + km1 * exp(2 * t));
  return {lo.convert_to<double>(), hi.convert_to<double>(), cpp_dec_float_50(hi - lo).convert_to<double>()};
}

}  // namespace

TEST_CASE("ce_clip_bounds spot values against the high-precision oracle") {
  const LossBounds b = ce_clip_bounds(10, 1.0);
  const Oracle o = oracle(10, 1.0);
  CHECK(std::abs(b.lower - o.lower) <= 1e-14);
  CHECK(std::abs(b.upper - o.upper) <= 1e-14);
  CHECK(std::abs(o.lower - 0.796611) <= 1e-5);
  CHECK(std::abs(o.upper - 4.212150) <= 1e-5);
  CHECK(std::abs(a_const(10, 1.0) - o.a) <= 1e-14);
  CHECK(std::abs(o.a - 3.415539) <= 1e-5);
}

TEST_CASE("ce_clip_bounds agrees with the oracle over a grid") {
  for (std::size_t k : {2, 3, 10, 100, 1000}) {
    for (double tau : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
      const LossBounds b = ce_clip_bounds(k, tau);
      const Oracle o = oracle(k, tau);
      CHECK(b.lower == doctest::Approx(o.lower).epsilon(1e-13));
      CHECK(b.upper == doctest::Approx(o.upper).epsilon(1e-13));
      CHECK(a_const(k, tau) == doctest::Approx(o.a).epsilon(1e-12));
    }
  }
}

TEST_CASE("ce_clip_bounds limits") {
  const LossBounds big = ce_clip_bounds(10, 1000.0);
  CHECK(big.lower >= 0.0);
  CHECK(big.lower < 1e-300);
  CHECK(big.upper == doctest::Approx(2000.0 + std::log(9.0)).epsilon(1e-15));
  CHECK(std::isfinite(ce_clip_bounds(10, 400.0).upper));
  const LossBounds tiny = ce_clip_bounds(2, 1e-9);
  CHECK(tiny.lower == doctest::Approx(std::log(2.0)).epsilon(1e-8));
  CHECK(tiny.upper == doctest::Approx(std::log(2.0)).epsilon(1e-8));
  CHECK(a_const(10, 1e-9) < 1e-8);
}

TEST_CASE("ce_clip_bounds errors") {
  CHECK_THROWS_AS(ce_clip_bounds(1, 1.0), DomainError);
  CHECK_THROWS_AS(ce_clip_bounds(10, 0.0), DomainError);
  CHECK_THROWS_AS(a_const(1, 1.0), DomainError);
}

TEST_CASE("bound shapes in tau and K") {
  for (std::size_t k : {2, 10, 100}) {
    double prev_lo = INFINITY, prev_hi = -INFINITY, prev_a = -INFINITY;
    for (double tau = 0.1; tau <= 5.0; tau += 0.1) {
      const LossBounds b = ce_clip_bounds(k, tau);
      CHECK(b.upper > prev_hi);
      CHECK(b.lower < prev_lo);
      CHECK(a_const(k, tau) > prev_a);
      CHECK(b.lower <= std::log(static_cast<double>(k)));
      CHECK(b.upper >= std::log(static_cast<double>(k)));
      CHECK(b.lower > 0.0);
      prev_lo = b.lower;
      prev_hi = b.upper;
      prev_a = a_const(k, tau);
    }
  }
  for (double tau : {0.5, 1.0, 2.0}) {
    double prev_lo = -INFINITY, prev_hi = -INFINITY;
    for (std::size_t k = 2; k <= 200; k += 7) {
      const LossBounds b = ce_clip_bounds(k, tau);
      CHECK(b.upper > prev_hi);
      CHECK(b.lower > prev_lo);
      prev_lo = b.lower;
      prev_hi = b.upper;
    }
  }
}

TEST_CASE("a_const is monotone") { CHECK(a_const(10, 2.0) > a_const(10, 1.0)); }

TEST_CASE("sym_risk_gap") {
  CHECK(sym_risk_gap(10, 1.0, 0.5) == doctest::Approx(1.25 * oracle(10, 1.0).a).epsilon(1e-14));
  CHECK(sym_risk_gap(10, 1.0, 0.5) == doctest::Approx(4.269424).epsilon(1e-5));
  CHECK(sym_risk_gap(10, 1.0, 0.0) == 0.0);
  double prev = 0.0;
  for (double eta : {0.1, 0.3, 0.5, 0.7, 0.85, 0.89, 0.899, 0.8999}) {
    const double g = sym_risk_gap(10, 1.0, eta);
    CHECK(g > prev);
    prev = g;
  }
  CHECK(prev > 1e3);
  CHECK_THROWS_AS(sym_risk_gap(10, 1.0, 0.9), DomainError);
  CHECK_THROWS_AS(sym_risk_gap(10, 1.0, -0.1), DomainError);
  CHECK(sym_risk_gap(10, 1e-9, 0.5) < 1e-8);
}

TEST_CASE("asym and instance risk gaps") {
  CHECK(asym_risk_gap(10, 1.0, 0.6) == doctest::Approx(20.493235).epsilon(1e-5));
  CHECK(asym_risk_gap(10, 1.0, 1.0) == doctest::Approx(34.155392).epsilon(1e-5));
  CHECK(asym_risk_gap(10, 1.0, 0.6) == doctest::Approx(10 * oracle(10, 1.0).a * 0.6).epsilon(1e-14));
  CHECK(instance_risk_gap(10, 1.0, 0.6) == asym_risk_gap(10, 1.0, 0.6));
  CHECK_THROWS_AS(asym_risk_gap(10, 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(asym_risk_gap(10, 1.0, 1.5), DomainError);
}

TEST_CASE("clipped probability range and Lipschitz bound") {
  const ProbabilityRange r = clipped_probability_range(10, 1.0);
  CHECK(r.min == doctest::Approx(1.0 / (1 + 9 * std::exp(2.0))).epsilon(1e-14));
  CHECK(r.max == doctest::Approx(1.0 / (1 + 9 * std::exp(-2.0))).epsilon(1e-14));
  CHECK(r.min == doctest::Approx(0.0148145).epsilon(1e-5));
  CHECK(r.max == doctest::Approx(0.4508522).epsilon(1e-6));
  const LipschitzBound zero = lipschitz_composite_bound(0.0, 10, 1.0, -2.5);
  CHECK(zero.bound == 2.5);
  CHECK_THROWS_AS(lipschitz_composite_bound(-1.0, 10, 1.0, 0.0), DomainError);
}

TEST_CASE("Lipschitz bound dominates observed clipped CE") {
  const std::size_t k = 10;
  const double tau = 1.0;
  const ProbabilityRange r = clipped_probability_range(k, tau);
  const LipschitzBound lb = lipschitz_composite_bound(1.0 / r.min, k, tau, -std::log(r.min));
  Rng rng(51);
  double worst = 0.0;
  for (int t = 0; t < 100000; ++t) {
    Vec64 z(k);
    for (double& v : z) v = rng.uniform(-50, 50);
    worst = std::max(worst, std::abs(ce_with_clip(z, rng.index(k), tau, NormOrder::Inf)));
  }
  CHECK(lb.bound >= worst);
}

TEST_CASE("noisy_risk_decomposition") {
  CHECK(noisy_risk_decomposition(0.7, 5.0, 4, 0.0) == 0.7);
  // Symmetric loss: clean risk = full_sum / K gives a noisy risk independent of eta.
  for (double eta : {0.1, 0.3, 0.5, 0.7}) {
    CHECK(noisy_risk_decomposition(6.0 / 4, 6.0, 4, eta) == doctest::Approx(1.5).epsilon(1e-14));
  }
  // Affine in eta with slope (full_sum - K clean) / (K - 1).
  const double r0 = noisy_risk_decomposition(0.4, 6.0, 4, 0.2), r1 = noisy_risk_decomposition(0.4, 6.0, 4, 0.5);
  CHECK((r1 - r0) / 0.3 == doctest::Approx((6.0 - 4 * 0.4) / 3).epsilon(1e-12));
}
