#include "logitclip/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "logitclip/errors.hpp"

namespace logitclip {

Mat64::Mat64(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat64 Mat64::identity(std::size_t n) {
  Mat64 m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vec64 Mat64::multiply(std::span<const double> v) const {
  if (v.size() != cols_) throw DimensionError("Mat64::multiply: vector length mismatch");
  Vec64 out(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) acc += (*this)(r, c) * v[c];
    out[r] = acc;
  }
  return out;
}

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : Rng(seed, mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

Rng::Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

Rng Rng::split(std::string_view label) const {
  return Rng(seed_, mix64(key_ ^ mix64(fnv1a(label))));
}

Rng Rng::split(std::uint64_t index) const {
  return Rng(seed_, mix64(key_ ^ mix64(index + 0x3c6ef372fe94f82bULL)));
}

std::uint64_t Rng::next_u64() { return mix64(key_ + kGamma * ++counter_); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw DimensionError("Rng::index: empty range");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

NormOrder norm_order_from_double(double p) {
  if (p == 1.0) return NormOrder::L1;
  if (p == 2.0) return NormOrder::L2;
  if (std::isinf(p) && p > 0) return NormOrder::Inf;
  throw ConfigError("unsupported norm order " + std::to_string(p) + " (expected 1, 2 or inf)");
}

double norm_order_to_double(NormOrder p) {
  switch (p) {
    case NormOrder::L1: return 1.0;
    case NormOrder::L2: return 2.0;
    case NormOrder::Inf: return std::numeric_limits<double>::infinity();
  }
  return 2.0;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw DimensionError("log_sum_exp: empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

Vec64 stable_softmax(std::span<const double> z) {
  if (z.empty()) throw DimensionError("stable_softmax: empty vector");
  const double m = *std::max_element(z.begin(), z.end());
  Vec64 out(z.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    acc += out[i];
  }
  for (double& x : out) x /= acc;
  return out;
}

Vec64 log_softmax(std::span<const double> z) {
  const double lse = log_sum_exp(z);
  Vec64 out(z.begin(), z.end());
  for (double& x : out) x -= lse;
  return out;
}

double pnorm(std::span<const double> z, NormOrder p) {
  switch (p) {
    case NormOrder::L1: {
      double acc = 0.0;
      for (double x : z) acc += std::abs(x);
      return acc;
    }
    case NormOrder::L2: {
      // Scaled accumulation avoids overflow for entries near DBL_MAX.
      double scale = 0.0;
      for (double x : z) scale = std::max(scale, std::abs(x));
      if (scale == 0.0) return 0.0;
      double acc = 0.0;
      for (double x : z) {
        const double r = x / scale;
        acc += r * r;
      }
      return scale * std::sqrt(acc);
    }
    case NormOrder::Inf: {
      double m = 0.0;
      for (double x : z) m = std::max(m, std::abs(x));
      return m;
    }
  }
  throw ConfigError("pnorm: unsupported norm order");
}

Mat64 softmax_jacobian(std::span<const double> p) {
  const std::size_t k = p.size();
  Mat64 jac(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      jac(i, j) = p[i] * ((i == j ? 1.0 : 0.0) - p[j]);
    }
  }
  return jac;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw DimensionError("argmax: empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace logitclip
