#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace logitclip {

using Vec64 = std::vector<double>;

/// Dense row-major matrix of doubles. Dimensions are fixed at construction.
class Mat64 {
 public:
  Mat64() = default;
  Mat64(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Mat64 identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  Vec64 multiply(std::span<const double> v) const;

  bool operator==(const Mat64&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Counter-based generator: output i is splitmix64(key + i * gamma).
///
/// Streams are a pure function of the key, so a labelled `split` yields a
/// substream that does not depend on how many draws the parent has made.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  Rng split(std::string_view label) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal (Box-Muller; the second variate is cached).
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  Rng(std::uint64_t seed, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

enum class NormOrder { L1, L2, Inf };

/// Accepts 1, 2 or +inf; anything else is a ConfigError.
NormOrder norm_order_from_double(double p);
double norm_order_to_double(NormOrder p);

double log_sum_exp(std::span<const double> v);
Vec64 stable_softmax(std::span<const double> z);
/// z - log_sum_exp(z), exact in the tails where softmax underflows.
Vec64 log_softmax(std::span<const double> z);
double pnorm(std::span<const double> z, NormOrder p);
/// J_ij = p_i (delta_ij - p_j).
Mat64 softmax_jacobian(std::span<const double> p);

std::size_t argmax(std::span<const double> v);

}  // namespace logitclip
