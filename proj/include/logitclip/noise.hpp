#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "logitclip/numerics.hpp"

namespace logitclip {

using Labels = std::vector<std::size_t>;

/// Row-stochastic K x K matrix; entry (j, k) is p(noisy = k | clean = j).
class TransitionMatrix {
 public:
  /// Throws ConfigError unless square, entries in [0, 1] and rows summing to 1 (1e-12).
  explicit TransitionMatrix(Mat64 entries);

  std::size_t k() const noexcept { return entries_.rows(); }
  double operator()(std::size_t from, std::size_t to) const { return entries_(from, to); }
  const Mat64& entries() const noexcept { return entries_; }

  /// Average of the diagonal entry over the given clean labels, E[1 - eta_i].
  double mean_retention(const Labels& clean) const;

 private:
  Mat64 entries_;
};

/// Source -> target class pairs. Sources and targets must each be distinct.
using PairMap = std::vector<std::pair<std::size_t, std::size_t>>;

/// truck->automobile, bird->airplane, deer->horse, cat<->dog on CIFAR-10 indices.
PairMap cifar10_pair_map();

TransitionMatrix symmetric_matrix(std::size_t k, double eta);
TransitionMatrix asymmetric_matrix(std::size_t k, const PairMap& pairs, double eta);
/// Class j flips to (j + 1) mod K with probability eta.
TransitionMatrix circular_matrix(std::size_t k, double eta);

/// Resamples every label from its row of `t`, one uniform draw per label.
Labels inject(const Labels& clean, const TransitionMatrix& t, Rng& rng);

struct InstanceNoise {
  Labels noisy;
  Vec64 rates;  // per-sample flip probability
};

/// Feature-dependent label noise.
///
/// A random projection of the features gives every sample a raw flip score;
/// scores are rescaled so their mean is exactly `eta`, with each rate capped at
/// min(2 eta, 1). A flipped label moves to class k != y with probability
/// proportional to exp(x . W_k), W a second random projection.
InstanceNoise inject_instance_dependent(const Mat64& features, const Labels& clean, std::size_t k,
                                        double eta, Rng& rng);

/// Reads `index,noisy_label` CSV. Indices must cover 0..n-1 exactly once, where n
/// is `expected_n` when given and the row count otherwise.
Labels load_external_noisy(const std::filesystem::path& path, std::size_t k,
                           std::optional<std::size_t> expected_n = std::nullopt);
void write_external_noisy(const std::filesystem::path& path, const Labels& labels);

struct NoiseMeasurement {
  double rate = 0.0;  // fraction of labels that differ
  Mat64 confusion;    // row-normalised clean x noisy counts; empty rows get 1 on the diagonal
};

NoiseMeasurement measure_noise(const Labels& clean, const Labels& noisy, std::size_t k);

namespace noise {

struct None {
  bool operator==(const None&) const = default;
};
struct Symmetric {
  double eta = 0.0;
  bool operator==(const Symmetric&) const = default;
};
struct AsymmetricPairs {
  PairMap pairs;
  double eta = 0.0;
  bool operator==(const AsymmetricPairs&) const = default;
};
struct AsymmetricCircular {
  double eta = 0.0;
  bool operator==(const AsymmetricCircular&) const = default;
};
struct InstanceDependent {
  double eta = 0.0;
  bool operator==(const InstanceDependent&) const = default;
};
struct External {
  std::string path;
  bool operator==(const External&) const = default;
};

}  // namespace noise

struct NoiseSpec {
  std::variant<noise::None, noise::Symmetric, noise::AsymmetricPairs, noise::AsymmetricCircular,
               noise::InstanceDependent, noise::External>
      kind = noise::None{};
  std::string stream = "noise";

  void validate(std::size_t k) const;
  bool operator==(const NoiseSpec&) const = default;
};

std::string noise_kind_name(const NoiseSpec& spec);

struct NoisyDataset {
  Mat64 features;
  std::optional<Labels> clean_labels;
  Labels noisy_labels;
  std::size_t k = 0;

  std::size_t n() const noexcept { return features.rows(); }
  std::size_t d() const noexcept { return features.cols(); }
  /// Throws DimensionError on inconsistent sizes or out-of-range labels.
  void validate() const;
};

struct AppliedNoise {
  Labels noisy;
  double mean_retention = 1.0;  // E[1 - eta_i] over the clean labels
};

/// Corrupts clean labels per `spec`, drawing from `rng.split(spec.stream)`.
AppliedNoise apply_noise(const NoiseSpec& spec, const Mat64& features, const Labels& clean,
                         std::size_t k, const Rng& rng);

}  // namespace logitclip
