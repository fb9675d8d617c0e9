#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "logitclip/noise.hpp"
#include "logitclip/numerics.hpp"

namespace logitclip {

enum class SyntheticKind { Gaussians, TwoMoons, Rings };

std::string to_string(SyntheticKind kind);
SyntheticKind synthetic_kind_from_string(const std::string& name);

/// Clean, class-balanced synthetic classification data with every feature
/// standardised to zero mean and unit variance.
///
/// gaussians: unit-variance blobs with means on a circle of radius `separation`
///            in the first two features.
/// two_moons: interleaved half circles, jitter sd 0.5 / separation; moon pairs
///            are laid side by side when K > 2.
/// rings:     concentric circles of radius 1..K, jitter sd 0.5 / separation.
/// Features beyond the first two are N(0, 1) distractors.
NoisyDataset gen_synthetic(SyntheticKind kind, std::size_t k, std::size_t n, std::size_t d,
                           double separation, Rng& rng);

struct TrainTestData {
  NoisyDataset train;
  NoisyDataset test;
};

/// Draws train and test sets from the same distribution; both are standardised
/// with the training-set statistics.
TrainTestData gen_synthetic_split(SyntheticKind kind, std::size_t k, std::size_t n_train,
                                  std::size_t n_test, std::size_t d, double separation, const Rng& rng);

/// CSV with header f0,...,f{d-1},label and 0-based labels. Labels are loaded as
/// the clean labels.
NoisyDataset load_dataset_csv(const std::filesystem::path& path, std::size_t k);
void save_dataset_csv(const std::filesystem::path& path, const NoisyDataset& data, bool noisy = false);

}  // namespace logitclip
