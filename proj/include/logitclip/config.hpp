#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "logitclip/losses.hpp"
#include "logitclip/model.hpp"
#include "logitclip/noise.hpp"
#include "logitclip/train.hpp"

namespace logitclip {

struct DatasetConfig {
  std::string kind = "gaussians";  // gaussians | two_moons | rings | csv
  std::size_t k = 4;
  std::size_t n = 4000;
  std::size_t d = 2;
  double separation = 3.0;
  std::size_t n_test = 1000;
  std::string csv_path;       // kind == csv
  std::string test_csv_path;  // kind == csv

  bool operator==(const DatasetConfig&) const = default;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::ReLU;

  bool operator==(const ModelConfig&) const = default;
};

struct SweepConfig {
  std::vector<double> grid = default_inv_tau_grid();
  double val_fraction = 0.2;

  bool operator==(const SweepConfig&) const = default;
};

struct CompareConfig {
  std::vector<BaseLoss> losses{base::Ce{}};
  std::vector<std::uint64_t> seeds{1};
  /// Transform used for the "with LC" arm; its threshold comes from the sweep.
  ClipConfig lc_clip = ClipConfig::by_norm(1.0);

  bool operator==(const CompareConfig&) const = default;
};

/// Everything needed to reproduce a run. `seed` fixes the dataset draw;
/// `train.seed` fixes label noise, initialisation and shuffling.
struct ExperimentConfig {
  DatasetConfig dataset;
  NoiseSpec noise;
  LossSpec loss;
  TrainConfig train;
  ModelConfig model;
  SweepConfig sweep;
  CompareConfig compare;
  std::uint64_t seed = 1;
  std::string output;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json base_loss_to_json(const BaseLoss& loss);
BaseLoss base_loss_from_json(const nlohmann::json& j);
nlohmann::json loss_spec_to_json(const LossSpec& spec);
LossSpec loss_spec_from_json(const nlohmann::json& j);
nlohmann::json clip_to_json(const ClipConfig& clip);
ClipConfig clip_from_json(const nlohmann::json& j);
nlohmann::json noise_to_json(const NoiseSpec& spec);
NoiseSpec noise_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Unknown keys and wrong types are ConfigErrors; missing keys take defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Parses a loss name such as "ce", "gce", "nce+mae" or "nce+agce" with default hyperparameters.
BaseLoss base_loss_from_name(const std::string& name);

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string content_hash(const nlohmann::json& j);

}  // namespace logitclip
