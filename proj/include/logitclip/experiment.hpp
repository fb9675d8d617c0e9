#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "logitclip/config.hpp"

namespace logitclip {

inline constexpr const char* kToolVersion = "0.1.0";

struct PreparedData {
  NoisyDataset train;  // carries both clean and noisy labels
  NoisyDataset test;
  double measured_noise_rate = 0.0;
  double mean_retention = 1.0;
};

/// Builds the dataset from `Rng(cfg.seed).split("dataset")` and corrupts the
/// training labels from `Rng(run_seed)`.
PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t run_seed);

/// Factory for a freshly He-initialised model drawn from `Rng(run_seed).split("init")`.
ModelFactory model_factory(const ExperimentConfig& cfg, std::size_t d, std::size_t k, std::uint64_t run_seed);

struct RunRecord {
  std::string label;  // loss description, suffixed with "+LC" for the clipped arm
  LossSpec spec;      // the spec actually trained (winning threshold for sweeps)
  bool lc = false;
  std::uint64_t seed = 0;
  std::optional<double> selected_grid_value;
  std::vector<SweepRow> sweep;
  double measured_noise_rate = 0.0;
  TrainReport report;
};

struct SummaryRow {
  std::string label;
  bool lc = false;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single seed
  double mean_drop = 0.0;
};

struct ExperimentResult {
  std::string command;  // train | sweep | compare
  ExperimentConfig config;
  std::vector<RunRecord> runs;
  std::vector<SummaryRow> summary;
  double wall_clock_seconds = 0.0;
};

/// Trains `cfg.loss` once with seed `cfg.train.seed`.
ExperimentResult run_train(const ExperimentConfig& cfg);
/// Sweeps the threshold of `cfg.loss.clip` over `cfg.sweep.grid`.
ExperimentResult run_sweep(const ExperimentConfig& cfg);
/// Every loss in `cfg.compare.losses` with and without LC, over all seeds.
ExperimentResult run_compare(const ExperimentConfig& cfg);
ExperimentResult run_command(const std::string& command, const ExperimentConfig& cfg);

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& runs);

nlohmann::json report_to_json(const TrainReport& report);
TrainReport report_from_json(const nlohmann::json& j);
nlohmann::json result_to_json(const ExperimentResult& result);
/// Throws ParseError when the document is not a result file.
ExperimentResult result_from_json(const nlohmann::json& j);
ExperimentResult load_result(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);
void write_result(const std::filesystem::path& json_path, const ExperimentResult& result);
std::string summary_csv(const ExperimentResult& result);

struct ReplayOutcome {
  bool identical = true;
  std::vector<std::string> mismatches;
  ExperimentResult rerun;
};

/// Re-executes the stored command and config and compares every TrainReport bitwise.
ReplayOutcome replay(const ExperimentResult& stored);

/// `$LOGITCLIP_OUT_DIR` when set, otherwise "results".
std::filesystem::path default_output_dir();

}  // namespace logitclip
