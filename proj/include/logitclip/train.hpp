#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "logitclip/losses.hpp"
#include "logitclip/model.hpp"
#include "logitclip/noise.hpp"

namespace logitclip {

/// SGD schedule: momentum 0.9, weight decay 5e-4, batch 128, lr 0.1 divided
/// by 10 at 40% and 70% of training.
struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<std::size_t> decay_epochs{40, 70};
  double decay_factor = 0.1;
  std::optional<double> grad_clip;
  std::size_t eval_every = 1;
  std::size_t last_n = 10;
  std::uint64_t seed = 1;

  void validate() const;
  double lr_at(std::size_t epoch) const;

  bool operator==(const TrainConfig&) const = default;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;  // running accuracy on the training labels
  std::vector<double> test_accuracy;
  /// Mean test accuracy over the last `last_n` epochs; NaN when no epoch ran.
  double final_metric = 0.0;
  double peak_test_accuracy = 0.0;
  std::size_t peak_epoch = 0;

  std::size_t epochs() const noexcept { return test_accuracy.size(); }
  /// peak_test_accuracy - test accuracy of the last epoch.
  double peak_to_final_drop() const;

  /// Bitwise comparison; NaN final metrics compare equal to each other.
  bool identical(const TrainReport& other) const;
};

struct SgdState {
  Parameters velocity;
};

SgdState make_sgd_state(const MlpModel& model);

/// One momentum step: v <- mu v + (g + wd theta), theta <- theta - lr v. When
/// `cfg.grad_clip` is set the loss gradient is first rescaled to that global
/// Euclidean norm if it exceeds it.
void sgd_step(MlpModel& model, Parameters grads, SgdState& state, const TrainConfig& cfg, double lr);

/// Fraction of rows whose argmax logit matches the label. Uses clean labels when
/// the dataset has them and `prefer_clean` is set.
double accuracy(const MlpModel& model, const NoisyDataset& data, bool prefer_clean = true);

/// Trains on the noisy labels of `train_set`, evaluating on `test_set` every
/// `eval_every` epochs and on each of the last `last_n` epochs; epochs in
/// between repeat the latest evaluation. Throws NumericalAbort on a non-finite
/// batch loss and ConfigError when the loss transform has no gradient.
TrainReport train(MlpModel& model, const NoisyDataset& train_set, const LossSpec& loss,
                  const TrainConfig& cfg, const NoisyDataset& test_set);

using ModelFactory = std::function<MlpModel()>;

/// {0.1, 0.5, 1.0, 1.5, ..., 5.0}
std::vector<double> default_inv_tau_grid();

/// Threshold a sweep grid value stands for: 1/g for clip-by-norm, g itself for
/// clip-by-value (searched directly) and for the LogitNorm temperature.
double threshold_from_grid(ClipKind kind, double grid_value);

struct SweepRow {
  double grid_value = 0.0;
  double threshold = 0.0;
  double val_accuracy = 0.0;
};

struct SweepResult {
  double best_grid_value = 0.0;
  LossSpec best_spec;
  std::vector<SweepRow> table;
  TrainReport final_report;
};

/// Noisy hold-out split used for hyperparameter selection.
struct ValidationSplit {
  NoisyDataset train;
  NoisyDataset validation;
};
ValidationSplit split_validation(const NoisyDataset& data, double val_fraction, std::uint64_t seed);

/// Picks the clip threshold by noisy hold-out accuracy, then retrains on the
/// full training set with the winner. Ties go to the larger threshold.
SweepResult sweep_tau(const ModelFactory& factory, const NoisyDataset& train_set, const LossSpec& loss,
                      std::span<const double> grid, const TrainConfig& cfg, double val_fraction,
                      const NoisyDataset& test_set);

struct SelectionResult {
  std::size_t best_index = 0;
  std::vector<double> val_accuracy;
  TrainReport final_report;
};

/// Same protocol over an explicit candidate list. Ties go to the earliest candidate.
SelectionResult select_by_validation(const ModelFactory& factory, const NoisyDataset& train_set,
                                     std::span<const LossSpec> candidates, const TrainConfig& cfg,
                                     double val_fraction, const NoisyDataset& test_set);

}  // namespace logitclip
