#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "logitclip/numerics.hpp"

namespace logitclip {

enum class Activation { ReLU, ReLU6 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Weights (out x in, row-major) and biases for every layer. Also used for
/// gradients and optimizer state, which share the model's shapes.
struct Parameters {
  std::vector<Mat64> weights;
  std::vector<Vec64> biases;

  Parameters zeros_like() const;
  std::size_t count() const;
  double squared_norm() const;
  void scale(double factor);
  /// this += factor * other
  void add_scaled(const Parameters& other, double factor);

  bool operator==(const Parameters&) const = default;
};

/// Intermediate values of a batched forward pass, kept for backpropagation.
struct ForwardTrace {
  std::vector<Mat64> inputs;          // input to each layer, batch x in
  std::vector<Mat64> pre_activations;  // hidden layers only
};

/// Multilayer perceptron with a linear output layer (the logits).
class MlpModel {
 public:
  /// Zero-initialised model. `widths` = [d, h1, ..., K], at least two entries.
  MlpModel(std::vector<std::size_t> widths, Activation activation);

  /// He initialisation: weights ~ N(0, 2 / fan_in), biases 0.
  static MlpModel init(std::vector<std::size_t> widths, Activation activation, Rng& rng);

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  Activation activation() const noexcept { return activation_; }
  std::size_t input_dim() const noexcept { return widths_.front(); }
  std::size_t num_classes() const noexcept { return widths_.back(); }
  std::size_t num_layers() const noexcept { return params_.weights.size(); }

  Parameters& parameters() noexcept { return params_; }
  const Parameters& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const { return params_.count(); }

  Vec64 forward(std::span<const double> x) const;
  /// Logits for every row of `x` (batch x d) as a batch x K matrix.
  Mat64 forward_batch(const Mat64& x) const;
  Mat64 forward_batch(const Mat64& x, ForwardTrace& trace) const;

  /// Parameter gradients of <upstream, logits(x)>.
  Parameters backward(std::span<const double> x, std::span<const double> upstream) const;
  /// Accumulates gradients of sum_b <upstream_b, logits_b> into `grads`.
  void backward_batch(const ForwardTrace& trace, const Mat64& upstream, Parameters& grads) const;

  bool operator==(const MlpModel&) const = default;

 private:
  std::vector<std::size_t> widths_;
  Activation activation_;
  Parameters params_;
};

/// Flat JSON checkpoint: widths, activation, row-major parameter arrays.
std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace logitclip
