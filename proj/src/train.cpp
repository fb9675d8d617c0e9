#include "logitclip/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "logitclip/errors.hpp"

namespace logitclip {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(batch > 0, "train.batch must be positive");
  require(lr > 0.0 && std::isfinite(lr), "train.lr must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "train.momentum must lie in [0, 1)");
  require(weight_decay >= 0.0, "train.weight_decay must be non-negative");
  require(decay_factor > 0.0 && decay_factor <= 1.0, "train.decay_factor must lie in (0, 1]");
  require(!grad_clip || *grad_clip > 0.0, "train.grad_clip must be positive when set");
  require(eval_every > 0, "train.eval_every must be positive");
  require(last_n > 0, "train.last_n must be positive");
  if (epochs > 0) {
    require(last_n <= epochs, "train.last_n must not exceed train.epochs");
    for (std::size_t e : decay_epochs) require(e < epochs, "train.decay_epochs must be below train.epochs");
  }
}

double TrainConfig::lr_at(std::size_t epoch) const {
  double out = lr;
  for (std::size_t e : decay_epochs) {
    if (epoch >= e) out *= decay_factor;
  }
  return out;
}

double TrainReport::peak_to_final_drop() const {
  if (test_accuracy.empty()) return 0.0;
  return peak_test_accuracy - test_accuracy.back();
}

bool TrainReport::identical(const TrainReport& other) const {
  auto same_bits = [](double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; };
  auto same_vec = [&](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!same_bits(a[i], b[i])) return false;
    }
    return true;
  };
  const bool metric_same = same_bits(final_metric, other.final_metric) ||
                           (std::isnan(final_metric) && std::isnan(other.final_metric));
  return same_vec(train_loss, other.train_loss) && same_vec(train_accuracy, other.train_accuracy) &&
         same_vec(test_accuracy, other.test_accuracy) && metric_same &&
         same_bits(peak_test_accuracy, other.peak_test_accuracy) && peak_epoch == other.peak_epoch;
}

SgdState make_sgd_state(const MlpModel& model) { return SgdState{model.parameters().zeros_like()}; }

void sgd_step(MlpModel& model, Parameters grads, SgdState& state, const TrainConfig& cfg, double lr) {
  if (cfg.grad_clip) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > *cfg.grad_clip) grads.scale(*cfg.grad_clip / norm);
  }
  Parameters& theta = model.parameters();
  if (cfg.weight_decay > 0.0) grads.add_scaled(theta, cfg.weight_decay);
  state.velocity.scale(cfg.momentum);
  state.velocity.add_scaled(grads, 1.0);
  theta.add_scaled(state.velocity, -lr);
}

double accuracy(const MlpModel& model, const NoisyDataset& data, bool prefer_clean) {
  if (data.n() == 0) return 0.0;
  const Labels& labels = (prefer_clean && data.clean_labels) ? *data.clean_labels : data.noisy_labels;
  const Mat64 logits = model.forward_batch(data.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.n(); ++i) correct += argmax(logits.row(i)) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.n());
}

TrainReport train(MlpModel& model, const NoisyDataset& train_set, const LossSpec& loss,
                  const TrainConfig& cfg, const NoisyDataset& test_set) {
  cfg.validate();
  loss.validate();
  train_set.validate();
  if (!loss.clip.differentiable()) {
    throw ConfigError("training requires clip-by-norm with p = 2 (other norms are forward-only)");
  }
  if (train_set.d() != model.input_dim() || test_set.d() != model.input_dim()) {
    throw DimensionError("dataset feature count does not match the model input width");
  }
  if (train_set.k != model.num_classes()) {
    throw DimensionError("dataset class count does not match the model output width");
  }

  TrainReport report;
  const std::size_t n = train_set.n();
  const std::size_t d = train_set.d();
  const std::size_t k = model.num_classes();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  const Rng shuffle_root = Rng(cfg.seed).split("shuffle");
  SgdState state = make_sgd_state(model);
  ForwardTrace trace;
  double last_eval = 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = shuffle_root.split(static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
    const double lr = cfg.lr_at(epoch);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch, ++batch_index) {
      const std::size_t stop = std::min(n, start + cfg.batch);
      const std::size_t b = stop - start;
      Mat64 x(b, d);
      for (std::size_t r = 0; r < b; ++r) {
        const auto src = train_set.features.row(order[start + r]);
        std::copy(src.begin(), src.end(), x.row(r).begin());
      }
      const Mat64 logits = model.forward_batch(x, trace);

      Mat64 upstream(b, k);
      double batch_loss = 0.0;
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t y = train_set.noisy_labels[order[start + r]];
        const LossValueGrad lg = loss_forward_backward(loss, logits.row(r), y);
        batch_loss += lg.value;
        for (std::size_t j = 0; j < k; ++j) upstream(r, j) = lg.grad_z[j] / static_cast<double>(b);
        correct += argmax(logits.row(r)) == y;
      }
      if (!std::isfinite(batch_loss)) throw NumericalAbort(epoch, batch_index, batch_loss);
      loss_sum += batch_loss;

      Parameters grads = model.parameters().zeros_like();
      model.backward_batch(trace, upstream, grads);
      sgd_step(model, std::move(grads), state, cfg, lr);
    }

    const bool evaluate = epoch == 0 || (epoch + 1) % cfg.eval_every == 0 || epoch + cfg.last_n >= cfg.epochs;
    if (evaluate) last_eval = accuracy(model, test_set);

    report.train_loss.push_back(n == 0 ? 0.0 : loss_sum / static_cast<double>(n));
    report.train_accuracy.push_back(n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n));
    report.test_accuracy.push_back(last_eval);
    if (epoch == 0 || last_eval > report.peak_test_accuracy) {
      report.peak_test_accuracy = last_eval;
      report.peak_epoch = epoch;
    }
  }

  if (cfg.epochs == 0) {
    report.final_metric = std::numeric_limits<double>::quiet_NaN();
  } else {
    const std::size_t tail = std::min(cfg.last_n, cfg.epochs);
    double acc = 0.0;
    for (std::size_t e = cfg.epochs - tail; e < cfg.epochs; ++e) acc += report.test_accuracy[e];
    report.final_metric = acc / static_cast<double>(tail);
  }
  return report;
}

std::vector<double> default_inv_tau_grid() {
  std::vector<double> grid{0.1};
  for (int i = 1; i <= 10; ++i) grid.push_back(0.5 * i);
  return grid;
}

double threshold_from_grid(ClipKind kind, double grid_value) {
  if (!(grid_value > 0.0)) throw ConfigError("sweep grid values must be positive");
  return kind == ClipKind::ByNorm ? 1.0 / grid_value : grid_value;
}

namespace {

NoisyDataset subset(const NoisyDataset& data, std::span<const std::size_t> rows) {
  NoisyDataset out;
  out.k = data.k;
  out.features = Mat64(rows.size(), data.d());
  out.noisy_labels.resize(rows.size());
  if (data.clean_labels) out.clean_labels.emplace(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = data.features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.noisy_labels[i] = data.noisy_labels[rows[i]];
    if (data.clean_labels) (*out.clean_labels)[i] = (*data.clean_labels)[rows[i]];
  }
  return out;
}

}  // namespace

ValidationSplit split_validation(const NoisyDataset& data, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction <= 0.5)) throw ConfigError("val_fraction must lie in (0, 0.5]");
  const std::size_t n = data.n();
  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n > 1 ? n - 1 : 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng(seed).split("validation-split");
  rng.shuffle(order);
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  ValidationSplit split{subset(data, train_rows), subset(data, val_rows)};
  // Selection must only see the labels a practitioner would have.
  split.validation.clean_labels.reset();
  return split;
}

namespace {

std::vector<double> validation_scores(const ModelFactory& factory, const ValidationSplit& split,
                                      std::span<const LossSpec> candidates, const TrainConfig& cfg) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const LossSpec& spec : candidates) {
    MlpModel model = factory();
    scores.push_back(train(model, split.train, spec, cfg, split.validation).final_metric);
  }
  return scores;
}

}  // namespace

SelectionResult select_by_validation(const ModelFactory& factory, const NoisyDataset& train_set,
                                     std::span<const LossSpec> candidates, const TrainConfig& cfg,
                                     double val_fraction, const NoisyDataset& test_set) {
  if (candidates.empty()) throw ConfigError("selection needs at least one candidate");
  const ValidationSplit split = split_validation(train_set, val_fraction, cfg.seed);
  SelectionResult out;
  out.val_accuracy = validation_scores(factory, split, candidates, cfg);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (out.val_accuracy[i] > out.val_accuracy[out.best_index]) out.best_index = i;
  }
  MlpModel model = factory();
  out.final_report = train(model, train_set, candidates[out.best_index], cfg, test_set);
  return out;
}

SweepResult sweep_tau(const ModelFactory& factory, const NoisyDataset& train_set, const LossSpec& loss,
                      std::span<const double> grid, const TrainConfig& cfg, double val_fraction,
                      const NoisyDataset& test_set) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  if (loss.clip.kind == ClipKind::Identity) throw ConfigError("sweep needs a clipping transform");

  // Gentlest intervention (largest threshold) first so ties resolve toward it.
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return threshold_from_grid(loss.clip.kind, grid[a]) > threshold_from_grid(loss.clip.kind, grid[b]);
  });
  std::vector<LossSpec> candidates;
  for (std::size_t i : order) {
    LossSpec spec = loss;
    spec.clip.tau = threshold_from_grid(loss.clip.kind, grid[i]);
    candidates.push_back(std::move(spec));
  }

  SelectionResult sel = select_by_validation(factory, train_set, candidates, cfg, val_fraction, test_set);

  SweepResult out;
  out.table.resize(grid.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t i = order[r];
    out.table[i] = SweepRow{grid[i], candidates[r].clip.tau, sel.val_accuracy[r]};
  }
  out.best_grid_value = grid[order[sel.best_index]];
  out.best_spec = candidates[sel.best_index];
  out.final_report = std::move(sel.final_report);
  return out;
}

}  // namespace logitclip
