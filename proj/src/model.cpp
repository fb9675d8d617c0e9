#include "logitclip/model.hpp"

#include <Eigen/Core>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "logitclip/errors.hpp"

namespace logitclip {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;

ConstMatMap view(const Mat64& m) {
  return ConstMatMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}
MatMap view(Mat64& m) {
  return MatMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

constexpr double kRelu6Cap = 6.0;

}  // namespace

std::string to_string(Activation a) { return a == Activation::ReLU6 ? "relu6" : "relu"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "relu6") return Activation::ReLU6;
  throw ConfigError("unknown activation '" + name + "'");
}

Parameters Parameters::zeros_like() const {
  Parameters out;
  for (const Mat64& w : weights) out.weights.emplace_back(w.rows(), w.cols());
  for (const Vec64& b : biases) out.biases.emplace_back(b.size(), 0.0);
  return out;
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (const Mat64& w : weights) n += w.size();
  for (const Vec64& b : biases) n += b.size();
  return n;
}

double Parameters::squared_norm() const {
  double acc = 0.0;
  for (const Mat64& w : weights) {
    for (double x : w.flat()) acc += x * x;
  }
  for (const Vec64& b : biases) {
    for (double x : b) acc += x * x;
  }
  return acc;
}

void Parameters::scale(double factor) {
  for (Mat64& w : weights) {
    for (double& x : w.flat()) x *= factor;
  }
  for (Vec64& b : biases) {
    for (double& x : b) x *= factor;
  }
}

void Parameters::add_scaled(const Parameters& other, double factor) {
  if (other.weights.size() != weights.size() || other.biases.size() != biases.size()) {
    throw DimensionError("parameter bundles have different layer counts");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto dst = weights[l].flat();
    auto src = other.weights[l].flat();
    if (dst.size() != src.size()) throw DimensionError("parameter bundles have different shapes");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
  }
  for (std::size_t l = 0; l < biases.size(); ++l) {
    if (biases[l].size() != other.biases[l].size()) throw DimensionError("parameter bundles have different shapes");
    for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += factor * other.biases[l][i];
  }
}

MlpModel::MlpModel(std::vector<std::size_t> widths, Activation activation)
    : widths_(std::move(widths)), activation_(activation) {
  if (widths_.size() < 2) throw ConfigError("model needs at least an input and an output width");
  for (std::size_t w : widths_) {
    if (w == 0) throw ConfigError("layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    params_.weights.emplace_back(widths_[l + 1], widths_[l]);
    params_.biases.emplace_back(widths_[l + 1], 0.0);
  }
}

MlpModel MlpModel::init(std::vector<std::size_t> widths, Activation activation, Rng& rng) {
  MlpModel model(std::move(widths), activation);
  for (Mat64& w : model.params_.weights) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(w.cols()));
    for (double& x : w.flat()) x = stddev * rng.normal();
  }
  return model;
}

Vec64 MlpModel::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) throw DimensionError("input has " + std::to_string(x.size()) + " features, model expects " + std::to_string(input_dim()));
  Mat64 batch(1, x.size());
  std::copy(x.begin(), x.end(), batch.data());
  const Mat64 out = forward_batch(batch);
  return Vec64(out.flat().begin(), out.flat().end());
}

Mat64 MlpModel::forward_batch(const Mat64& x) const {
  ForwardTrace trace;
  return forward_batch(x, trace);
}

Mat64 MlpModel::forward_batch(const Mat64& x, ForwardTrace& trace) const {
  if (x.cols() != input_dim()) throw DimensionError("input has " + std::to_string(x.cols()) + " features, model expects " + std::to_string(input_dim()));
  const std::size_t layers = num_layers();
  trace.inputs.resize(layers);
  trace.pre_activations.resize(layers - 1);
  trace.inputs[0] = x;
  Mat64 out;
  for (std::size_t l = 0; l < layers; ++l) {
    const Mat64& w = params_.weights[l];
    Mat64 z(x.rows(), w.rows());
    view(z).noalias() = view(trace.inputs[l]) * view(w).transpose();
    view(z).rowwise() += ConstVecMap(params_.biases[l].data(), static_cast<Eigen::Index>(w.rows()));
    if (l + 1 == layers) {
      out = std::move(z);
      break;
    }
    Mat64 a = z;
    for (double& v : a.flat()) {
      v = activation_ == Activation::ReLU6 ? std::clamp(v, 0.0, kRelu6Cap) : std::max(v, 0.0);
    }
    trace.pre_activations[l] = std::move(z);
    trace.inputs[l + 1] = std::move(a);
  }
  return out;
}

Parameters MlpModel::backward(std::span<const double> x, std::span<const double> upstream) const {
  if (upstream.size() != num_classes()) throw DimensionError("upstream gradient length must equal K");
  Mat64 batch(1, x.size());
  std::copy(x.begin(), x.end(), batch.data());
  ForwardTrace trace;
  forward_batch(batch, trace);
  Mat64 up(1, upstream.size());
  std::copy(upstream.begin(), upstream.end(), up.data());
  Parameters grads = params_.zeros_like();
  backward_batch(trace, up, grads);
  return grads;
}

void MlpModel::backward_batch(const ForwardTrace& trace, const Mat64& upstream, Parameters& grads) const {
  const std::size_t layers = num_layers();
  if (trace.inputs.size() != layers) throw DimensionError("forward trace does not match the model");
  if (upstream.cols() != num_classes() || upstream.rows() != trace.inputs[0].rows()) {
    throw DimensionError("upstream gradient must be batch x K");
  }
  Mat64 delta = upstream;
  for (std::size_t l = layers; l-- > 0;) {
    const Mat64& input = trace.inputs[l];
    view(grads.weights[l]).noalias() += view(delta).transpose() * view(input);
    VecMap(grads.biases[l].data(), static_cast<Eigen::Index>(grads.biases[l].size())) += view(delta).colwise().sum();
    if (l == 0) break;

    Mat64 prev(delta.rows(), input.cols());
    view(prev).noalias() = view(delta) * view(params_.weights[l]);
    const auto pre = trace.pre_activations[l - 1].flat();
    auto p = prev.flat();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool active = activation_ == Activation::ReLU6 ? (pre[i] > 0.0 && pre[i] < kRelu6Cap) : pre[i] > 0.0;
      if (!active) p[i] = 0.0;
    }
    delta = std::move(prev);
  }
}

std::string model_to_json(const MlpModel& model) {
  nlohmann::json j;
  j["widths"] = model.widths();
  j["activation"] = to_string(model.activation());
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const Mat64& w = model.parameters().weights[l];
    layers.push_back({{"weights", std::vector<double>(w.flat().begin(), w.flat().end())},
                      {"bias", model.parameters().biases[l]}});
  }
  j["layers"] = std::move(layers);
  return j.dump();
}

MlpModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model checkpoint is not valid JSON: ") + e.what(), 0);
  }
  try {
    MlpModel model(j.at("widths").get<std::vector<std::size_t>>(),
                   activation_from_string(j.at("activation").get<std::string>()));
    const auto& layers = j.at("layers");
    if (layers.size() != model.num_layers()) throw ParseError("checkpoint layer count mismatch", 0);
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      const auto w = layers[l].at("weights").get<std::vector<double>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      Mat64& dst = model.parameters().weights[l];
      if (w.size() != dst.size() || b.size() != model.parameters().biases[l].size()) {
        throw ParseError("checkpoint layer " + std::to_string(l) + " has the wrong shape", 0);
      }
      std::copy(w.begin(), w.end(), dst.data());
      model.parameters().biases[l] = b;
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model checkpoint: ") + e.what(), 0);
  }
}

void save_model(const std::filesystem::path& path, const MlpModel& model) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << model_to_json(model) << '\n';
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace logitclip
