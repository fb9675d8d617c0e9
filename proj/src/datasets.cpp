#include "logitclip/datasets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "logitclip/errors.hpp"

namespace logitclip {

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::Gaussians: return "gaussians";
    case SyntheticKind::TwoMoons: return "two_moons";
    case SyntheticKind::Rings: return "rings";
  }
  return "gaussians";
}

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "gaussians") return SyntheticKind::Gaussians;
  if (name == "two_moons" || name == "two-moons") return SyntheticKind::TwoMoons;
  if (name == "rings") return SyntheticKind::Rings;
  throw ConfigError("unknown synthetic dataset kind '" + name + "'");
}

namespace {

struct Standardizer {
  Vec64 mean;
  Vec64 scale;
};

Standardizer fit(const Mat64& x) {
  Standardizer s{Vec64(x.cols(), 0.0), Vec64(x.cols(), 1.0)};
  const double n = static_cast<double>(x.rows());
  if (x.rows() == 0) return s;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) m += x(r, c);
    m /= n;
    double v = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) v += (x(r, c) - m) * (x(r, c) - m);
    v /= n;
    s.mean[c] = m;
    s.scale[c] = v > 0.0 ? std::sqrt(v) : 1.0;
  }
  return s;
}

void apply(const Standardizer& s, Mat64& x) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = (x(r, c) - s.mean[c]) / s.scale[c];
  }
}

void check_shape(std::size_t k, std::size_t n, std::size_t d) {
  if (k < 2) throw ConfigError("synthetic data needs K >= 2");
  if (n < k) throw ConfigError("synthetic data needs N >= K");
  if (d < 2) throw ConfigError("synthetic data needs d >= 2");
}

void sample_point(SyntheticKind kind, std::size_t c, std::size_t k, double separation, Rng& rng,
                  std::span<double> out) {
  const double jitter = 0.5 / separation;
  switch (kind) {
    case SyntheticKind::Gaussians: {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
      out[0] = separation * std::cos(angle) + rng.normal();
      out[1] = separation * std::sin(angle) + rng.normal();
      break;
    }
    case SyntheticKind::TwoMoons: {
      const double t = std::numbers::pi * rng.uniform();
      const double shift = 3.0 * static_cast<double>(c / 2);
      if (c % 2 == 0) {
        out[0] = std::cos(t) + shift;
        out[1] = std::sin(t);
      } else {
        out[0] = 1.0 - std::cos(t) + shift;
        out[1] = 0.5 - std::sin(t);
      }
      out[0] += jitter * rng.normal();
      out[1] += jitter * rng.normal();
      break;
    }
    case SyntheticKind::Rings: {
      const double t = 2.0 * std::numbers::pi * rng.uniform();
      const double r = static_cast<double>(c + 1) + jitter * rng.normal();
      out[0] = r * std::cos(t);
      out[1] = r * std::sin(t);
      break;
    }
  }
  for (std::size_t j = 2; j < out.size(); ++j) out[j] = rng.normal();
}

NoisyDataset raw_dataset(SyntheticKind kind, std::size_t k, std::size_t n, std::size_t d, double separation,
                         Rng& rng) {
  if (!(separation > 0.0)) throw ConfigError("separation must be positive");
  Labels labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % k;
  rng.shuffle(labels);
  NoisyDataset data;
  data.k = k;
  data.features = Mat64(n, d);
  for (std::size_t i = 0; i < n; ++i) sample_point(kind, labels[i], k, separation, rng, data.features.row(i));
  data.noisy_labels = labels;
  data.clean_labels = std::move(labels);
  return data;
}

}  // namespace

NoisyDataset gen_synthetic(SyntheticKind kind, std::size_t k, std::size_t n, std::size_t d,
                           double separation, Rng& rng) {
  check_shape(k, n, d);
  NoisyDataset data = raw_dataset(kind, k, n, d, separation, rng);
  apply(fit(data.features), data.features);
  return data;
}

TrainTestData gen_synthetic_split(SyntheticKind kind, std::size_t k, std::size_t n_train,
                                  std::size_t n_test, std::size_t d, double separation, const Rng& rng) {
  check_shape(k, n_train, d);
  Rng train_rng = rng.split("train");
  Rng test_rng = rng.split("test");
  TrainTestData out{raw_dataset(kind, k, n_train, d, separation, train_rng),
                    raw_dataset(kind, k, n_test, d, separation, test_rng)};
  const Standardizer s = fit(out.train.features);
  apply(s, out.train.features);
  apply(s, out.test.features);
  return out;
}

NoisyDataset load_dataset_csv(const std::filesystem::path& path, std::size_t k) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path.string(), 0);
  std::string line;
  std::size_t line_no = 0;
  std::size_t d = 0;
  bool header = false;
  std::vector<double> values;
  Labels labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!header) {
      if (fields.size() < 2 || fields.back() != "label") throw ParseError("expected header f0,...,label", line_no);
      d = fields.size() - 1;
      for (std::size_t j = 0; j < d; ++j) {
        if (fields[j] != "f" + std::to_string(j)) throw ParseError("expected column f" + std::to_string(j), line_no);
      }
      header = true;
      continue;
    }
    if (fields.size() != d + 1) throw ParseError("expected " + std::to_string(d + 1) + " fields", line_no);
    for (std::size_t j = 0; j < d; ++j) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(fields[j], &used));
        if (used != fields[j].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("invalid feature value '" + fields[j] + "'", line_no);
      }
    }
    std::size_t y = 0;
    const auto [ptr, ec] = std::from_chars(fields[d].data(), fields[d].data() + fields[d].size(), y);
    if (ec != std::errc() || ptr != fields[d].data() + fields[d].size()) throw ParseError("invalid label", line_no);
    if (y >= k) throw ParseError("label outside [0, K)", line_no);
    labels.push_back(y);
  }
  if (!header) throw ParseError("empty dataset file", 1);
  NoisyDataset data;
  data.k = k;
  data.features = Mat64(labels.size(), d);
  std::copy(values.begin(), values.end(), data.features.data());
  data.noisy_labels = labels;
  data.clean_labels = std::move(labels);
  return data;
}

void save_dataset_csv(const std::filesystem::path& path, const NoisyDataset& data, bool noisy) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (std::size_t j = 0; j < data.d(); ++j) out << 'f' << j << ',';
  out << "label\n";
  out << std::setprecision(17);
  const Labels& labels = (!noisy && data.clean_labels) ? *data.clean_labels : data.noisy_labels;
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.d(); ++j) out << data.features(i, j) << ',';
    out << labels[i] << '\n';
  }
}

}  // namespace logitclip
