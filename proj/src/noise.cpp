#include "logitclip/noise.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <type_traits>
#include <set>

#include "logitclip/errors.hpp"

namespace logitclip {

TransitionMatrix::TransitionMatrix(Mat64 entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw ConfigError("transition matrix must be square and non-empty");
  }
  for (std::size_t j = 0; j < entries_.rows(); ++j) {
    double sum = 0.0;
    for (double x : entries_.row(j)) {
      if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("transition matrix entry outside [0, 1]");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw ConfigError("transition matrix row " + std::to_string(j) + " sums to " + std::to_string(sum));
    }
  }
}

double TransitionMatrix::mean_retention(const Labels& clean) const {
  if (clean.empty()) return 1.0;
  double acc = 0.0;
  for (std::size_t y : clean) acc += entries_(y, y);
  return acc / static_cast<double>(clean.size());
}

PairMap cifar10_pair_map() {
  // airplane=0 automobile=1 bird=2 cat=3 deer=4 dog=5 frog=6 horse=7 ship=8 truck=9
  return {{9, 1}, {2, 0}, {4, 7}, {3, 5}, {5, 3}};
}

namespace {

void check_rate(double eta) {
  if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("noise rate must lie in [0, 1)");
}

void check_classes(std::size_t k) {
  if (k < 2) throw ConfigError("noise needs at least 2 classes");
}

}  // namespace

TransitionMatrix symmetric_matrix(std::size_t k, double eta) {
  check_classes(k);
  check_rate(eta);
  const double off = eta / static_cast<double>(k - 1);
  Mat64 m(k, k, off);
  for (std::size_t j = 0; j < k; ++j) m(j, j) = 1.0 - eta;
  return TransitionMatrix(std::move(m));
}

TransitionMatrix asymmetric_matrix(std::size_t k, const PairMap& pairs, double eta) {
  check_classes(k);
  check_rate(eta);
  std::set<std::size_t> sources;
  std::set<std::size_t> targets;
  Mat64 m = Mat64::identity(k);
  for (const auto& [from, to] : pairs) {
    if (from >= k || to >= k) throw ConfigError("pair map references a class outside [0, K)");
    if (from == to) throw ConfigError("pair map has a self-loop on class " + std::to_string(from));
    if (!sources.insert(from).second) throw ConfigError("pair map lists source " + std::to_string(from) + " twice");
    if (!targets.insert(to).second) throw ConfigError("pair map lists target " + std::to_string(to) + " twice");
    m(from, from) = 1.0 - eta;
    m(from, to) = eta;
  }
  return TransitionMatrix(std::move(m));
}

TransitionMatrix circular_matrix(std::size_t k, double eta) {
  check_classes(k);
  check_rate(eta);
  Mat64 m(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    m(j, j) = 1.0 - eta;
    m(j, (j + 1) % k) += eta;
  }
  return TransitionMatrix(std::move(m));
}

namespace {

std::size_t sample_row(std::span<const double> row, double u) {
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] <= 0.0) continue;
    last_positive = k;
    acc += row[k];
    if (u < acc) return k;
  }
  // Rounding left u just above the cumulative sum.
  return last_positive;
}

}  // namespace

Labels inject(const Labels& clean, const TransitionMatrix& t, Rng& rng) {
  Labels out(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i] >= t.k()) throw DimensionError("label outside [0, K)");
    out[i] = sample_row(t.entries().row(clean[i]), rng.uniform());
  }
  return out;
}

InstanceNoise inject_instance_dependent(const Mat64& features, const Labels& clean, std::size_t k,
                                        double eta, Rng& rng) {
  check_classes(k);
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (d == 0) throw ConfigError("instance-dependent noise needs at least one feature");
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("instance-dependent noise rate must lie in (0, 1)");
  if (clean.size() != n) throw DimensionError("label count does not match feature rows");

  Rng proj_rng = rng.split("projection");
  Mat64 w(d, k);
  for (double& x : w.flat()) x = proj_rng.normal();
  Vec64 w_rate(d);
  for (double& x : w_rate) x = proj_rng.normal();

  Vec64 raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += features(i, c) * w_rate[c];
    raw[i] = 1.0 / (1.0 + std::exp(-s));
  }

  // Find c with mean(min(cap, c * raw)) = eta; the map is monotone in c.
  const double cap = std::min(2.0 * eta, 1.0);
  auto mean_rate = [&](double c) {
    double acc = 0.0;
    for (double r : raw) acc += std::min(cap, c * r);
    return n == 0 ? 0.0 : acc / static_cast<double>(n);
  };
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 2000 && n > 0 && mean_rate(hi) < eta; ++i) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mean_rate(mid) < eta ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);

  Rng flip_rng = rng.split("flip");
  InstanceNoise out{Labels(n), Vec64(n)};
  Vec64 scores(k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = clean[i];
    if (y >= k) throw DimensionError("label outside [0, K)");
    out.rates[i] = std::min(cap, c * raw[i]);
    const double u_flip = flip_rng.uniform();
    const double u_dest = flip_rng.uniform();
    out.noisy[i] = y;
    if (u_flip >= out.rates[i]) continue;

    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t col = 0; col < d; ++col) s += features(i, col) * w(col, j);
      scores[j] = s;
    }
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      if (j != y) m = std::max(m, scores[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      scores[j] = j == y ? 0.0 : std::exp(scores[j] - m);
      total += scores[j];
    }
    for (double& s : scores) s /= total;
    out.noisy[i] = sample_row(scores, u_dest);
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

bool parse_index(std::string_view s, std::size_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Labels load_external_noisy(const std::filesystem::path& path, std::size_t k,
                           std::optional<std::size_t> expected_n) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open noisy-label file " + path.string(), 0);

  struct Row {
    std::size_t index;
    std::size_t label;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    if (!header_seen) {
      if (text != "index,noisy_label") {
        throw ParseError("expected header 'index,noisy_label'", line_no);
      }
      header_seen = true;
      continue;
    }
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw ParseError("expected two comma-separated fields", line_no);
    Row row{0, 0, line_no};
    if (!parse_index(text.substr(0, comma), row.index)) throw ParseError("invalid index", line_no);
    if (!parse_index(text.substr(comma + 1), row.label)) throw ParseError("invalid label", line_no);
    if (row.label >= k) {
      throw ParseError("label " + std::to_string(row.label) + " outside [0, " + std::to_string(k) + ")", line_no);
    }
    rows.push_back(row);
  }
  if (!header_seen) throw ParseError("missing header 'index,noisy_label'", line_no == 0 ? 1 : line_no);

  const std::size_t n = expected_n.value_or(rows.size());
  Labels out(n);
  std::vector<std::size_t> seen_at(n, 0);
  for (const Row& row : rows) {
    if (row.index >= n) {
      throw ParseError("index " + std::to_string(row.index) + " outside [0, " + std::to_string(n) +
                           "); an earlier index is missing",
                       row.line);
    }
    if (seen_at[row.index] != 0) {
      throw ParseError("duplicate index " + std::to_string(row.index) + " (first on line " +
                           std::to_string(seen_at[row.index]) + ")",
                       row.line);
    }
    seen_at[row.index] = row.line;
    out[row.index] = row.label;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (seen_at[i] == 0) throw ParseError("missing index " + std::to_string(i), line_no);
  }
  return out;
}

void write_external_noisy(const std::filesystem::path& path, const Labels& labels) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "index,noisy_label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

NoiseMeasurement measure_noise(const Labels& clean, const Labels& noisy, std::size_t k) {
  if (clean.size() != noisy.size()) throw DimensionError("clean and noisy label lists differ in length");
  NoiseMeasurement m{0.0, Mat64(k, k)};
  std::size_t flips = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i] >= k || noisy[i] >= k) throw DimensionError("label outside [0, K)");
    m.confusion(clean[i], noisy[i]) += 1.0;
    if (clean[i] != noisy[i]) ++flips;
  }
  m.rate = clean.empty() ? 0.0 : static_cast<double>(flips) / static_cast<double>(clean.size());
  for (std::size_t j = 0; j < k; ++j) {
    double total = 0.0;
    for (double x : m.confusion.row(j)) total += x;
    if (total == 0.0) {
      m.confusion(j, j) = 1.0;
      continue;
    }
    for (double& x : m.confusion.row(j)) x /= total;
  }
  return m;
}

void NoiseSpec::validate(std::size_t k) const {
  std::visit(
      [k](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, noise::Symmetric>) {
          check_rate(s.eta);
        } else if constexpr (std::is_same_v<T, noise::AsymmetricPairs>) {
          asymmetric_matrix(k, s.pairs, s.eta);
        } else if constexpr (std::is_same_v<T, noise::AsymmetricCircular>) {
          check_rate(s.eta);
        } else if constexpr (std::is_same_v<T, noise::InstanceDependent>) {
          if (!(s.eta > 0.0 && s.eta < 1.0)) throw ConfigError("instance-dependent rate must lie in (0, 1)");
        } else if constexpr (std::is_same_v<T, noise::External>) {
          if (s.path.empty()) throw ConfigError("external noise needs a file path");
        }
      },
      kind);
}

std::string noise_kind_name(const NoiseSpec& spec) {
  static constexpr const char* names[] = {"none", "symmetric", "asymmetric_pairs", "asymmetric_circular",
                                          "instance_dependent", "external"};
  return names[spec.kind.index()];
}

void NoisyDataset::validate() const {
  if (noisy_labels.size() != n()) throw DimensionError("noisy label count does not match feature rows");
  if (clean_labels && clean_labels->size() != n()) {
    throw DimensionError("clean label count does not match feature rows");
  }
  for (std::size_t y : noisy_labels) {
    if (y >= k) throw DimensionError("noisy label outside [0, K)");
  }
  if (clean_labels) {
    for (std::size_t y : *clean_labels) {
      if (y >= k) throw DimensionError("clean label outside [0, K)");
    }
  }
}

AppliedNoise apply_noise(const NoiseSpec& spec, const Mat64& features, const Labels& clean,
                         std::size_t k, const Rng& rng) {
  spec.validate(k);
  Rng stream = rng.split(spec.stream);
  return std::visit(
      [&](const auto& s) -> AppliedNoise {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, noise::None>) {
          return {clean, 1.0};
        } else if constexpr (std::is_same_v<T, noise::Symmetric>) {
          const TransitionMatrix t = symmetric_matrix(k, s.eta);
          return {inject(clean, t, stream), t.mean_retention(clean)};
        } else if constexpr (std::is_same_v<T, noise::AsymmetricPairs>) {
          const TransitionMatrix t = asymmetric_matrix(k, s.pairs, s.eta);
          return {inject(clean, t, stream), t.mean_retention(clean)};
        } else if constexpr (std::is_same_v<T, noise::AsymmetricCircular>) {
          const TransitionMatrix t = circular_matrix(k, s.eta);
          return {inject(clean, t, stream), t.mean_retention(clean)};
        } else if constexpr (std::is_same_v<T, noise::InstanceDependent>) {
          InstanceNoise inst = inject_instance_dependent(features, clean, k, s.eta, stream);
          double kept = 0.0;
          for (double r : inst.rates) kept += 1.0 - r;
          const double retention = inst.rates.empty() ? 1.0 : kept / static_cast<double>(inst.rates.size());
          return {std::move(inst.noisy), retention};
        } else {
          Labels noisy = load_external_noisy(s.path, k, clean.size());
          std::size_t kept = 0;
          for (std::size_t i = 0; i < clean.size(); ++i) kept += noisy[i] == clean[i];
          const double retention = clean.empty() ? 1.0 : static_cast<double>(kept) / static_cast<double>(clean.size());
          return {std::move(noisy), retention};
        }
      },
      spec.kind);
}

}  // namespace logitclip
