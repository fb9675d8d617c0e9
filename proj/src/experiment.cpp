#include "logitclip/experiment.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "logitclip/datasets.hpp"
#include "logitclip/errors.hpp"

namespace logitclip {

using nlohmann::json;

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  PreparedData out;
  const auto& ds = cfg.dataset;
  if (ds.kind == "csv") {
    out.train = load_dataset_csv(ds.csv_path, ds.k);
    if (ds.test_csv_path.empty()) throw ConfigError("dataset.test_csv_path is required for csv datasets");
    out.test = load_dataset_csv(ds.test_csv_path, ds.k);
    if (out.test.d() != out.train.d()) throw DimensionError("train and test CSVs differ in feature count");
  } else {
    TrainTestData data = gen_synthetic_split(synthetic_kind_from_string(ds.kind), ds.k, ds.n, ds.n_test, ds.d,
                                             ds.separation, Rng(cfg.seed).split("dataset"));
    out.train = std::move(data.train);
    out.test = std::move(data.test);
  }
  const Labels& clean = *out.train.clean_labels;
  if (const auto* ext = std::get_if<noise::External>(&cfg.noise.kind)) {
    out.train.noisy_labels = load_external_noisy(ext->path, out.train.k, out.train.n());
    out.mean_retention = std::numeric_limits<double>::quiet_NaN();
  } else {
    AppliedNoise applied = apply_noise(cfg.noise, out.train.features, clean, out.train.k, Rng(run_seed));
    out.train.noisy_labels = std::move(applied.noisy);
    out.mean_retention = applied.mean_retention;
  }
  out.measured_noise_rate = measure_noise(clean, out.train.noisy_labels, out.train.k).rate;
  out.train.validate();
  out.test.validate();
  return out;
}

ModelFactory model_factory(const ExperimentConfig& cfg, std::size_t d, std::size_t k, std::uint64_t run_seed) {
  std::vector<std::size_t> widths{d};
  widths.insert(widths.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
  widths.push_back(k);
  const Activation act = cfg.model.activation;
  return [widths, act, run_seed]() {
    Rng rng = Rng(run_seed).split("init");
    return MlpModel::init(widths, act, rng);
  };
}

namespace {

TrainConfig seeded(const TrainConfig& cfg, std::uint64_t seed) {
  TrainConfig out = cfg;
  out.seed = seed;
  return out;
}

RunRecord plain_run(const ExperimentConfig& cfg, const LossSpec& spec, std::uint64_t seed) {
  PreparedData data = prepare_data(cfg, seed);
  MlpModel model = model_factory(cfg, data.train.d(), data.train.k, seed)();
  RunRecord rec;
  rec.label = describe(spec.base);
  rec.spec = spec;
  rec.lc = spec.clip.kind != ClipKind::Identity;
  if (rec.lc) rec.label += "+LC";
  rec.seed = seed;
  rec.measured_noise_rate = data.measured_noise_rate;
  rec.report = train(model, data.train, spec, seeded(cfg.train, seed), data.test);
  return rec;
}

RunRecord swept_run(const ExperimentConfig& cfg, const LossSpec& spec, std::uint64_t seed) {
  PreparedData data = prepare_data(cfg, seed);
  ModelFactory factory = model_factory(cfg, data.train.d(), data.train.k, seed);
  SweepResult sw = sweep_tau(factory, data.train, spec, cfg.sweep.grid, seeded(cfg.train, seed),
                             cfg.sweep.val_fraction, data.test);
  RunRecord rec;
  rec.label = describe(spec.base) + "+LC";
  rec.spec = sw.best_spec;
  rec.lc = true;
  rec.seed = seed;
  rec.selected_grid_value = sw.best_grid_value;
  rec.sweep = std::move(sw.table);
  rec.measured_noise_rate = data.measured_noise_rate;
  rec.report = std::move(sw.final_report);
  return rec;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ExperimentResult run_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult out;
  out.command = "train";
  out.config = cfg;
  out.runs.push_back(plain_run(cfg, cfg.loss, cfg.train.seed));
  out.summary = summarize(out.runs);
  out.wall_clock_seconds = seconds_since(t0);
  return out;
}

ExperimentResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult out;
  out.command = "sweep";
  out.config = cfg;
  out.runs.push_back(swept_run(cfg, cfg.loss, cfg.train.seed));
  out.summary = summarize(out.runs);
  out.wall_clock_seconds = seconds_since(t0);
  return out;
}

ExperimentResult run_compare(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult out;
  out.command = "compare";
  out.config = cfg;
  for (const BaseLoss& base : cfg.compare.losses) {
    LossSpec without{base, ClipConfig::identity(), 0.0};
    LossSpec with{base, cfg.compare.lc_clip, 0.0};
    for (std::uint64_t seed : cfg.compare.seeds) out.runs.push_back(plain_run(cfg, without, seed));
    for (std::uint64_t seed : cfg.compare.seeds) out.runs.push_back(swept_run(cfg, with, seed));
  }
  out.summary = summarize(out.runs);
  out.wall_clock_seconds = seconds_since(t0);
  return out;
}

ExperimentResult run_command(const std::string& command, const ExperimentConfig& cfg) {
  if (command == "train") return run_train(cfg);
  if (command == "sweep") return run_sweep(cfg);
  if (command == "compare") return run_compare(cfg);
  throw ConfigError("unknown command '" + command + "'");
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& runs) {
  std::vector<SummaryRow> rows;
  std::vector<std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : runs) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const SummaryRow& row) { return row.label == r.label && row.lc == r.lc; });
    if (it == rows.end()) {
      rows.push_back(SummaryRow{r.label, r.lc});
      groups.emplace_back();
      it = rows.end() - 1;
    }
    groups[static_cast<std::size_t>(it - rows.begin())].push_back(&r);
  }
  for (std::size_t g = 0; g < rows.size(); ++g) {
    const auto& members = groups[g];
    const double n = static_cast<double>(members.size());
    double sum = 0.0, drop = 0.0;
    for (const RunRecord* r : members) {
      sum += r->report.final_metric;
      drop += r->report.peak_to_final_drop();
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (const RunRecord* r : members) ss += (r->report.final_metric - mean) * (r->report.final_metric - mean);
    rows[g].n = members.size();
    rows[g].mean = mean;
    rows[g].std = members.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    rows[g].mean_drop = drop / n;
  }
  return rows;
}

// ----- serialisation -----

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_from(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

}  // namespace

json report_to_json(const TrainReport& report) {
  return json{{"train_loss", report.train_loss},
              {"train_accuracy", report.train_accuracy},
              {"test_accuracy", report.test_accuracy},
              {"final_metric", number_or_null(report.final_metric)},
              {"peak_test_accuracy", report.peak_test_accuracy},
              {"peak_epoch", report.peak_epoch}};
}

TrainReport report_from_json(const json& j) {
  TrainReport r;
  r.train_loss = j.at("train_loss").get<std::vector<double>>();
  r.train_accuracy = j.at("train_accuracy").get<std::vector<double>>();
  r.test_accuracy = j.at("test_accuracy").get<std::vector<double>>();
  r.final_metric = number_from(j.at("final_metric"));
  r.peak_test_accuracy = j.at("peak_test_accuracy").get<double>();
  r.peak_epoch = j.at("peak_epoch").get<std::size_t>();
  return r;
}

json result_to_json(const ExperimentResult& result) {
  const json config = config_to_json(result.config);
  json runs = json::array();
  for (const RunRecord& r : result.runs) {
    json sweep = json::array();
    for (const SweepRow& row : r.sweep) {
      sweep.push_back({{"grid_value", row.grid_value}, {"threshold", row.threshold},
                       {"val_accuracy", row.val_accuracy}});
    }
    runs.push_back({{"label", r.label},
                    {"loss", loss_spec_to_json(r.spec)},
                    {"lc", r.lc},
                    {"seed", r.seed},
                    {"selected_grid_value", r.selected_grid_value ? json(*r.selected_grid_value) : json(nullptr)},
                    {"sweep", sweep},
                    {"measured_noise_rate", r.measured_noise_rate},
                    {"report", report_to_json(r.report)}});
  }
  json summary = json::array();
  for (const SummaryRow& s : result.summary) {
    summary.push_back({{"label", s.label},
                       {"lc", s.lc},
                       {"n", s.n},
                       {"mean", number_or_null(s.mean)},
                       {"std", number_or_null(s.std)},
                       {"mean_drop", number_or_null(s.mean_drop)}});
  }
  return json{{"tool", "logitclip"},
              {"version", kToolVersion},
              {"command", result.command},
              {"config", config},
              {"config_hash", content_hash(config)},
              {"runs", runs},
              {"summary", summary},
              {"wall_clock_seconds", result.wall_clock_seconds}};
}

ExperimentResult result_from_json(const json& j) {
  try {
    if (j.value("tool", "") != "logitclip") throw ParseError("not a logitclip result file", 0);
    ExperimentResult out;
    out.command = j.at("command").get<std::string>();
    out.config = config_from_json(j.at("config"));
    if (j.at("config_hash").get<std::string>() != content_hash(config_to_json(out.config))) {
      throw ParseError("config hash does not match the embedded config", 0);
    }
    for (const json& r : j.at("runs")) {
      RunRecord rec;
      rec.label = r.at("label").get<std::string>();
      rec.spec = loss_spec_from_json(r.at("loss"));
      rec.lc = r.at("lc").get<bool>();
      rec.seed = r.at("seed").get<std::uint64_t>();
      if (!r.at("selected_grid_value").is_null()) rec.selected_grid_value = r["selected_grid_value"].get<double>();
      for (const json& row : r.at("sweep")) {
        rec.sweep.push_back(SweepRow{row.at("grid_value").get<double>(), row.at("threshold").get<double>(),
                                     row.at("val_accuracy").get<double>()});
      }
      rec.measured_noise_rate = r.at("measured_noise_rate").get<double>();
      rec.report = report_from_json(r.at("report"));
      out.runs.push_back(std::move(rec));
    }
    out.summary = summarize(out.runs);
    out.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed result file: ") + e.what(), 0);
  }
}

ExperimentResult load_result(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open result file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("result file is not valid JSON: ") + e.what(), 0);
  }
  return result_from_json(j);
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw ConfigError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_result(const std::filesystem::path& json_path, const ExperimentResult& result) {
  write_atomic(json_path, result_to_json(result).dump(2) + "\n");
}

std::string summary_csv(const ExperimentResult& result) {
  std::ostringstream os;
  os.precision(17);
  os << "label,lc,n,mean,std,mean_drop\n";
  for (const SummaryRow& s : result.summary) {
    os << s.label << ',' << (s.lc ? 1 : 0) << ',' << s.n << ',' << s.mean << ',' << s.std << ',' << s.mean_drop
       << '\n';
  }
  return os.str();
}

ReplayOutcome replay(const ExperimentResult& stored) {
  ReplayOutcome out;
  out.rerun = run_command(stored.command, stored.config);
  if (out.rerun.runs.size() != stored.runs.size()) {
    out.identical = false;
    out.mismatches.push_back("run count differs: stored " + std::to_string(stored.runs.size()) + ", rerun " +
                             std::to_string(out.rerun.runs.size()));
    return out;
  }
  for (std::size_t i = 0; i < stored.runs.size(); ++i) {
    const RunRecord& a = stored.runs[i];
    const RunRecord& b = out.rerun.runs[i];
    const std::string tag = a.label + " seed " + std::to_string(a.seed);
    if (!(a.spec == b.spec)) out.mismatches.push_back(tag + ": selected loss differs");
    if (!a.report.identical(b.report)) out.mismatches.push_back(tag + ": TrainReport differs");
  }
  out.identical = out.mismatches.empty();
  return out;
}

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("LOGITCLIP_OUT_DIR"); env && *env) return env;
  return "results";
}

}  // namespace logitclip
