#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "logitclip/config.hpp"
#include "logitclip/datasets.hpp"
#include "logitclip/errors.hpp"
#include "logitclip/experiment.hpp"

using namespace logitclip;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "logitclip-unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.dataset.k = 3;
  cfg.dataset.n = 150;
  cfg.dataset.n_test = 60;
  cfg.noise.kind = noise::Symmetric{0.3};
  cfg.model.hidden = {8};
  cfg.train.epochs = 3;
  cfg.train.batch = 32;
  cfg.train.decay_epochs = {2};
  cfg.train.last_n = 2;
  cfg.sweep.grid = {0.5, 2.0};
  cfg.compare.seeds = {4};
  return cfg;
}

}  // namespace

TEST_CASE("config survives a JSON round trip") {
  ExperimentConfig cfg = tiny_config();
  cfg.loss = LossSpec{nce_agce(), ClipConfig::by_norm(0.5, NormOrder::Inf), 0.0};
  cfg.noise.kind = noise::AsymmetricPairs{{{0, 1}, {2, 0}}, 0.25};
  cfg.train.grad_clip = 5.0;
  cfg.compare.losses = {base::Ce{}, nce_mae(), base::Gce{0.5}};
  cfg.compare.lc_clip = ClipConfig::by_value(1.0);  // its threshold is never stored
  cfg.model.activation = Activation::ReLU6;
  const json j = config_to_json(cfg);
  CHECK(j["loss"]["clip"]["p"] == "inf");
  const ExperimentConfig back = config_from_json(j);
  CHECK(back.dataset == cfg.dataset);
  CHECK(back.noise == cfg.noise);
  CHECK(back.loss == cfg.loss);
  CHECK(back.train == cfg.train);
  CHECK(back.model == cfg.model);
  CHECK(back.sweep == cfg.sweep);
  CHECK(back.compare == cfg.compare);
  CHECK(back == cfg);
  CHECK(config_from_json(json::parse(j.dump())) == cfg);

  const ExperimentConfig defaults;
  CHECK(config_from_json(config_to_json(defaults)) == defaults);
  CHECK(config_to_json(defaults)["train"]["grad_clip"].is_null());
}

TEST_CASE("missing keys take defaults") {
  const ExperimentConfig cfg = config_from_json(json::object());
  CHECK(cfg == ExperimentConfig{});
  const ExperimentConfig partial = config_from_json(json::parse(R"({"train": {"epochs": 117}})"));
  CHECK(partial.train.epochs == 117);
  CHECK(partial.train.batch == 128);
}

TEST_CASE("config parsing rejects unknown keys and wrong types") {
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"datset": {}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"train": {"epoch": 3}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"train": {"epochs": "3"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"loss": {"base": "xent"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"loss": {"base": "gce", "params": {"k": 1}}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"noise": {"kind": "uniform"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"noise": {"kind": "external"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"noise": {"kind": "asymmetric_pairs", "pairs": [[0]]}})")),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"loss": {"clip": {"kind": "by_norm", "p": 3}}})")),
                  ConfigError);
}

TEST_CASE("loss names and dataset aliases") {
  CHECK(base_loss_from_name("nce+mae") == nce_mae());
  CHECK(base_loss_from_name("nce+agce") == nce_agce());
  CHECK(base_loss_from_name("gce") == BaseLoss{base::Gce{}});
  CHECK_THROWS_AS(base_loss_from_name("hinge"), ConfigError);
  const ExperimentConfig cfg = config_from_json(json::parse(R"({"dataset": {"kind": "two-moons"}})"));
  CHECK(cfg.dataset.kind == "two_moons");
  const ExperimentConfig preset =
      config_from_json(json::parse(R"({"dataset": {"k": 10}, "noise": {"kind": "asymmetric_pairs", "eta": 0.2, "pairs": "cifar10"}})"));
  CHECK(std::get<noise::AsymmetricPairs>(preset.noise.kind).pairs == cifar10_pair_map());
}

TEST_CASE("load_config reads files and reports malformed JSON") {
  const auto good = scratch("good.json");
  std::ofstream(good) << R"({"seed": 9})";
  CHECK(load_config(good.string()).seed == 9);
  const auto bad = scratch("bad.json");
  std::ofstream(bad) << "{\"seed\": ";
  CHECK_THROWS(load_config(bad.string()));
  CHECK_THROWS(load_config(scratch("absent.json").string()));
}

TEST_CASE("content hash is stable and sensitive") {
  const json a = config_to_json(tiny_config());
  CHECK(content_hash(a) == content_hash(json::parse(a.dump())));
  CHECK(content_hash(a).size() == 16);
  ExperimentConfig other = tiny_config();
  other.seed = 2;
  CHECK(content_hash(a) != content_hash(config_to_json(other)));
  // 64-bit FNV-1a of the two bytes "{}".
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : std::string("{}")) h = (h ^ c) * 0x100000001b3ULL;
  char expected[17];
  std::snprintf(expected, sizeof expected, "%016llx", static_cast<unsigned long long>(h));
  CHECK(content_hash(json::object()) == expected);
}

TEST_CASE("synthetic datasets are balanced and standardised") {
  for (SyntheticKind kind : {SyntheticKind::Gaussians, SyntheticKind::TwoMoons, SyntheticKind::Rings}) {
    Rng rng(11);
    const NoisyDataset data = gen_synthetic(kind, 3, 301, 4, 3.0, rng);
    REQUIRE(data.n() == 301);
    REQUIRE(data.d() == 4);
    std::vector<std::size_t> counts(3);
    for (std::size_t y : *data.clean_labels) ++counts[y];
    for (std::size_t c : counts) CHECK((c == 100 || c == 101));
    for (std::size_t j = 0; j < 4; ++j) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < data.n(); ++i) mean += data.features(i, j);
      mean /= 301.0;
      for (std::size_t i = 0; i < data.n(); ++i) sq += (data.features(i, j) - mean) * (data.features(i, j) - mean);
      CHECK(std::abs(mean) < 1e-12);
      CHECK(sq / 301.0 == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("synthetic generation edge cases") {
  Rng a(5), b(5);
  const NoisyDataset x = gen_synthetic(SyntheticKind::Gaussians, 4, 50, 2, 3.0, a);
  const NoisyDataset y = gen_synthetic(SyntheticKind::Gaussians, 4, 50, 2, 3.0, b);
  CHECK(x.features == y.features);
  CHECK(x.clean_labels == y.clean_labels);

  Rng rng(1);
  const NoisyDataset one_each = gen_synthetic(SyntheticKind::Gaussians, 5, 5, 2, 3.0, rng);
  std::vector<std::size_t> seen(*one_each.clean_labels);
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4});

  CHECK_THROWS_AS(gen_synthetic(SyntheticKind::Gaussians, 1, 10, 2, 3.0, rng), ConfigError);
  CHECK_THROWS_AS(gen_synthetic(SyntheticKind::Gaussians, 4, 3, 2, 3.0, rng), ConfigError);
  CHECK_THROWS_AS(gen_synthetic(SyntheticKind::Gaussians, 4, 30, 1, 3.0, rng), ConfigError);
  CHECK_THROWS_AS(synthetic_kind_from_string("spirals"), ConfigError);
}

TEST_CASE("dataset CSV round trip") {
  Rng rng(2);
  const NoisyDataset data = gen_synthetic(SyntheticKind::Rings, 3, 30, 3, 2.0, rng);
  const auto path = scratch("data.csv");
  save_dataset_csv(path, data);
  const NoisyDataset back = load_dataset_csv(path, 3);
  CHECK(back.clean_labels == data.clean_labels);
  REQUIRE(back.n() == data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.d(); ++j) CHECK(back.features(i, j) == data.features(i, j));
  }
  std::ofstream(scratch("short.csv")) << "f0,f1,label\n1.0,2.0,0\n3.0,1\n";
  CHECK_THROWS_AS(load_dataset_csv(scratch("short.csv"), 2), ParseError);
  std::ofstream(scratch("label.csv")) << "f0,label\n1.0,7\n";
  CHECK_THROWS(load_dataset_csv(scratch("label.csv"), 2));
}

TEST_CASE("train and test splits share the training-set standardisation") {
  const TrainTestData tt = gen_synthetic_split(SyntheticKind::Gaussians, 4, 400, 100, 2, 3.0, Rng(3));
  CHECK(tt.train.n() == 400);
  CHECK(tt.test.n() == 100);
  double mean = 0.0;
  for (std::size_t i = 0; i < 400; ++i) mean += tt.train.features(i, 0);
  CHECK(std::abs(mean / 400.0) < 1e-12);
}

TEST_CASE("compare with one seed yields both arms and zero spread") {
  const ExperimentResult r = run_compare(tiny_config());
  REQUIRE(r.runs.size() == 2);
  CHECK_FALSE(r.runs[0].lc);
  CHECK(r.runs[1].lc);
  CHECK(r.runs[1].selected_grid_value.has_value());
  CHECK(r.runs[1].sweep.size() == 2);
  REQUIRE(r.summary.size() == 2);
  for (const SummaryRow& row : r.summary) {
    CHECK(row.n == 1);
    CHECK(row.std == 0.0);
  }
  CHECK(r.runs[0].measured_noise_rate > 0.1);
  CHECK(summary_csv(r).rfind("label,lc,n,mean,std,mean_drop\n", 0) == 0);
}

TEST_CASE("result files round trip and replay bitwise") {
  ExperimentResult r = run_train(tiny_config());
  REQUIRE(r.runs.size() == 1);
  const auto path = scratch("result.json");
  write_result(path, r);
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  const ExperimentResult back = load_result(path);
  CHECK(back.command == "train");
  CHECK(back.config == r.config);
  CHECK(back.runs[0].report.identical(r.runs[0].report));
  const ReplayOutcome outcome = replay(back);
  CHECK(outcome.identical);
  CHECK(outcome.mismatches.empty());

  json doc = result_to_json(r);
  doc["config"]["seed"] = 99;
  CHECK_THROWS_AS(result_from_json(doc), ParseError);
  CHECK_THROWS_AS(result_from_json(json::parse(R"({"tool": "other"})")), ParseError);
}

TEST_CASE("non-finite metrics serialise as null") {
  TrainReport empty;
  empty.final_metric = NAN;
  const json j = report_to_json(empty);
  CHECK(j["final_metric"].is_null());
  CHECK(std::isnan(report_from_json(j).final_metric));
}

TEST_CASE("write_atomic replaces existing content") {
  const auto path = scratch("atomic.txt");
  write_atomic(path, "first");
  write_atomic(path, "second");
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text == "second");
}

TEST_CASE("output directory honours the environment") {
  ::setenv("LOGITCLIP_OUT_DIR", "/tmp/somewhere", 1);
  CHECK(default_output_dir() == std::filesystem::path("/tmp/somewhere"));
  ::unsetenv("LOGITCLIP_OUT_DIR");
  CHECK(default_output_dir() == std::filesystem::path("results"));
}
