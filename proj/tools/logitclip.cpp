// logitclip: command-line front end for the noise-robust classification lab.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "logitclip/bounds.hpp"
#include "logitclip/datasets.hpp"
#include "logitclip/errors.hpp"
#include "logitclip/experiment.hpp"
#include "logitclip/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace logitclip;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalAbort = 3;
constexpr int kCheckFailed = 4;

std::vector<double> inclusive_range(double lo, double hi, double step) {
  if (!(step > 0.0)) throw ConfigError("step must be positive");
  if (hi < lo) throw ConfigError("range end is below its start");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_atomic(path, text);
  }
}

// ----- bounds -----

struct BoundsArgs {
  std::vector<std::size_t> k{10};
  double tau_min = 1.0;
  double tau_max = 1.0;
  double tau_step = 0.5;
  std::string out;
};

int cmd_bounds(const BoundsArgs& a) {
  std::ostringstream os;
  os.precision(10);
  os << "k,tau,lower,upper,a\n";
  for (std::size_t k : a.k) {
    for (double tau : inclusive_range(a.tau_min, a.tau_max, a.tau_step)) {
      const LossBounds b = ce_clip_bounds(k, tau);
      os << k << ',' << tau << ',' << b.lower << ',' << b.upper << ',' << a_const(k, tau) << '\n';
    }
  }
  emit(os.str(), a.out);
  return kOk;
}

// ----- gradcheck -----

struct GradcheckArgs {
  std::vector<std::string> losses;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  double tolerance = 1e-6;
  bool corrupt = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  std::vector<BaseLoss> losses;
  if (a.losses.empty()) {
    losses = gradcheck_losses();
  } else {
    for (const auto& name : a.losses) losses.push_back(base_loss_from_name(name));
  }
  if (a.trials == 0) std::cerr << "warning: --trials 0 checks nothing; reporting a vacuous pass\n";
  GradCheckOptions opts;
  opts.trials = a.trials;
  opts.seed = a.seed;
  opts.tolerance = a.tolerance;
  opts.corrupt_gradient = a.corrupt;
  const auto transforms = gradcheck_transforms();
  bool ok = true;
  std::printf("%-28s %-11s %8s %8s %12s  %s\n", "loss", "transform", "checked", "skipped", "max_rel_err", "result");
  for (const GradCheckCase& c : run_gradcheck(losses, transforms, opts)) {
    std::printf("%-28s %-11s %8zu %8zu %12.3e  %s\n", c.loss.c_str(), c.transform.c_str(), c.checked, c.skipped,
                c.max_rel_error, c.passed ? "PASS" : "FAIL");
    ok = ok && c.passed;
  }
  return ok ? kOk : kCheckFailed;
}

// ----- noise -----

struct NoiseArgs {
  std::string config;
  std::string labels_csv;  // optional dataset CSV instead of the config's dataset
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_noise(const NoiseArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  NoisyDataset data;
  if (!a.labels_csv.empty()) {
    data = load_dataset_csv(a.labels_csv, cfg.dataset.k);
    if (std::holds_alternative<noise::External>(cfg.noise.kind)) {
      throw ConfigError("the noise subcommand cannot inject external noise");
    }
    data.noisy_labels = apply_noise(cfg.noise, data.features, *data.clean_labels, data.k, Rng(a.seed)).noisy;
  } else {
    data = prepare_data(cfg, a.seed).train;
  }
  const NoiseMeasurement m = measure_noise(*data.clean_labels, data.noisy_labels, data.k);
  std::fprintf(stderr, "measured noise rate %.6f over %zu labels\n", m.rate, data.n());
  std::fprintf(stderr, "row-normalised clean x noisy confusion:\n");
  for (std::size_t r = 0; r < m.confusion.rows(); ++r) {
    for (std::size_t c = 0; c < m.confusion.cols(); ++c) std::fprintf(stderr, " %.4f", m.confusion(r, c));
    std::fprintf(stderr, "\n");
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << "index,noisy_label\n";
    for (std::size_t i = 0; i < data.n(); ++i) std::cout << i << ',' << data.noisy_labels[i] << '\n';
  } else {
    write_external_noisy(a.out, data.noisy_labels);
  }
  return kOk;
}

// ----- gen-data -----

struct GenArgs {
  std::string kind = "gaussians";
  std::size_t k = 4;
  std::size_t n = 4000;
  std::size_t n_test = 0;
  std::size_t d = 2;
  double separation = 3.0;
  std::uint64_t seed = 1;
  std::string out;
  std::string test_out;
};

int cmd_gen_data(const GenArgs& a) {
  const SyntheticKind kind = synthetic_kind_from_string(a.kind);
  const Rng rng = Rng(a.seed).split("dataset");
  if (a.n_test > 0) {
    if (a.test_out.empty()) throw ConfigError("--n-test needs --test-out");
    TrainTestData data = gen_synthetic_split(kind, a.k, a.n, a.n_test, a.d, a.separation, rng);
    save_dataset_csv(a.out, data.train);
    save_dataset_csv(a.test_out, data.test);
  } else {
    Rng r = rng;
    save_dataset_csv(a.out, gen_synthetic(kind, a.k, a.n, a.d, a.separation, r));
  }
  return kOk;
}

// ----- train / sweep / compare -----

struct RunArgs {
  std::string config;
  std::string out;
  std::string replay;
  std::vector<std::uint64_t> seeds;
};

fs::path result_path(const ExperimentResult& r, const std::string& out) {
  if (!out.empty()) return out;
  if (!r.config.output.empty()) return r.config.output;
  const std::string hash = content_hash(config_to_json(r.config));
  return default_output_dir() / (r.command + "-" + hash + ".json");
}

void print_summary(const ExperimentResult& r) {
  for (const RunRecord& run : r.runs) {
    std::printf("%-30s seed %-4llu final %.4f  peak %.4f @%zu  noise %.4f", run.label.c_str(),
                static_cast<unsigned long long>(run.seed), run.report.final_metric, run.report.peak_test_accuracy,
                run.report.peak_epoch, run.measured_noise_rate);
    if (run.selected_grid_value) std::printf("  1/tau=%g", *run.selected_grid_value);
    std::printf("\n");
  }
  for (const SummaryRow& s : r.summary) {
    std::printf("%-30s mean %.4f +- %.4f over %zu seed(s), mean drop %.4f\n", s.label.c_str(), s.mean, s.std, s.n,
                s.mean_drop);
  }
}

int persist(const ExperimentResult& r, const std::string& out) {
  const fs::path json_path = result_path(r, out);
  write_result(json_path, r);
  fs::path csv_path = json_path;
  csv_path.replace_extension(".csv");
  write_atomic(csv_path, summary_csv(r));
  print_summary(r);
  std::printf("wrote %s and %s\n", json_path.string().c_str(), csv_path.string().c_str());
  return kOk;
}

int cmd_run(const std::string& command, const RunArgs& a) {
  if (!a.replay.empty()) {
    const ExperimentResult stored = load_result(a.replay);
    if (stored.command != command) {
      throw ConfigError("result file was produced by '" + stored.command + "', not '" + command + "'");
    }
    const ReplayOutcome outcome = replay(stored);
    for (const auto& m : outcome.mismatches) std::printf("MISMATCH %s\n", m.c_str());
    std::printf("replay of %s: %s (%zu runs)\n", a.replay.c_str(), outcome.identical ? "identical" : "DIFFERENT",
                stored.runs.size());
    return outcome.identical ? kOk : kCheckFailed;
  }
  if (a.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig cfg = load_config(a.config);
  if (!a.seeds.empty()) {
    cfg.compare.seeds = a.seeds;
    if (command != "compare") cfg.train.seed = a.seeds.front();
  }
  return persist(run_command(command, cfg), a.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LogitClip noise-robust classification lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  BoundsArgs bounds;
  auto* sb = app.add_subcommand("bounds", "CE loss bounds under logit clipping as CSV (k,tau,lower,upper,a)");
  sb->add_option("--k", bounds.k, "class counts")->expected(1, -1);
  sb->add_option("--tau-min", bounds.tau_min, "first threshold");
  sb->add_option("--tau-max", bounds.tau_max, "last threshold (inclusive)");
  sb->add_option("--tau-step", bounds.tau_step, "threshold step");
  sb->add_option("--out", bounds.out, "CSV path (stdout when omitted)");

  GradcheckArgs gc;
  auto* sg = app.add_subcommand("gradcheck", "finite-difference check of every loss x transform");
  sg->add_option("--loss", gc.losses, "loss names (default: whole zoo)")->expected(1, -1);
  sg->add_option("--trials", gc.trials, "random cases per combination");
  sg->add_option("--seed", gc.seed, "seed");
  sg->add_option("--tolerance", gc.tolerance, "maximum relative error");
  sg->add_flag("--corrupt-gradient", gc.corrupt, "perturb analytic gradients (negative control)");

  NoiseArgs na;
  auto* sn = app.add_subcommand("noise", "inject label noise and write index,noisy_label CSV");
  sn->add_option("--config", na.config, "experiment config (dataset + noise)")->required();
  sn->add_option("--data", na.labels_csv, "dataset CSV to corrupt instead of the configured dataset");
  sn->add_option("--seed", na.seed, "noise seed");
  sn->add_option("--out", na.out, "output CSV (stdout when omitted)");

  GenArgs ga;
  auto* sd = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
  sd->add_option("--kind", ga.kind, "gaussians | two_moons | rings");
  sd->add_option("--k", ga.k, "classes");
  sd->add_option("--n", ga.n, "training samples");
  sd->add_option("--n-test", ga.n_test, "test samples (needs --test-out)");
  sd->add_option("--d", ga.d, "feature dimension");
  sd->add_option("--separation", ga.separation, "class separation");
  sd->add_option("--seed", ga.seed, "seed");
  sd->add_option("--out", ga.out, "training CSV")->required();
  sd->add_option("--test-out", ga.test_out, "test CSV");

  RunArgs ra;
  std::vector<CLI::App*> runners;
  for (const char* name : {"train", "sweep", "compare"}) {
    const std::string desc = std::string(name) == "train"   ? "train one model from a config"
                             : std::string(name) == "sweep" ? "select the clip threshold on noisy hold-out data"
                                                            : "every loss with and without LC over several seeds";
    auto* s = app.add_subcommand(name, desc);
    s->add_option("--config", ra.config, "experiment config JSON");
    s->add_option("--out", ra.out, "result JSON path (CSV summary goes next to it)");
    s->add_option("--seeds", ra.seeds, "override seeds")->expected(1, -1);
    s->add_option("--replay", ra.replay, "re-run a stored result and compare bitwise");
    runners.push_back(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*sb) return cmd_bounds(bounds);
    if (*sg) return cmd_gradcheck(gc);
    if (*sn) return cmd_noise(na);
    if (*sd) return cmd_gen_data(ga);
    for (auto* s : runners) {
      if (*s) return cmd_run(s->get_name(), ra);
    }
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumericalAbort;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::domain_error& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
