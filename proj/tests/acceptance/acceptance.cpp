// Acceptance suite: one PASS/FAIL line per criterion. Arguments select a subset
// of criteria by number; no arguments runs all ten.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "logitclip/bounds.hpp"
#include "logitclip/datasets.hpp"
#include "logitclip/errors.hpp"
#include "logitclip/experiment.hpp"
#include "logitclip/gradcheck.hpp"

using namespace logitclip;
namespace fs = std::filesystem;

namespace {

// ----- pinned tolerances -----
constexpr double kContainmentSlack = 1e-9;
constexpr double kSpotTolerance = 1e-5;
constexpr double kImplementationVsOracle = 1e-12;
constexpr double kGradTolerance = 1e-6;
constexpr double kIdentityTolerance = 1e-9;
constexpr double kMcStandardErrors = 3.0;
constexpr double kNoiseSigmas = 3.0;
constexpr double kInstanceRateTolerance = 1e-3;
constexpr double kLargeTauBand = 0.005;
constexpr double kSeedBandMultiplier = 2.0;
// Golden threshold for CE+LC over CE on the trend scenario, from the seeded pilot
// run (seeds 1-3, recorded in the README), about half the observed gain.
constexpr double kTrendMargin = 0.001;

constexpr double kRuntimeContainment = 10.0;
constexpr double kRuntimeSpot = 1.0;
constexpr double kRuntimeGradients = 60.0;
constexpr double kRuntimeRisk = 60.0;
constexpr double kRuntimeTrend = 600.0;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ----- trend scenario shared by criteria 7, 8 and 10 -----

ExperimentConfig scenario_config() {
  ExperimentConfig cfg;
  cfg.dataset = DatasetConfig{"gaussians", 4, 4000, 2, 3.0, 1000, "", ""};
  cfg.noise.kind = noise::Symmetric{0.4};
  cfg.model.hidden = {64, 64};
  cfg.train = TrainConfig{};  // 100 epochs, batch 128, lr 0.1, momentum 0.9, wd 5e-4, decay at 40/70
  cfg.sweep.grid = default_inv_tau_grid();
  cfg.sweep.val_fraction = 0.2;
  cfg.compare.losses = {base::Ce{}};
  cfg.compare.seeds = {1, 2, 3};
  cfg.compare.lc_clip = ClipConfig::by_norm(1.0);
  cfg.seed = 1;
  return cfg;
}

struct Stats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
  double mean_drop = 0.0;
};

Stats stats_of(const std::vector<TrainReport>& reports) {
  Stats s;
  s.n = reports.size();
  for (const auto& r : reports) {
    s.mean += r.final_metric;
    s.mean_drop += r.peak_to_final_drop();
  }
  s.mean /= static_cast<double>(s.n);
  s.mean_drop /= static_cast<double>(s.n);
  double ss = 0.0;
  for (const auto& r : reports) ss += (r.final_metric - s.mean) * (r.final_metric - s.mean);
  s.std = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  return s;
}

// 2x the standard error of a difference of two seed means.
double seed_band(const Stats& a, const Stats& b) {
  return kSeedBandMultiplier * std::sqrt(a.std * a.std / static_cast<double>(a.n) + b.std * b.std / static_cast<double>(b.n));
}

struct Scenario {
  ExperimentResult compare;
  std::vector<TrainReport> ce, lc;
  std::vector<double> winners;
  double seconds = 0.0;
};

Scenario& scenario() {
  static std::optional<Scenario> cache;
  if (!cache) {
    const auto t0 = Clock::now();
    Scenario s;
    s.compare = run_compare(scenario_config());
    for (const RunRecord& r : s.compare.runs) {
      (r.lc ? s.lc : s.ce).push_back(r.report);
      if (r.lc) s.winners.push_back(*r.selected_grid_value);
    }
    s.seconds = seconds_since(t0);
    cache = std::move(s);
  }
  return *cache;
}

// ----- criteria -----

Outcome containment() {
  const auto t0 = Clock::now();
  Rng rng = Rng(1001);
  std::size_t checked = 0, violations = 0;
  double worst = -INFINITY;
  for (std::size_t k : {2, 10, 100}) {
    for (double tau : {0.5, 1.0, 2.0}) {
      const double lo = std::log1p((k - 1.0) * std::exp(-2.0 * tau));
      const double hi = std::log1p((k - 1.0) * std::exp(2.0 * tau));
      for (NormOrder p : {NormOrder::L2, NormOrder::Inf}) {
        Vec64 z(k);
        for (int t = 0; t < 100000; ++t) {
          for (double& v : z) v = rng.uniform(-50.0, 50.0);
          const std::size_t y = rng.index(k);
          const double v = ce_with_clip(z, y, tau, p);
          worst = std::max({worst, lo - v, v - hi});
          if (!(v >= lo - kContainmentSlack && v <= hi + kContainmentSlack)) ++violations;
          ++checked;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < kRuntimeContainment,
          fmt("%zu vectors, %zu outside the bounds (largest signed excess over the exact bounds %.3e), %.2fs",
              checked, violations, worst, secs)};
}

Outcome spot_values() {
  using boost::multiprecision::cpp_dec_float_50;
  const auto t0 = Clock::now();
  const cpp_dec_float_50 k = 10, tau = 1;
  const cpp_dec_float_50 lower = log(1 + (k - 1) * exp(-2 * tau));
  const cpp_dec_float_50 upper = log(1 + (k - 1) * exp(2 * tau));
  const cpp_dec_float_50 a = upper - lower;
  const double ol = lower.convert_to<double>(), ou = upper.convert_to<double>(), oa = a.convert_to<double>();
  const LossBounds b = ce_clip_bounds(10, 1.0);
  const double ia = a_const(10, 1.0);
  const double stated_err =
      std::max({std::abs(0.796611 - ol), std::abs(4.212150 - ou), std::abs(3.415539 - oa)});
  const double impl_err = std::max({std::abs(b.lower - ol), std::abs(b.upper - ou), std::abs(ia - oa)});
  const double secs = seconds_since(t0);
  return {stated_err <= kSpotTolerance && impl_err <= kImplementationVsOracle && secs < kRuntimeSpot,
          fmt("oracle (%.9f, %.9f, A %.9f); stated values off by %.2e, implementation by %.2e, %.3fs", ol, ou, oa,
              stated_err, impl_err, secs)};
}

Outcome gradients() {
  const auto t0 = Clock::now();
  GradCheckOptions opts;
  opts.trials = 1000;
  opts.tolerance = kGradTolerance;
  const auto losses = gradcheck_losses();
  const auto transforms = gradcheck_transforms();
  std::size_t failed = 0, checked = 0, skipped = 0;
  double worst = 0.0;
  for (const auto& c : run_gradcheck(losses, transforms, opts)) {
    failed += c.passed ? 0 : 1;
    checked += c.checked;
    skipped += c.skipped;
    worst = std::max(worst, c.max_rel_error);
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && secs < kRuntimeGradients,
          fmt("%zu combinations, %zu failed; %zu cases checked, %zu kink-adjacent skipped; max rel err %.2e, %.2fs",
              losses.size() * transforms.size(), failed, checked, skipped, worst, secs)};
}

Outcome symmetric_identities() {
  Rng rng(2002);
  double worst_mae = 0.0, worst_nce = 0.0, worst_rce = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t k = 2 + rng.index(99);
    Vec64 z(k);
    for (double& v : z) v = rng.uniform(-5.0, 5.0);
    const Vec64 p = stable_softmax(z);
    double s_mae = 0.0, s_nce = 0.0, s_rce = 0.0;
    for (std::size_t y = 0; y < k; ++y) {
      s_mae += mae(p, y);
      s_nce += nce(p, y);
      s_rce += rce(p, y);
    }
    const double km1 = static_cast<double>(k - 1);
    worst_mae = std::max(worst_mae, std::abs(s_mae - 2.0 * km1));
    worst_nce = std::max(worst_nce, std::abs(s_nce - 1.0));
    worst_rce = std::max(worst_rce, std::abs(s_rce - 4.0 * km1));
  }
  const bool ok = worst_mae <= kIdentityTolerance && worst_nce <= kIdentityTolerance && worst_rce <= kIdentityTolerance;
  return {ok, fmt("10000 interior p, K in [2, 100]; max deviation MAE %.2e, NCE %.2e, RCE %.2e", worst_mae, worst_nce,
                  worst_rce)};
}

Outcome risk_decomposition() {
  const auto t0 = Clock::now();
  constexpr std::size_t k = 4, n = 500, injections = 200;
  constexpr double tau = 1.0;
  Rng root(3003);
  TrainTestData data = gen_synthetic_split(SyntheticKind::Gaussians, k, n, 1, 2, 3.0, root.split("data"));
  Rng init = root.split("init");
  MlpModel model = MlpModel::init({2, 64, 64, k}, Activation::ReLU, init);
  // A few clean epochs so the classifier separates clean and noisy risk.
  TrainConfig warm;
  warm.epochs = 5;
  warm.decay_epochs = {};
  warm.last_n = 1;
  data.train.noisy_labels = *data.train.clean_labels;
  train(model, data.train, LossSpec{}, warm, data.train);
  const Mat64 logits = model.forward_batch(data.train.features);
  const Labels& clean = *data.train.clean_labels;

  Mat64 loss(n, k);
  double r_clean = 0.0, r_full = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      loss(i, j) = ce_with_clip(logits.row(i), j, tau, NormOrder::L2);
      r_full += loss(i, j);
    }
    r_clean += loss(i, clean[i]);
  }
  r_clean /= n;
  r_full /= n;

  std::string detail;
  bool ok = true;
  for (double eta : {0.1, 0.3, 0.5}) {
    const TransitionMatrix t = symmetric_matrix(k, eta);
    Rng rng = root.split("inject").split(static_cast<std::uint64_t>(eta * 10));
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t r = 0; r < injections; ++r) {
      const Labels noisy = inject(clean, t, rng);
      double risk = 0.0;
      for (std::size_t i = 0; i < n; ++i) risk += loss(i, noisy[i]);
      risk /= n;
      sum += risk;
      sum2 += risk * risk;
    }
    const double mean = sum / injections;
    const double var = (sum2 - injections * mean * mean) / (injections - 1.0);
    const double se = std::sqrt(var / injections);
    const double predicted = noisy_risk_decomposition(r_clean, r_full, k, eta);
    const double z = std::abs(mean - predicted) / se;
    ok = ok && z <= kMcStandardErrors;
    detail += fmt("eta %.1f: empirical %.5f vs predicted %.5f (%.2f SE); ", eta, mean, predicted, z);
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < kRuntimeRisk;
  return {ok, detail + fmt("%.2fs", secs)};
}

Outcome noise_concentration() {
  constexpr std::size_t k = 10, n = 100000;
  Rng rng(4004);
  Labels clean(n);
  for (std::size_t i = 0; i < n; ++i) clean[i] = i % k;
  bool ok = true;
  std::string detail;
  for (double eta : {0.2, 0.5}) {
    const Labels noisy = inject(clean, symmetric_matrix(k, eta), rng);
    const double rate = measure_noise(clean, noisy, k).rate;
    const double bound = kNoiseSigmas * std::sqrt(eta * (1.0 - eta) / n);
    ok = ok && std::abs(rate - eta) <= bound;
    detail += fmt("sym %.1f -> %.5f (|d| %.5f <= %.5f); ", eta, rate, std::abs(rate - eta), bound);
  }

  const PairMap pairs = cifar10_pair_map();
  std::size_t stray = 0, flips = 0;
  {
    const Labels noisy = inject(clean, asymmetric_matrix(k, pairs, 0.4), rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (noisy[i] == clean[i]) continue;
      ++flips;
      bool mapped = false;
      for (const auto& [from, to] : pairs) mapped = mapped || (clean[i] == from && noisy[i] == to);
      if (!mapped) ++stray;
    }
    const Labels circ = inject(clean, circular_matrix(k, 0.4), rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (circ[i] == clean[i]) continue;
      ++flips;
      if (circ[i] != (clean[i] + 1) % k) ++stray;
    }
  }
  ok = ok && stray == 0 && flips > 0;
  detail += fmt("asymmetric presets: %zu flips, %zu to unmapped targets; ", flips, stray);

  Mat64 x(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
  }
  double worst = 0.0;
  for (double eta : {0.2, 0.4}) {
    const InstanceNoise inst = inject_instance_dependent(x, clean, k, eta, rng);
    double mean = 0.0;
    for (double r : inst.rates) mean += r;
    mean /= n;
    worst = std::max(worst, std::abs(mean - eta));
  }
  ok = ok && worst <= kInstanceRateTolerance;
  detail += fmt("instance-dependent mean rate off by at most %.2e", worst);
  return {ok, detail};
}

Outcome trend() {
  Scenario& s = scenario();
  const Stats ce = stats_of(s.ce), lc = stats_of(s.lc);
  const double gain = lc.mean - ce.mean;
  const bool ok = gain >= kTrendMargin && gain > 0.0 && ce.mean_drop > lc.mean_drop && s.seconds < kRuntimeTrend;
  std::string winners;
  for (double w : s.winners) winners += fmt("%g ", w);
  return {ok, fmt("CE %.4f+-%.4f, CE+LC %.4f+-%.4f (gain %+.4f, margin %.4f); peak-to-final drop CE %.4f vs LC %.4f; "
                  "selected 1/tau: %s; %.1fs",
                  ce.mean, ce.std, lc.mean, lc.std, gain, kTrendMargin, ce.mean_drop, lc.mean_drop, winners.c_str(),
                  s.seconds)};
}

Outcome ablations() {
  const auto t0 = Clock::now();
  Scenario& s = scenario();
  const ExperimentConfig cfg = scenario_config();
  const Stats ce = stats_of(s.ce), lc = stats_of(s.lc);

  std::vector<TrainReport> by_value, relu6, norm_reg;
  std::vector<double> reg_choice;
  ExperimentConfig relu_cfg = cfg;
  relu_cfg.model.activation = Activation::ReLU6;
  for (std::uint64_t seed : cfg.compare.seeds) {
    PreparedData data = prepare_data(cfg, seed);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const ModelFactory factory = model_factory(cfg, data.train.d(), data.train.k, seed);

    const LossSpec value_spec{base::Ce{}, ClipConfig::by_value(1.0), 0.0};
    by_value.push_back(
        sweep_tau(factory, data.train, value_spec, cfg.sweep.grid, tc, cfg.sweep.val_fraction, data.test).final_report);

    MlpModel m6 = model_factory(relu_cfg, data.train.d(), data.train.k, seed)();
    relu6.push_back(train(m6, data.train, LossSpec{}, tc, data.test));

    std::vector<LossSpec> candidates;
    const std::vector<double> lambdas{0.01, 0.05, 0.1, 0.5};
    for (double lam : lambdas) candidates.push_back(LossSpec{base::Ce{}, ClipConfig::identity(), lam});
    SelectionResult sel = select_by_validation(factory, data.train, candidates, tc, cfg.sweep.val_fraction, data.test);
    reg_choice.push_back(lambdas[sel.best_index]);
    norm_reg.push_back(std::move(sel.final_report));
  }
  const Stats bv = stats_of(by_value), r6 = stats_of(relu6), nr = stats_of(norm_reg);
  const double band_r6 = seed_band(ce, r6), band_lc = seed_band(ce, lc);
  const bool norm_vs_value = lc.mean >= bv.mean;
  const bool relu6_flat = r6.mean - ce.mean <= band_r6;
  const bool lc_beyond_band = lc.mean - ce.mean > band_lc;
  const bool reg_inferior = nr.mean <= lc.mean;
  std::string lams;
  for (double l : reg_choice) lams += fmt("%g ", l);
  return {norm_vs_value && relu6_flat && lc_beyond_band && reg_inferior,
          fmt("LC by-norm %.4f vs by-value %.4f [%s]; ReLU6 %.4f vs CE %.4f, diff %+.4f within band %.4f [%s]; "
              "LC-CE %+.4f beyond band %.4f [%s]; norm-reg %.4f (lambda %s) <= LC %.4f [%s]; %.1fs",
              lc.mean, bv.mean, norm_vs_value ? "ok" : "violated", r6.mean, ce.mean, r6.mean - ce.mean, band_r6,
              relu6_flat ? "ok" : "violated", lc.mean - ce.mean, band_lc, lc_beyond_band ? "ok" : "violated", nr.mean,
              lams.c_str(), lc.mean, reg_inferior ? "ok" : "violated", seconds_since(t0))};
}

Outcome small_tau() {
  const auto t0 = Clock::now();
  ExperimentConfig cfg = scenario_config();
  cfg.noise.kind = noise::None{};
  std::map<std::string, std::vector<double>> acc;
  const std::vector<std::pair<std::string, ClipConfig>> arms{
      {"ce", ClipConfig::identity()},
      {"inv5", ClipConfig::by_norm(1.0 / 5.0)},
      {"inv0.5", ClipConfig::by_norm(1.0 / 0.5)},
      {"inv0.1", ClipConfig::by_norm(1.0 / 0.1)},
  };
  for (std::uint64_t seed : cfg.compare.seeds) {
    PreparedData data = prepare_data(cfg, seed);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    for (const auto& [name, clip] : arms) {
      MlpModel model = model_factory(cfg, data.train.d(), data.train.k, seed)();
      train(model, data.train, LossSpec{base::Ce{}, clip, 0.0}, tc, data.test);
      acc[name].push_back(accuracy(model, data.train));
    }
  }
  auto mean = [&](const std::string& name) {
    double s = 0.0;
    for (double v : acc[name]) s += v;
    return s / static_cast<double>(acc[name].size());
  };
  const double a5 = mean("inv5"), a05 = mean("inv0.5"), a01 = mean("inv0.1"), ace = mean("ce");
  const bool ok = a5 < a05 && std::abs(a01 - ace) <= kLargeTauBand;
  return {ok, fmt("clean train accuracy 1/tau=5 %.4f, 1/tau=0.5 %.4f, 1/tau=0.1 %.4f, CE %.4f (|diff| %.4f <= %.3f); "
                  "%.1fs",
                  a5, a05, a01, ace, std::abs(a01 - ace), kLargeTauBand, seconds_since(t0))};
}

Outcome replay_check() {
  const auto t0 = Clock::now();
  Scenario& s = scenario();
  const fs::path dir = fs::temp_directory_path() / "logitclip-acceptance";
  const fs::path path = dir / "compare.json";
  write_result(path, s.compare);
  const ExperimentResult stored = load_result(path);
  const ReplayOutcome out = replay(stored);
  std::string detail = fmt("%zu runs replayed from %s: %s", stored.runs.size(), path.string().c_str(),
                           out.identical ? "bitwise identical" : "MISMATCH");
  for (const auto& m : out.mismatches) detail += "; " + m;
  fs::remove_all(dir);
  return {out.identical, detail + fmt("; %.1fs", seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"loss containment under clipping", containment},
      {"closed-form bound spot values", spot_values},
      {"gradient suite", gradients},
      {"symmetric-condition identities", symmetric_identities},
      {"risk decomposition", risk_decomposition},
      {"noise-rate concentration", noise_concentration},
      {"robustness trend", trend},
      {"ablation orderings", ablations},
      {"small-tau underfitting", small_tau},
      {"determinism and replay", replay_check},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::strtoul(argv[i], nullptr, 10));

  std::size_t failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (!selected.empty() && !selected.count(c + 1)) continue;
    Outcome o;
    try {
      o = criteria[c].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2zu %s: %s: %s\n", c + 1, o.pass ? "PASS" : "FAIL", criteria[c].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
