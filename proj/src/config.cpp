#include "logitclip/config.hpp"

#include <cstdio>
#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>

#include "logitclip/errors.hpp"

namespace logitclip {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  require_object(j, where);
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

// Reads j[key] into out when present; a type mismatch becomes a ConfigError.
template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

void read_size(const json& j, const char* key, std::size_t& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0)) {
    throw ConfigError(where + "." + key + ": expected a non-negative integer");
  }
  out = it->get<std::size_t>();
}

double number_at(const json& j, const char* key, double fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return it->get<double>();
}

}  // namespace

// ----- losses -----

BaseLoss base_loss_from_name(const std::string& name) {
  if (name == "ce") return base::Ce{};
  if (name == "focal") return base::Focal{};
  if (name == "mae") return base::Mae{};
  if (name == "gce") return base::Gce{};
  if (name == "sce") return base::Sce{};
  if (name == "phuber_ce") return base::PHuberCe{};
  if (name == "taylor_ce") return base::TaylorCe{};
  if (name == "nce") return base::Nce{};
  if (name == "ael") return base::Ael{};
  if (name == "aul") return base::Aul{};
  if (name == "agce") return base::Agce{};
  if (name == "nce+mae") return nce_mae();
  if (name == "nce+agce") return nce_agce();
  throw ConfigError("unknown loss '" + name + "'");
}

json base_loss_to_json(const BaseLoss& loss) {
  json params = json::object();
  std::visit(Overloaded{
                 [](const base::Ce&) {},
                 [](const base::Mae&) {},
                 [](const base::Nce&) {},
                 [&](const base::Focal& l) { params["gamma"] = l.gamma; },
                 [&](const base::Gce& l) { params["q"] = l.q; },
                 [&](const base::Sce& l) {
                   params["alpha"] = l.alpha;
                   params["beta"] = l.beta;
                   params["a_clamp"] = l.a_clamp;
                 },
                 [&](const base::PHuberCe& l) { params["tau_h"] = l.tau_h; },
                 [&](const base::TaylorCe& l) { params["order"] = l.order; },
                 [&](const base::Ael& l) { params["a"] = l.a; },
                 [&](const base::Aul& l) {
                   params["a"] = l.a;
                   params["q"] = l.q;
                 },
                 [&](const base::Agce& l) {
                   params["a"] = l.a;
                   params["q"] = l.q;
                 },
                 [&](const Combo& c) {
                   if (!c.active || !c.passive) throw ConfigError("combo loss is missing a component");
                   params["alpha"] = c.alpha;
                   params["beta"] = c.beta;
                   params["active"] = base_loss_to_json(*c.active);
                   params["passive"] = base_loss_to_json(*c.passive);
                 },
             },
             loss.as_variant());
  return json{{"base", loss_name(loss)}, {"params", params}};
}

BaseLoss base_loss_from_json(const json& j) {
  const std::string where = "loss";
  if (j.is_string()) return base_loss_from_name(j.get<std::string>());
  require_object(j, where);
  std::string name = "ce";
  read(j, "base", name, where);
  json params = json::object();
  if (auto it = j.find("params"); it != j.end() && !it->is_null()) params = *it;
  const std::string pw = where + ".params";
  require_object(params, pw);

  auto done = [&](BaseLoss loss, std::initializer_list<const char*> keys) {
    check_keys(params, pw, keys);
    validate(loss);
    return loss;
  };

  if (name == "ce") return done(base::Ce{}, {});
  if (name == "mae") return done(base::Mae{}, {});
  if (name == "nce") return done(base::Nce{}, {});
  if (name == "focal") return done(base::Focal{number_at(params, "gamma", 0.5, pw)}, {"gamma"});
  if (name == "gce") return done(base::Gce{number_at(params, "q", 0.7, pw)}, {"q"});
  if (name == "sce") {
    return done(base::Sce{number_at(params, "alpha", 0.5, pw), number_at(params, "beta", 1.0, pw),
                          number_at(params, "a_clamp", -4.0, pw)},
                {"alpha", "beta", "a_clamp"});
  }
  if (name == "phuber_ce") return done(base::PHuberCe{number_at(params, "tau_h", 10.0, pw)}, {"tau_h"});
  if (name == "taylor_ce") {
    int order = 2;
    read(params, "order", order, pw);
    return done(base::TaylorCe{order}, {"order"});
  }
  if (name == "ael") return done(base::Ael{number_at(params, "a", 2.5, pw)}, {"a"});
  if (name == "aul") {
    return done(base::Aul{number_at(params, "a", 5.5, pw), number_at(params, "q", 3.0, pw)}, {"a", "q"});
  }
  if (name == "agce") {
    return done(base::Agce{number_at(params, "a", 1.8, pw), number_at(params, "q", 3.0, pw)}, {"a", "q"});
  }
  if (name == "combo") {
    check_keys(params, pw, {"alpha", "beta", "active", "passive"});
    if (!params.contains("active") || !params.contains("passive")) {
      throw ConfigError("combo loss needs params.active and params.passive");
    }
    BaseLoss loss = make_combo(number_at(params, "alpha", 1.0, pw), base_loss_from_json(params["active"]),
                               number_at(params, "beta", 1.0, pw), base_loss_from_json(params["passive"]));
    validate(loss);
    return loss;
  }
  if (name == "nce+mae" || name == "nce+agce") return done(base_loss_from_name(name), {});
  throw ConfigError("unknown loss '" + name + "'");
}

json clip_to_json(const ClipConfig& clip) {
  json j{{"kind", to_string(clip.kind)}, {"tau", clip.tau}};
  if (clip.p == NormOrder::Inf) {
    j["p"] = "inf";
  } else {
    j["p"] = norm_order_to_double(clip.p);
  }
  return j;
}

ClipConfig clip_from_json(const json& j) {
  const std::string where = "loss.clip";
  check_keys(j, where, {"kind", "tau", "p"});
  ClipConfig clip;
  std::string kind = "identity";
  read(j, "kind", kind, where);
  clip.kind = clip_kind_from_string(kind);
  clip.tau = number_at(j, "tau", 1.0, where);
  if (auto it = j.find("p"); it != j.end()) {
    if (it->is_string()) {
      const auto s = it->get<std::string>();
      if (s != "inf") throw ConfigError("loss.clip.p: expected 1, 2 or \"inf\"");
      clip.p = NormOrder::Inf;
    } else if (it->is_number()) {
      clip.p = norm_order_from_double(it->get<double>());
    } else {
      throw ConfigError("loss.clip.p: expected 1, 2 or \"inf\"");
    }
  }
  if (clip.kind != ClipKind::Identity) clip.validate();
  return clip;
}

json loss_spec_to_json(const LossSpec& spec) {
  json j = base_loss_to_json(spec.base);
  j["clip"] = clip_to_json(spec.clip);
  j["norm_reg_lambda"] = spec.norm_reg_lambda;
  return j;
}

LossSpec loss_spec_from_json(const json& j) {
  check_keys(j, "loss", {"base", "params", "clip", "norm_reg_lambda"});
  LossSpec spec;
  spec.base = base_loss_from_json(j);
  if (auto it = j.find("clip"); it != j.end()) spec.clip = clip_from_json(*it);
  spec.norm_reg_lambda = number_at(j, "norm_reg_lambda", 0.0, "loss");
  spec.validate();
  return spec;
}

// ----- noise -----

json noise_to_json(const NoiseSpec& spec) {
  json j{{"kind", noise_kind_name(spec)}};
  std::visit(Overloaded{
                 [](const noise::None&) {},
                 [&](const noise::Symmetric& n) { j["eta"] = n.eta; },
                 [&](const noise::AsymmetricPairs& n) {
                   j["eta"] = n.eta;
                   json pairs = json::array();
                   for (const auto& [from, to] : n.pairs) pairs.push_back({from, to});
                   j["pairs"] = pairs;
                 },
                 [&](const noise::AsymmetricCircular& n) { j["eta"] = n.eta; },
                 [&](const noise::InstanceDependent& n) { j["eta"] = n.eta; },
                 [&](const noise::External& n) { j["path"] = n.path; },
             },
             spec.kind);
  return j;
}

NoiseSpec noise_from_json(const json& j) {
  const std::string where = "noise";
  check_keys(j, where, {"kind", "eta", "pairs", "path"});
  std::string kind = "none";
  read(j, "kind", kind, where);
  const double eta = number_at(j, "eta", 0.0, where);
  NoiseSpec spec;
  if (kind == "none") {
    spec.kind = noise::None{};
  } else if (kind == "symmetric") {
    spec.kind = noise::Symmetric{eta};
  } else if (kind == "asymmetric_pairs") {
    noise::AsymmetricPairs n{cifar10_pair_map(), eta};
    if (auto it = j.find("pairs"); it != j.end()) {
      if (it->is_string()) {
        if (it->get<std::string>() != "cifar10") throw ConfigError("noise.pairs: unknown preset");
      } else if (it->is_array()) {
        n.pairs.clear();
        for (const auto& p : *it) {
          if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() || !p[1].is_number_unsigned()) {
            throw ConfigError("noise.pairs: expected [from, to] pairs of class indices");
          }
          n.pairs.emplace_back(p[0].get<std::size_t>(), p[1].get<std::size_t>());
        }
      } else {
        throw ConfigError("noise.pairs: expected a list of pairs or \"cifar10\"");
      }
    }
    spec.kind = std::move(n);
  } else if (kind == "asymmetric_circular") {
    spec.kind = noise::AsymmetricCircular{eta};
  } else if (kind == "instance_dependent") {
    spec.kind = noise::InstanceDependent{eta};
  } else if (kind == "external") {
    std::string path;
    read(j, "path", path, where);
    if (path.empty()) throw ConfigError("noise.path is required for external noise");
    spec.kind = noise::External{path};
  } else {
    throw ConfigError("unknown noise kind '" + kind + "'");
  }
  return spec;
}

// ----- training -----

json train_config_to_json(const TrainConfig& cfg) {
  json j{{"epochs", cfg.epochs},
         {"batch", cfg.batch},
         {"lr", cfg.lr},
         {"momentum", cfg.momentum},
         {"weight_decay", cfg.weight_decay},
         {"decay_epochs", cfg.decay_epochs},
         {"decay_factor", cfg.decay_factor},
         {"grad_clip", nullptr},
         {"eval_every", cfg.eval_every},
         {"last_n", cfg.last_n},
         {"seed", cfg.seed}};
  if (cfg.grad_clip) j["grad_clip"] = *cfg.grad_clip;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  const std::string where = "train";
  check_keys(j, where,
             {"epochs", "batch", "lr", "momentum", "weight_decay", "decay_epochs", "decay_factor",
              "grad_clip", "eval_every", "last_n", "seed"});
  TrainConfig cfg;
  read_size(j, "epochs", cfg.epochs, where);
  read_size(j, "batch", cfg.batch, where);
  cfg.lr = number_at(j, "lr", cfg.lr, where);
  cfg.momentum = number_at(j, "momentum", cfg.momentum, where);
  cfg.weight_decay = number_at(j, "weight_decay", cfg.weight_decay, where);
  read(j, "decay_epochs", cfg.decay_epochs, where);
  cfg.decay_factor = number_at(j, "decay_factor", cfg.decay_factor, where);
  if (auto it = j.find("grad_clip"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw ConfigError("train.grad_clip: expected a number or null");
    cfg.grad_clip = it->get<double>();
  }
  read_size(j, "eval_every", cfg.eval_every, where);
  read_size(j, "last_n", cfg.last_n, where);
  read(j, "seed", cfg.seed, where);
  cfg.validate();
  return cfg;
}

// ----- whole experiment -----

void ExperimentConfig::validate() const {
  if (dataset.kind == "csv") {
    if (dataset.csv_path.empty()) throw ConfigError("dataset.csv_path is required for csv datasets");
  } else {
    if (dataset.kind != "gaussians" && dataset.kind != "two_moons" && dataset.kind != "two-moons" &&
        dataset.kind != "rings") {
      throw ConfigError("unknown dataset kind '" + dataset.kind + "'");
    }
    if (dataset.k < 2) throw ConfigError("dataset.k must be at least 2");
    if (dataset.n < dataset.k) throw ConfigError("dataset.n must be at least dataset.k");
    if (dataset.d < 2) throw ConfigError("dataset.d must be at least 2");
    if (!(dataset.separation > 0.0)) throw ConfigError("dataset.separation must be positive");
    if (dataset.n_test == 0) throw ConfigError("dataset.n_test must be positive");
  }
  noise.validate(dataset.k);
  loss.validate();
  train.validate();
  if (sweep.grid.empty()) throw ConfigError("sweep.grid must not be empty");
  for (double g : sweep.grid) {
    if (!(g > 0.0)) throw ConfigError("sweep.grid values must be positive");
  }
  if (!(sweep.val_fraction > 0.0 && sweep.val_fraction <= 0.5)) {
    throw ConfigError("sweep.val_fraction must lie in (0, 0.5]");
  }
  if (compare.losses.empty()) throw ConfigError("compare.losses must not be empty");
  if (compare.seeds.empty()) throw ConfigError("compare.seeds must contain at least one seed");
  for (const auto& l : compare.losses) logitclip::validate(l);
  if (compare.lc_clip.kind == ClipKind::Identity) throw ConfigError("compare.lc_clip must not be identity");
}

json config_to_json(const ExperimentConfig& cfg) {
  json losses = json::array();
  for (const auto& l : cfg.compare.losses) losses.push_back(base_loss_to_json(l));
  json lc = clip_to_json(cfg.compare.lc_clip);
  lc.erase("tau");
  return json{
      {"dataset",
       {{"kind", cfg.dataset.kind},
        {"k", cfg.dataset.k},
        {"n", cfg.dataset.n},
        {"d", cfg.dataset.d},
        {"separation", cfg.dataset.separation},
        {"n_test", cfg.dataset.n_test},
        {"csv_path", cfg.dataset.csv_path},
        {"test_csv_path", cfg.dataset.test_csv_path}}},
      {"noise", noise_to_json(cfg.noise)},
      {"loss", loss_spec_to_json(cfg.loss)},
      {"train", train_config_to_json(cfg.train)},
      {"model", {{"hidden", cfg.model.hidden}, {"activation", to_string(cfg.model.activation)}}},
      {"sweep", {{"grid", cfg.sweep.grid}, {"val_fraction", cfg.sweep.val_fraction}}},
      {"compare", {{"losses", losses}, {"seeds", cfg.compare.seeds}, {"lc_clip", lc}}},
      {"seed", cfg.seed},
      {"output", cfg.output},
  };
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "config", {"dataset", "noise", "loss", "train", "model", "sweep", "compare", "seed", "output"});
  ExperimentConfig cfg;
  if (auto it = j.find("dataset"); it != j.end()) {
    const std::string w = "dataset";
    check_keys(*it, w, {"kind", "k", "n", "d", "separation", "n_test", "csv_path", "test_csv_path"});
    read(*it, "kind", cfg.dataset.kind, w);
    read_size(*it, "k", cfg.dataset.k, w);
    read_size(*it, "n", cfg.dataset.n, w);
    read_size(*it, "d", cfg.dataset.d, w);
    cfg.dataset.separation = number_at(*it, "separation", cfg.dataset.separation, w);
    read_size(*it, "n_test", cfg.dataset.n_test, w);
    read(*it, "csv_path", cfg.dataset.csv_path, w);
    read(*it, "test_csv_path", cfg.dataset.test_csv_path, w);
  }
  if (auto it = j.find("noise"); it != j.end()) cfg.noise = noise_from_json(*it);
  if (auto it = j.find("loss"); it != j.end()) cfg.loss = loss_spec_from_json(*it);
  if (auto it = j.find("train"); it != j.end()) cfg.train = train_config_from_json(*it);
  if (auto it = j.find("model"); it != j.end()) {
    check_keys(*it, "model", {"hidden", "activation"});
    read(*it, "hidden", cfg.model.hidden, "model");
    std::string act = to_string(cfg.model.activation);
    read(*it, "activation", act, "model");
    cfg.model.activation = activation_from_string(act);
  }
  if (auto it = j.find("sweep"); it != j.end()) {
    check_keys(*it, "sweep", {"grid", "val_fraction"});
    read(*it, "grid", cfg.sweep.grid, "sweep");
    cfg.sweep.val_fraction = number_at(*it, "val_fraction", cfg.sweep.val_fraction, "sweep");
  }
  if (auto it = j.find("compare"); it != j.end()) {
    check_keys(*it, "compare", {"losses", "seeds", "lc_clip"});
    if (auto l = it->find("losses"); l != it->end()) {
      if (!l->is_array()) throw ConfigError("compare.losses: expected a list");
      cfg.compare.losses.clear();
      for (const auto& entry : *l) cfg.compare.losses.push_back(base_loss_from_json(entry));
    }
    read(*it, "seeds", cfg.compare.seeds, "compare");
    if (auto c = it->find("lc_clip"); c != it->end()) {
      const double tau = cfg.compare.lc_clip.tau;
      cfg.compare.lc_clip = clip_from_json(*c);
      if (!c->contains("tau")) cfg.compare.lc_clip.tau = tau;
    }
  }
  read(j, "seed", cfg.seed, "config");
  read(j, "output", cfg.output, "config");
  if (cfg.dataset.kind == "two-moons") cfg.dataset.kind = "two_moons";
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string content_hash(const json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace logitclip
