#include "csmil/config.hpp"

#include "csmil/evalx.hpp"

namespace csmil {

Json default_config() {
  Json c;
  c["schema"] = "csmil-config/1";
  c["seed"] = 0;

  Json synth;
  synth["k_latent"] = 8;
  synth["s_informative"] = 2;
  synth["d"] = 16;
  synth["bags_per_class"] = 100;
  synth["n_min"] = 10;
  synth["n_max"] = 30;
  synth["component_separation"] = 20.0;
  synth["noise_sigma"] = 1.0;
  synth["positive_fraction"] = 0.03;
  c["synth"] = synth;

  Json cluster;
  cluster["K"] = 8;
  cluster["max_iter"] = 300;
  cluster["tol"] = 1e-6;
  cluster["restarts"] = 10;
  cluster["zscore"] = false;
  c["cluster"] = cluster;

  Json train;
  train["epochs"] = 300;
  train["lr_smooth"] = 1e-3;
  train["lr_beta"] = 1e-2;
  train["gamma"] = 0.0;
  train["batch_size"] = 0;
  train["use_adam"] = true;
  train["freeze_beta"] = false;
  train["grad_clip"] = 5.0;
  train["early_stop_patience"] = 0;
  train["L"] = 64;
  train["shared_head"] = false;
  c["train"] = train;

  Json folds;
  folds["n"] = 5;
  c["folds"] = folds;

  Json sweep;
  sweep["gammas"] = std::vector<double>(kDefaultGammaGrid.begin(), kDefaultGammaGrid.end());
  sweep["ks"] = std::vector<int>(kDefaultKGrid.begin(), kDefaultKGrid.end());
  sweep["gamma_for_k"] = 0.0;
  c["sweep"] = sweep;

  Json recover;
  recover["K"] = 64;
  recover["s"] = 4;
  recover["sigma"] = 0.05;
  recover["beta_min"] = 1.0;
  recover["trials"] = 50;
  recover["m_grid"] = std::vector<int>{8, 16, 32, 64, 134, 192};
  recover["diag_s"] = std::vector<int>{1, 2};
  c["recover"] = recover;

  Json gradcheck;
  gradcheck["seeds"] = 20;
  gradcheck["h"] = 1e-6;
  c["gradcheck"] = gradcheck;

  Json report;
  report["svg"] = true;
  c["report"] = report;
  return c;
}

void merge_config(Json& base, const Json& overlay) {
  if (!overlay.is_object() || !base.is_object()) {
    base = overlay;
    return;
  }
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      merge_config(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

void apply_set(Json& cfg, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
  std::string path = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;  // unquoted strings pass through
  }
  Json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    std::size_t dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("--set has an empty path segment: '" + assignment + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = Json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

void validate_config(const Json& cfg) {
  std::string schema = cfg.value("schema", std::string());
  if (schema != "csmil-config/1")
    throw ConfigError("unsupported config schema '" + schema + "', expected csmil-config/1");
}

namespace {

template <class T>
T want(const Json& cfg, const std::string& section, const std::string& key) {
  try {
    return cfg.at(section).at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + section + "." + key + ": " + e.what());
  }
}

}  // namespace

SynthConfig synth_from_config(const Json& cfg) {
  SynthConfig s;
  s.k_latent = want<int>(cfg, "synth", "k_latent");
  s.s_informative = want<int>(cfg, "synth", "s_informative");
  s.d = want<int>(cfg, "synth", "d");
  s.bags_per_class = want<int>(cfg, "synth", "bags_per_class");
  s.n_min = want<int>(cfg, "synth", "n_min");
  s.n_max = want<int>(cfg, "synth", "n_max");
  s.component_separation = want<double>(cfg, "synth", "component_separation");
  s.noise_sigma = want<double>(cfg, "synth", "noise_sigma");
  s.positive_fraction = want<double>(cfg, "synth", "positive_fraction");
  s.seed = cfg.value("seed", 0ULL);
  return s;
}

TrainConfig train_from_config(const Json& cfg) {
  TrainConfig t;
  t.epochs = want<int>(cfg, "train", "epochs");
  t.lr_smooth = want<double>(cfg, "train", "lr_smooth");
  t.lr_beta = want<double>(cfg, "train", "lr_beta");
  t.gamma = want<double>(cfg, "train", "gamma");
  t.batch_size = want<int>(cfg, "train", "batch_size");
  t.use_adam = want<bool>(cfg, "train", "use_adam");
  t.freeze_beta = want<bool>(cfg, "train", "freeze_beta");
  t.grad_clip = want<double>(cfg, "train", "grad_clip");
  t.early_stop_patience = want<int>(cfg, "train", "early_stop_patience");
  t.seed = cfg.value("seed", 0ULL);
  return t;
}

KmeansOptions kmeans_from_config(const Json& cfg) {
  KmeansOptions k;
  k.max_iter = want<int>(cfg, "cluster", "max_iter");
  k.tol = want<double>(cfg, "cluster", "tol");
  k.restarts = want<int>(cfg, "cluster", "restarts");
  k.zscore = want<bool>(cfg, "cluster", "zscore");
  return k;
}

}  // namespace csmil
