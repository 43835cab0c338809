#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csmil/config.hpp"
#include "csmil/evalx.hpp"
#include "csmil/jsonx.hpp"
#include "csmil/recovery.hpp"
#include "csmil/rng.hpp"
#include "csmil/svg.hpp"

namespace {

using namespace csmil;
namespace fs = std::filesystem;

struct Cli {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  std::vector<std::string> sets;
  std::string manifest, val_manifest, centers_path, checkpoint_path;
};

Json build_config(const Cli& cli) {
  Json cfg = default_config();
  if (!cli.config_path.empty()) merge_config(cfg, parse_json_file(cli.config_path));
  for (const auto& s : cli.sets) apply_set(cfg, s);
  if (cli.seed_given) cfg["seed"] = cli.seed;
  validate_config(cfg);
  return cfg;
}

std::string out_path(const Cli& cli, const std::string& name) {
  fs::create_directories(cli.out_dir);
  return (fs::path(cli.out_dir) / name).string();
}

ClusterModel fit_or_load_clusters(const Cli& cli, const Json& cfg, const Dataset& ds) {
  if (!cli.centers_path.empty()) {
    ClusterModel cm = load_cluster_model(cli.centers_path);
    if (cm.dim != ds.dim) throw ConfigError("cluster model dim does not match dataset");
    return cm;
  }
  Matrix points;
  long rows = 0;
  for (const auto& bag : ds.bags) rows += bag.n();
  points.resize(rows, ds.dim);
  long r = 0;
  for (const auto& bag : ds.bags) {
    points.middleRows(r, bag.n()) = bag.embeddings;
    r += bag.n();
  }
  int K = cfg.at("cluster").at("K").get<int>();
  return kmeans_global(points, K, derive_seed(cfg.at("seed").get<std::uint64_t>(), "kmeans"),
                       kmeans_from_config(cfg));
}

AssignedBags assign_all(const Dataset& ds, const ClusterModel& cm) {
  AssignedBags out;
  for (const auto& bag : ds.bags) out.push_back({&bag, assign_local(bag, cm)});
  return out;
}

Json metrics_json(const MetricReport& rep, std::size_t n_bags) {
  Json j;
  j["accuracy"] = rep.accuracy;
  j["f1"] = rep.f1;
  if (rep.auc)
    j["auc"] = *rep.auc;
  else
    j["auc"] = nullptr;
  j["tp"] = rep.tp;
  j["fp"] = rep.fp;
  j["tn"] = rep.tn;
  j["fn"] = rep.fn;
  j["n_bags"] = n_bags;
  return j;
}

int cmd_synth(const Cli& cli, const Json& cfg) {
  SynthConfig sc = synth_from_config(cfg);
  SynthResult res = generate_synthetic(sc);
  save_dataset(res.dataset, cli.out_dir);
  save_ground_truth(res.truth, out_path(cli, "ground_truth.json"));
  log_info("wrote " + std::to_string(res.dataset.bags.size()) + " bags to " + cli.out_dir);
  return 0;
}

int cmd_cluster(const Cli& cli, const Json& cfg) {
  Dataset ds = load_dataset(cli.manifest);
  ClusterModel cm = fit_or_load_clusters(cli, cfg, ds);
  save_cluster_model(cm, out_path(cli, "centers.json"));
  std::vector<ClusterAssignment> assigns;
  for (const auto& bag : ds.bags) assigns.push_back(assign_local(bag, cm));
  write_text_file(out_path(cli, "assignments.csv"), assignments_csv(ds, assigns));
  log_info("inertia " + fmt17(cm.inertia) + " after " + std::to_string(cm.iterations_run) +
           " iterations");
  return 0;
}

int cmd_train(const Cli& cli, const Json& cfg) {
  Dataset ds = load_dataset(cli.manifest);
  std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  ClusterModel cm = fit_or_load_clusters(cli, cfg, ds);
  AssignedBags train_bags = assign_all(ds, cm);

  Dataset val_ds;
  AssignedBags val_bags;
  if (!cli.val_manifest.empty()) {
    val_ds = load_dataset(cli.val_manifest);
    val_bags = assign_all(val_ds, cm);
  }

  ModelConfig mc{cm.K, ds.dim, cfg.at("train").at("L").get<int>(),
                 cfg.at("train").at("shared_head").get<bool>()};
  CsmilModel init = init_model(mc, derive_seed(seed, "init"));
  TrainConfig tc = train_from_config(cfg);
  tc.seed = derive_seed(seed, "train");
  TrainResult tr = train(train_bags, val_bags, tc, init);

  save_model(tr.model, seed, out_path(cli, "checkpoint.json"));
  save_cluster_model(cm, out_path(cli, "centers.json"));
  write_text_file(out_path(cli, "history.csv"), history_csv(tr.history));
  log_info("final loss " + fmt17(tr.history.epochs.back().total) + ", beta_l0 " +
           std::to_string(tr.history.epochs.back().beta_l0));
  return 0;
}

int cmd_eval(const Cli& cli, const Json& cfg) {
  Dataset ds = load_dataset(cli.manifest);
  CsmilModel model = load_model(cli.checkpoint_path);
  ClusterModel cm = load_cluster_model(cli.centers_path);
  if (cm.K != model.cfg.K) throw ConfigError("cluster model K does not match checkpoint");
  AssignedBags bags = assign_all(ds, cm);
  std::vector<int> labels;
  for (const auto& bag : ds.bags) labels.push_back(bag.label);
  MetricReport rep = compute_metrics(bag_scores(bags, model), labels);
  write_text_file(out_path(cli, "metrics.json"), dump_fixed(metrics_json(rep, ds.bags.size())));
  write_text_file(out_path(cli, "roc.csv"), roc_csv(rep));
  if (cfg.at("report").at("svg").get<bool>() && !rep.roc.empty()) {
    std::vector<double> fpr;
    SvgSeries tpr{"roc", {}};
    for (const auto& p : rep.roc) {
      fpr.push_back(p.fpr);
      tpr.y.push_back(p.tpr);
    }
    write_text_file(out_path(cli, "roc.svg"),
                    svg_line_chart("receiver operating characteristic", "fpr", "tpr", fpr, {tpr}));
  }
  log_info("accuracy " + fmt17(rep.accuracy));
  return 0;
}

CvOptions cv_options(const Cli& cli, const Json& cfg) {
  CvOptions opts;
  opts.L = cfg.at("train").at("L").get<int>();
  opts.shared_head = cfg.at("train").at("shared_head").get<bool>();
  opts.kmeans = kmeans_from_config(cfg);
  opts.jobs = cli.jobs;
  return opts;
}

int cmd_ablate(const Cli& cli, const Json& cfg) {
  Dataset ds = load_dataset(cli.manifest);
  std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  FoldAssignment folds = split_folds(ds, cfg.at("folds").at("n").get<int>(), seed);
  int K = cfg.at("cluster").at("K").get<int>();
  AblationReport rep =
      ablate_clusters(ds, folds, train_from_config(cfg), K, seed, cv_options(cli, cfg));
  write_text_file(out_path(cli, "ablation.csv"), ablation_csv(rep));
  Json j;
  j["baseline"] = metrics_json(rep.baseline.mean, ds.bags.size());
  Json deltas = Json::array();
  for (double d : rep.delta_acc) deltas.push_back(d);
  j["delta_acc"] = deltas;
  Json excluded = Json::array();
  for (int e : rep.excluded_bags) excluded.push_back(e);
  j["excluded_bags"] = excluded;
  write_text_file(out_path(cli, "ablation.json"), dump_fixed(j));
  if (cfg.at("report").at("svg").get<bool>()) {
    std::vector<std::string> labels;
    for (int c = 0; c < K; ++c) labels.push_back(std::to_string(c));
    write_text_file(out_path(cli, "ablation.svg"),
                    svg_bar_chart("accuracy change per removed cluster", labels, rep.delta_acc));
  }
  return 0;
}

int sweep_common(const Cli& cli, const Json& cfg, const SweepReport& rep) {
  write_text_file(out_path(cli, "sweep.csv"), sweep_csv(rep));
  if (cfg.at("report").at("svg").get<bool>()) {
    SvgSeries acc{"mean acc", {}}, auc{"mean auc", {}};
    for (const auto& cv : rep.reports) {
      acc.y.push_back(cv.mean.accuracy);
      auc.y.push_back(cv.mean.auc.value_or(0.0));
    }
    bool log_x = rep.param == "gamma";
    write_text_file(out_path(cli, "sweep.svg"),
                    svg_line_chart("cross-validated metrics vs " + rep.param, rep.param, "metric",
                                   rep.values, {acc, auc}, log_x));
  }
  return 0;
}

int cmd_sweep_gamma(const Cli& cli, const Json& cfg) {
  Dataset ds = load_dataset(cli.manifest);
  std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  FoldAssignment folds = split_folds(ds, cfg.at("folds").at("n").get<int>(), seed);
  int K = cfg.at("cluster").at("K").get<int>();
  auto grid = cfg.at("sweep").at("gammas").get<std::vector<double>>();
  SweepReport rep =
      sweep_gamma(ds, folds, train_from_config(cfg), K, grid, seed, cv_options(cli, cfg));
  return sweep_common(cli, cfg, rep);
}

int cmd_sweep_k(const Cli& cli, const Json& cfg) {
  Dataset ds = load_dataset(cli.manifest);
  std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  FoldAssignment folds = split_folds(ds, cfg.at("folds").at("n").get<int>(), seed);
  auto grid = cfg.at("sweep").at("ks").get<std::vector<int>>();
  double gamma = cfg.at("sweep").at("gamma_for_k").get<double>();
  SweepReport rep =
      sweep_k(ds, folds, train_from_config(cfg), grid, gamma, seed, cv_options(cli, cfg));
  return sweep_common(cli, cfg, rep);
}

int cmd_recover(const Cli& cli, const Json& cfg) {
  const auto& rc = cfg.at("recover");
  std::uint64_t seed = derive_seed(cfg.at("seed").get<std::uint64_t>(), "recover");
  PhaseOptions opts;
  opts.beta_min = rc.at("beta_min").get<double>();
  opts.jobs = cli.jobs;
  int K = rc.at("K").get<int>();
  int s = rc.at("s").get<int>();
  double sigma = rc.at("sigma").get<double>();
  PhaseTable table = phase_transition(K, s, rc.at("m_grid").get<std::vector<int>>(),
                                      rc.at("trials").get<int>(), sigma, seed, opts);
  write_text_file(out_path(cli, "phase.csv"), phase_csv(table));

  int diag_m = table.rows.back().M;
  RecoveryProblem probe = gen_linear_problem(K, s, diag_m, sigma, opts.beta_min,
                                             derive_seed(seed, "diagnostics"));
  write_text_file(out_path(cli, "diagnostics.json"),
                  diagnostics_json(probe.Z, rc.at("diag_s").get<std::vector<int>>()));

  if (cfg.at("report").at("svg").get<bool>()) {
    std::vector<double> m;
    SvgSeries rate{"success rate", {}};
    for (const auto& row : table.rows) {
      m.push_back(static_cast<double>(row.M));
      rate.y.push_back(row.success_rate);
    }
    write_text_file(out_path(cli, "phase.svg"),
                    svg_line_chart("support recovery vs sample count", "M", "success rate", m,
                                   {rate}));
  }
  return 0;
}

// Random small models over rotating K in {1,2,3}, each with a bag whose
// assignment skips one cluster so empty-cluster gradients are exercised.
double gradcheck_worst(int n_seeds, double h, std::uint64_t root) {
  double worst = 0;
  for (int s = 0; s < n_seeds; ++s) {
    std::uint64_t seed = derive_seed(root, "gradcheck", static_cast<std::uint64_t>(s));
    Rng rng(seed);
    int K = 1 + s % 3;
    int d = 3, L = 2;
    ModelConfig mc{K, d, L, false};
    CsmilModel model = init_model(mc, seed);

    const int n_bags = 2;
    std::vector<Bag> bags(n_bags);
    std::vector<ClusterAssignment> assigns(n_bags);
    for (int b = 0; b < n_bags; ++b) {
      Bag& bag = bags[static_cast<std::size_t>(b)];
      bag.id = "probe_" + std::to_string(b);
      bag.label = b % 2;
      int n = 3 + static_cast<int>(rng.below(3));
      bag.embeddings.resize(n, d);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) bag.embeddings(i, j) = rng.normal();
      ClusterAssignment& a = assigns[static_cast<std::size_t>(b)];
      a.counts.assign(static_cast<std::size_t>(K), 0);
      // Bag 0 avoids the last cluster entirely when K > 1, so empty-cluster
      // gradient paths stay covered.
      int span = (b == 0 && K > 1) ? K - 1 : K;
      for (int i = 0; i < n; ++i) {
        int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
        a.cluster_of_instance.push_back(k);
        ++a.counts[static_cast<std::size_t>(k)];
      }
    }
    AssignedBags assigned;
    for (int b = 0; b < n_bags; ++b)
      assigned.push_back({&bags[static_cast<std::size_t>(b)], assigns[static_cast<std::size_t>(b)]});
    worst = std::max(worst, finite_diff_check(model, assigned, h));
  }
  return worst;
}

int cmd_gradcheck(const Cli& cli, const Json& cfg) {
  (void)cli;
  int seeds = cfg.at("gradcheck").at("seeds").get<int>();
  double h = cfg.at("gradcheck").at("h").get<double>();
  double worst = gradcheck_worst(seeds, h, cfg.at("seed").get<std::uint64_t>());
  std::printf("max_rel_error=%s\n", fmt17(worst).c_str());
  if (!(worst < 1e-4)) throw NumericError("gradient check failed: max_rel_error " + fmt17(worst));
  return 0;
}

int run(int argc, char** argv) {
  Cli cli;
  CLI::App app{"cluster-sparse multi-instance learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough(true);
  app.add_option("--config", cli.config_path, "JSON config file");
  auto* seed_opt = app.add_option("--seed", cli.seed, "root seed (overrides config)");
  app.add_option("--jobs", cli.jobs, "worker parallelism for folds/trials")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", cli.out_dir, "output directory");
  app.add_option("--set", cli.sets, "config override key.path=value (repeatable)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
  auto* cluster = app.add_subcommand("cluster", "fit global clustering and assign instances");
  cluster->add_option("--manifest", cli.manifest, "dataset manifest")->required();
  cluster->add_option("--centers", cli.centers_path, "reuse an existing cluster model");
  auto* train_cmd = app.add_subcommand("train", "train a bag classifier");
  train_cmd->add_option("--manifest", cli.manifest, "training dataset manifest")->required();
  train_cmd->add_option("--val", cli.val_manifest, "validation dataset manifest");
  train_cmd->add_option("--centers", cli.centers_path, "cluster model (fit fresh when absent)");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--manifest", cli.manifest, "dataset manifest")->required();
  eval_cmd->add_option("--checkpoint", cli.checkpoint_path, "model checkpoint")->required();
  eval_cmd->add_option("--centers", cli.centers_path, "cluster model")->required();
  auto* ablate = app.add_subcommand("ablate", "leave-one-cluster-out analysis");
  ablate->add_option("--manifest", cli.manifest, "dataset manifest")->required();
  auto* sweep_g = app.add_subcommand("sweep-gamma", "cross-validate across the gamma grid");
  sweep_g->add_option("--manifest", cli.manifest, "dataset manifest")->required();
  auto* sweep_k_cmd = app.add_subcommand("sweep-k", "cross-validate across cluster counts");
  sweep_k_cmd->add_option("--manifest", cli.manifest, "dataset manifest")->required();
  auto* recover = app.add_subcommand("recover", "sparse recovery phase experiment");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  cli.seed_given = seed_opt->count() > 0;

  Json cfg = build_config(cli);
  if (synth->parsed()) return cmd_synth(cli, cfg);
  if (cluster->parsed()) return cmd_cluster(cli, cfg);
  if (train_cmd->parsed()) return cmd_train(cli, cfg);
  if (eval_cmd->parsed()) return cmd_eval(cli, cfg);
  if (ablate->parsed()) return cmd_ablate(cli, cfg);
  if (sweep_g->parsed()) return cmd_sweep_gamma(cli, cfg);
  if (sweep_k_cmd->parsed()) return cmd_sweep_k(cli, cfg);
  if (recover->parsed()) return cmd_recover(cli, cfg);
  if (gradcheck->parsed()) return cmd_gradcheck(cli, cfg);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const csmil::ConfigError& e) {
    csmil::log_error(e.what());
    return 2;
  } catch (const std::exception& e) {
    csmil::log_error(e.what());
    return 3;
  }
}
