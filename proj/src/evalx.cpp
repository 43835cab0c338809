#include "csmil/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "csmil/rng.hpp"

namespace csmil {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Bag indices sorted by id so every downstream reduction runs in one
// canonical order no matter how the manifest was arranged.
std::vector<int> sorted_bag_indices(const Dataset& ds) {
  std::vector<int> idx(ds.bags.size());
  for (std::size_t i = 0; i < ds.bags.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return ds.bags[static_cast<std::size_t>(a)].id < ds.bags[static_cast<std::size_t>(b)].id;
  });
  return idx;
}

Matrix pool_instances(const Dataset& ds, const std::vector<int>& bag_idx) {
  long rows = 0;
  for (int i : bag_idx) rows += ds.bags[static_cast<std::size_t>(i)].n();
  Matrix out(rows, ds.dim);
  long r = 0;
  for (int i : bag_idx) {
    const auto& emb = ds.bags[static_cast<std::size_t>(i)].embeddings;
    out.middleRows(r, emb.rows()) = emb;
    r += emb.rows();
  }
  return out;
}

MetricReport mean_of_folds(const std::vector<FoldResult>& folds) {
  MetricReport mean;
  double acc = 0, f1 = 0, auc = 0;
  bool have_auc = true;
  for (const auto& f : folds) {
    acc += f.metrics.accuracy;
    f1 += f.metrics.f1;
    if (f.metrics.auc)
      auc += *f.metrics.auc;
    else
      have_auc = false;
    mean.tp += f.metrics.tp;
    mean.fp += f.metrics.fp;
    mean.tn += f.metrics.tn;
    mean.fn += f.metrics.fn;
  }
  double n = static_cast<double>(folds.size());
  mean.accuracy = acc / n;
  mean.f1 = f1 / n;
  if (have_auc) mean.auc = auc / n;
  return mean;
}

int fold_of(const FoldAssignment& folds, const std::string& id) {
  auto it = folds.fold_of_bag.find(id);
  if (it == folds.fold_of_bag.end()) throw ConfigError("bag " + id + " missing from fold assignment");
  return it->second;
}

struct FoldData {
  ClusterModel clusters;
  AssignedBags train;
  AssignedBags test;
};

FoldData prepare_fold(const Dataset& ds, const FoldAssignment& folds, int fold, int K,
                      std::uint64_t seed, const CvOptions& opts) {
  std::vector<int> order = sorted_bag_indices(ds);
  std::vector<int> train_idx, test_idx;
  for (int i : order)
    (fold_of(folds, ds.bags[static_cast<std::size_t>(i)].id) == fold ? test_idx : train_idx)
        .push_back(i);
  if (train_idx.empty() || test_idx.empty())
    throw ConfigError("fold " + std::to_string(fold) + " leaves an empty split");

  FoldData fd;
  fd.clusters = kmeans_global(pool_instances(ds, train_idx), K,
                              derive_seed(seed, "kmeans", static_cast<std::uint64_t>(fold)),
                              opts.kmeans);
  if (opts.clustering_hook) {
    std::vector<std::string> ids;
    for (int i : train_idx) ids.push_back(ds.bags[static_cast<std::size_t>(i)].id);
    opts.clustering_hook(fold, ids);
  }
  for (int i : train_idx) {
    const Bag& bag = ds.bags[static_cast<std::size_t>(i)];
    fd.train.push_back({&bag, assign_local(bag, fd.clusters)});
  }
  for (int i : test_idx) {
    const Bag& bag = ds.bags[static_cast<std::size_t>(i)];
    fd.test.push_back({&bag, assign_local(bag, fd.clusters)});
  }
  return fd;
}

FoldResult run_fold(const Dataset& ds, const FoldAssignment& folds, const TrainConfig& cfg,
                    int K, std::uint64_t seed, const CvOptions& opts, int fold) {
  FoldData fd = prepare_fold(ds, folds, fold, K, seed, opts);
  ModelConfig mc{K, ds.dim, opts.L, opts.shared_head};
  CsmilModel init = init_model(mc, derive_seed(seed, "init", static_cast<std::uint64_t>(fold)));
  TrainConfig fold_cfg = cfg;
  fold_cfg.seed = derive_seed(seed, "train", static_cast<std::uint64_t>(fold));
  TrainResult tr = train(fd.train, fd.test, fold_cfg, init);

  std::vector<int> labels;
  for (const auto& ab : fd.test) labels.push_back(ab.bag->label);
  FoldResult out;
  out.metrics = compute_metrics(bag_scores(fd.test, tr.model), labels);
  out.final_beta = tr.model.beta;
  return out;
}

}  // namespace

CvReport cross_validate(const Dataset& ds, const FoldAssignment& folds, const TrainConfig& cfg,
                        int K, std::uint64_t seed, const CvOptions& opts) {
  if (folds.n_folds < 2) throw ConfigError("cross_validate needs at least 2 folds");
  CvReport report;
  report.folds.resize(static_cast<std::size_t>(folds.n_folds));
  parallel_for(folds.n_folds, opts.jobs, [&](int f) {
    report.folds[static_cast<std::size_t>(f)] = run_fold(ds, folds, cfg, K, seed, opts, f);
  });
  report.mean = mean_of_folds(report.folds);
  return report;
}

AblationReport ablate_clusters(const Dataset& ds, const FoldAssignment& folds,
                               const TrainConfig& cfg, int K, std::uint64_t seed,
                               const CvOptions& opts, bool sparse_variant) {
  TrainConfig base_cfg = cfg;
  if (!sparse_variant) {
    base_cfg.gamma = 0.0;
    base_cfg.freeze_beta = true;
  }
  AblationReport report;
  report.baseline = cross_validate(ds, folds, base_cfg, K, seed, opts);

  std::vector<std::vector<FoldResult>> fold_results(
      static_cast<std::size_t>(K), std::vector<FoldResult>(static_cast<std::size_t>(folds.n_folds)));
  std::vector<std::vector<int>> excluded(static_cast<std::size_t>(K),
                                         std::vector<int>(static_cast<std::size_t>(folds.n_folds), 0));

  parallel_for(folds.n_folds, opts.jobs, [&](int f) {
    // Identical derivation as cross_validate, so the clustering the variants
    // share is bit-for-bit the baseline's.
    FoldData fd = prepare_fold(ds, folds, f, K, seed, opts);
    for (int c = 0; c < K; ++c) {
      // Filter out cluster c. Bags that lose every instance drop out.
      std::vector<Bag> bags_store;
      auto filter = [&](const AssignedBags& src, AssignedBags& dst, bool count_excluded) {
        for (const auto& ab : src) {
          std::vector<int> keep;
          for (int i = 0; i < ab.bag->n(); ++i)
            if (ab.assignment.cluster_of_instance[static_cast<std::size_t>(i)] != c)
              keep.push_back(i);
          if (keep.empty()) {
            if (count_excluded) ++excluded[static_cast<std::size_t>(c)][static_cast<std::size_t>(f)];
            continue;
          }
          Bag filtered;
          filtered.id = ab.bag->id;
          filtered.label = ab.bag->label;
          filtered.embeddings.resize(static_cast<int>(keep.size()), ab.bag->dim());
          ClusterAssignment fa;
          fa.counts.assign(static_cast<std::size_t>(K), 0);
          for (std::size_t r = 0; r < keep.size(); ++r) {
            filtered.embeddings.row(static_cast<int>(r)) = ab.bag->embeddings.row(keep[r]);
            int cl = ab.assignment.cluster_of_instance[static_cast<std::size_t>(keep[r])];
            fa.cluster_of_instance.push_back(cl);
            ++fa.counts[static_cast<std::size_t>(cl)];
          }
          bags_store.push_back(std::move(filtered));
          dst.push_back({nullptr, std::move(fa)});
        }
      };
      AssignedBags train_f, test_f;
      std::size_t n_train_kept;
      {
        AssignedBags tmp_train, tmp_test;
        filter(fd.train, tmp_train, false);
        n_train_kept = tmp_train.size();
        filter(fd.test, tmp_test, true);
        // bags_store now owns every filtered bag; fix up the pointers.
        for (std::size_t i = 0; i < tmp_train.size(); ++i) tmp_train[i].bag = &bags_store[i];
        for (std::size_t i = 0; i < tmp_test.size(); ++i)
          tmp_test[i].bag = &bags_store[n_train_kept + i];
        train_f = std::move(tmp_train);
        test_f = std::move(tmp_test);
      }
      if (train_f.empty() || test_f.empty())
        throw ConfigError("removing cluster " + std::to_string(c) + " empties fold " +
                          std::to_string(f));

      ModelConfig mc{K, ds.dim, opts.L, opts.shared_head};
      CsmilModel init = init_model(mc, derive_seed(seed, "init", static_cast<std::uint64_t>(f)));
      TrainConfig fold_cfg = base_cfg;
      fold_cfg.seed = derive_seed(seed, "train", static_cast<std::uint64_t>(f));
      TrainResult tr = train(train_f, test_f, fold_cfg, init);
      std::vector<int> labels;
      for (const auto& ab : test_f) labels.push_back(ab.bag->label);
      FoldResult fr;
      fr.metrics = compute_metrics(bag_scores(test_f, tr.model), labels);
      fr.final_beta = tr.model.beta;
      fold_results[static_cast<std::size_t>(c)][static_cast<std::size_t>(f)] = std::move(fr);
    }
  });

  for (int c = 0; c < K; ++c) {
    CvReport var;
    var.folds = std::move(fold_results[static_cast<std::size_t>(c)]);
    var.mean = mean_of_folds(var.folds);
    report.delta_acc.push_back(var.mean.accuracy - report.baseline.mean.accuracy);
    int total_excluded = 0;
    for (int e : excluded[static_cast<std::size_t>(c)]) total_excluded += e;
    report.excluded_bags.push_back(total_excluded);
    report.variants.push_back(std::move(var));
  }
  return report;
}

SweepReport sweep_gamma(const Dataset& ds, const FoldAssignment& folds, const TrainConfig& cfg,
                        int K, const std::vector<double>& gamma_grid, std::uint64_t seed,
                        const CvOptions& opts) {
  if (gamma_grid.empty()) throw ConfigError("empty gamma grid");
  SweepReport report;
  report.param = "gamma";
  for (double gamma : gamma_grid) {
    TrainConfig c = cfg;
    c.gamma = gamma;
    report.values.push_back(gamma);
    report.reports.push_back(cross_validate(ds, folds, c, K, seed, opts));
  }
  return report;
}

SweepReport sweep_k(const Dataset& ds, const FoldAssignment& folds, const TrainConfig& cfg,
                    const std::vector<int>& k_grid, double gamma, std::uint64_t seed,
                    const CvOptions& opts) {
  if (k_grid.empty()) throw ConfigError("empty K grid");
  SweepReport report;
  report.param = "K";
  TrainConfig c = cfg;
  c.gamma = gamma;
  for (int K : k_grid) {
    report.values.push_back(static_cast<double>(K));
    report.reports.push_back(cross_validate(ds, folds, c, K, seed, opts));
  }
  return report;
}

SelectionReport identify_selected_clusters(const Vector& beta, const Dataset& ds,
                                           const std::vector<ClusterAssignment>& assigns,
                                           const GroundTruth& truth) {
  if (assigns.size() != ds.bags.size())
    throw ConfigError("identify: one assignment per bag required");
  const int K = static_cast<int>(beta.size());

  // Contingency of cluster vs latent component over all instances.
  std::vector<std::map<int, long>> counts(static_cast<std::size_t>(K));
  for (std::size_t b = 0; b < ds.bags.size(); ++b) {
    const Bag& bag = ds.bags[b];
    auto it = truth.component_of_instance.find(bag.id);
    if (it == truth.component_of_instance.end())
      throw ConfigError("ground truth missing bag " + bag.id);
    if (static_cast<int>(it->second.size()) != bag.n())
      throw ConfigError("ground truth length mismatch for bag " + bag.id);
    for (int i = 0; i < bag.n(); ++i) {
      int k = assigns[b].cluster_of_instance[static_cast<std::size_t>(i)];
      if (k < 0 || k >= K) throw ConfigError("assignment out of range for bag " + bag.id);
      ++counts[static_cast<std::size_t>(k)][it->second[static_cast<std::size_t>(i)]];
    }
  }

  std::vector<bool> informative(0);
  int max_comp = -1;
  for (int c : truth.informative_components) max_comp = std::max(max_comp, c);
  for (const auto& per_cluster : counts)
    for (const auto& [comp, cnt] : per_cluster) max_comp = std::max(max_comp, comp);
  informative.assign(static_cast<std::size_t>(max_comp + 1), false);
  for (int c : truth.informative_components) informative[static_cast<std::size_t>(c)] = true;

  SelectionReport rep;
  rep.majority_component.assign(static_cast<std::size_t>(K), -1);
  rep.informative_fraction.assign(static_cast<std::size_t>(K), 0.0);
  for (int k = 0; k < K; ++k) {
    long best = 0, total = 0, inf = 0;
    int best_comp = -1;
    for (const auto& [comp, cnt] : counts[static_cast<std::size_t>(k)]) {
      total += cnt;
      if (informative[static_cast<std::size_t>(comp)]) inf += cnt;
      if (cnt > best) {  // map iterates ascending, so ties keep the lowest id
        best = cnt;
        best_comp = comp;
      }
    }
    rep.majority_component[static_cast<std::size_t>(k)] = best_comp;
    if (total > 0)
      rep.informative_fraction[static_cast<std::size_t>(k)] =
          static_cast<double>(inf) / static_cast<double>(total);
    if (beta[k] != 0.0) rep.selected.push_back(k);
  }

  int hits = 0;
  for (int k : rep.selected) {
    int comp = rep.majority_component[static_cast<std::size_t>(k)];
    if (comp >= 0 && informative[static_cast<std::size_t>(comp)]) ++hits;
  }
  rep.precision = rep.selected.empty()
                      ? 0.0
                      : static_cast<double>(hits) / static_cast<double>(rep.selected.size());

  // A component counts as recovered when most of its instances sit in
  // selected clusters. Clusterings that merge two rare components into one
  // cluster still get credit when that cluster is selected.
  std::map<int, long> comp_total, comp_selected;
  std::vector<bool> is_selected(static_cast<std::size_t>(K), false);
  for (int k : rep.selected) is_selected[static_cast<std::size_t>(k)] = true;
  for (int k = 0; k < K; ++k)
    for (const auto& [comp, cnt] : counts[static_cast<std::size_t>(k)]) {
      comp_total[comp] += cnt;
      if (is_selected[static_cast<std::size_t>(k)]) comp_selected[comp] += cnt;
    }
  int n_inf = static_cast<int>(truth.informative_components.size());
  int n_cov = 0;
  for (int c : truth.informative_components) {
    long total = comp_total.count(c) ? comp_total[c] : 0;
    long sel = comp_selected.count(c) ? comp_selected[c] : 0;
    if (total > 0 && 2 * sel > total) ++n_cov;
  }
  rep.recall = n_inf > 0 ? static_cast<double>(n_cov) / static_cast<double>(n_inf) : 0.0;
  return rep;
}

std::string sweep_csv(const SweepReport& report) {
  std::string out = "param,fold,acc,f1,auc,beta_l0\n";
  for (std::size_t v = 0; v < report.values.size(); ++v) {
    const auto& cv = report.reports[v];
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
      const auto& fr = cv.folds[f];
      out += fmt17(report.values[v]);
      out += ',';
      out += std::to_string(f);
      out += ',';
      out += fmt17(fr.metrics.accuracy);
      out += ',';
      out += fmt17(fr.metrics.f1);
      out += ',';
      out += fmt17(fr.metrics.auc.value_or(kNan));
      out += ',';
      out += std::to_string(beta_l0(fr.final_beta));
      out += '\n';
    }
  }
  return out;
}

std::string ablation_csv(const AblationReport& report) {
  std::string out = "removed_cluster,acc,f1,auc,delta_acc,excluded_bags\n";
  for (std::size_t c = 0; c < report.variants.size(); ++c) {
    const auto& m = report.variants[c].mean;
    out += std::to_string(c);
    out += ',';
    out += fmt17(m.accuracy);
    out += ',';
    out += fmt17(m.f1);
    out += ',';
    out += fmt17(m.auc.value_or(kNan));
    out += ',';
    out += fmt17(report.delta_acc[c]);
    out += ',';
    out += std::to_string(report.excluded_bags[c]);
    out += '\n';
  }
  return out;
}

}  // namespace csmil
