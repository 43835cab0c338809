#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csmil/clustering.hpp"
#include "csmil/datamodel.hpp"
#include "csmil/metrics.hpp"
#include "csmil/optim.hpp"

namespace csmil {

// Regularization grid and cluster-count grid used by the sweep commands when
// the config does not override them.
inline constexpr std::array<double, 15> kDefaultGammaGrid = {
    0.0001, 0.0005, 0.001, 0.002, 0.003, 0.004, 0.005, 0.006,
    0.007,  0.008,  0.009, 0.01,  0.02,  0.05,  0.1};
inline constexpr std::array<int, 4> kDefaultKGrid = {2, 3, 5, 10};

struct FoldResult {
  MetricReport metrics;
  Vector final_beta;
};

struct CvReport {
  std::vector<FoldResult> folds;
  // Mean of the fold metrics; confusion counts are summed, the ROC is left
  // empty.
  MetricReport mean;
};

struct CvOptions {
  int L = 64;
  bool shared_head = false;
  KmeansOptions kmeans;
  int jobs = 1;
  // Called once per fold with the bag ids whose instances were clustered;
  // lets tests assert that held-out instances never reach kmeans_global.
  std::function<void(int fold, const std::vector<std::string>& train_bag_ids)> clustering_hook;
};

// Per fold: fit clustering on the training instances only, assign both
// splits against the frozen centers, train, and score the held-out fold.
// Bags are processed in ascending-id order throughout, so the result does
// not depend on how the dataset happens to be ordered.
CvReport cross_validate(const Dataset& ds, const FoldAssignment& folds, const TrainConfig& cfg,
                        int K, std::uint64_t seed, const CvOptions& opts = {});

struct AblationReport {
  CvReport baseline;
  std::vector<CvReport> variants;  // entry c: cluster c removed
  std::vector<double> delta_acc;   // variant mean accuracy minus baseline
  std::vector<int> excluded_bags;  // bags emptied by the drop, counted over test splits
};

// Leave-one-cluster-out. The baseline is cross_validate with gamma = 0 and
// beta frozen at ones (the sparse flag keeps cfg as given instead); variant
// c drops every instance assigned to cluster c from every bag, reusing the
// fold's clustering. Bags emptied by the drop are left out of training and
// scoring; each bag sits in exactly one test split, so the count is over
// bags.
AblationReport ablate_clusters(const Dataset& ds, const FoldAssignment& folds,
                               const TrainConfig& cfg, int K, std::uint64_t seed,
                               const CvOptions& opts = {}, bool sparse_variant = false);

struct SweepReport {
  std::string param;  // "gamma" or "K"
  std::vector<double> values;
  std::vector<CvReport> reports;
};

SweepReport sweep_gamma(const Dataset& ds, const FoldAssignment& folds, const TrainConfig& cfg,
                        int K, const std::vector<double>& gamma_grid, std::uint64_t seed,
                        const CvOptions& opts = {});

// Fresh clustering per fold at each K.
SweepReport sweep_k(const Dataset& ds, const FoldAssignment& folds, const TrainConfig& cfg,
                    const std::vector<int>& k_grid, double gamma, std::uint64_t seed,
                    const CvOptions& opts = {});

struct SelectionReport {
  std::vector<int> selected;             // clusters with beta exactly nonzero
  std::vector<int> majority_component;   // per cluster; -1 when no instances
  std::vector<double> informative_fraction;  // per cluster
  double precision = 0;
  double recall = 0;
};

// Maps each cluster to its majority latent component (ties to the lowest
// component id) using the generator's ground truth, then scores the clusters
// selected by nonzero beta against the informative components.
SelectionReport identify_selected_clusters(const Vector& beta, const Dataset& ds,
                                           const std::vector<ClusterAssignment>& assigns,
                                           const GroundTruth& truth);

// CSV: param,fold,acc,f1,auc,beta_l0 (one row per fold per grid value).
std::string sweep_csv(const SweepReport& report);

// CSV: removed_cluster,acc,f1,auc,delta_acc,excluded_bags.
std::string ablation_csv(const AblationReport& report);

}  // namespace csmil
