#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csmil/common.hpp"
#include "csmil/datamodel.hpp"

namespace csmil {

struct ClusterModel {
  int K = 0;
  int dim = 0;
  Matrix centers;  // K x dim
  double inertia = 0.0;
  int iterations_run = 0;
  // Set only when the model was fit with the z-score option: per-feature
  // mean and standard deviation of the fitting data. Centers then live in
  // standardized space and assign_local standardizes instances before
  // measuring distance.
  Vector feature_mean;
  Vector feature_scale;
};

// Per-bag assignment: nearest center per instance (exact ties go to the
// lowest center index) and the per-cluster instance counts.
struct ClusterAssignment {
  std::vector<int> cluster_of_instance;
  std::vector<int> counts;
};

struct KmeansOptions {
  int max_iter = 300;
  double tol = 1e-6;
  int restarts = 10;
  // Cluster on z-scored features instead of raw ones (off by default). The
  // standardization is learned from the fitting data and stored in the
  // model.
  bool zscore = false;
  // When set, records the per-iteration inertia of each restart in sequence
  // (used by descent tests).
  std::vector<double>* inertia_trace = nullptr;
};

// Lloyd's algorithm with k-means++ seeding, keeping the best of
// opts.restarts restarts by inertia. Empty clusters are repaired by moving
// the center to the point farthest from it. Returned centers are sorted
// lexicographically by coordinates so identical inputs give identical output
// regardless of seeding order. Degenerate inputs (fewer distinct points than
// K) exit via max_iter and may leave duplicate centers.
ClusterModel kmeans_global(const Matrix& points, int K, std::uint64_t seed,
                           const KmeansOptions& opts = {});

ClusterAssignment assign_local(const Bag& bag, const ClusterModel& model);

// Splits instance indices by assigned cluster. Every cluster gets a list
// (possibly empty); within-bag order is preserved.
std::vector<std::vector<int>> partition_bag(const Bag& bag, const ClusterAssignment& assignment);

void save_cluster_model(const ClusterModel& model, const std::string& path);
ClusterModel load_cluster_model(const std::string& path);

// CSV rows bag_id,instance_index,cluster_id in dataset order.
std::string assignments_csv(const Dataset& ds, const std::vector<ClusterAssignment>& assigns);

}  // namespace csmil
