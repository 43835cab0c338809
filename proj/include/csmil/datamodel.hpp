#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "csmil/common.hpp"

namespace csmil {

// One bag of instance embeddings, one row per instance. Embeddings are held
// in f64 for computation but stored on disk as f32.
struct Bag {
  std::string id;
  int label = 0;  // 0 or 1
  Matrix embeddings;

  int n() const { return static_cast<int>(embeddings.rows()); }
  int dim() const { return static_cast<int>(embeddings.cols()); }
};

struct Dataset {
  std::string name;
  int dim = 0;
  std::vector<Bag> bags;
};

// Which latent component produced each instance, plus which components carry
// label signal. Written next to synthetic datasets for evaluation only; the
// pipeline never reads it.
struct GroundTruth {
  std::vector<int> informative_components;
  std::map<std::string, std::vector<int>> component_of_instance;
};

struct SynthConfig {
  int k_latent = 8;
  int s_informative = 2;
  int d = 16;
  int bags_per_class = 100;
  int n_min = 10;
  int n_max = 30;
  double component_separation = 20.0;
  double noise_sigma = 1.0;
  double positive_fraction = 0.03;
  std::uint64_t seed = 0;
};

struct FoldAssignment {
  int n_folds = 0;
  std::map<std::string, int> fold_of_bag;
};

// Bag container file: 8 bytes ASCII "CSMILEMB", u32 LE n, u32 LE d, then
// n*d f32 LE in row-major order.
void save_bag(const Bag& bag, const std::string& path);
Bag load_bag(const std::string& path, const std::string& id, int label);

// Manifest JSON: {"name", "dim", "bags": [{"id", "label", "path"}]} with bag
// paths resolved relative to the manifest location.
Dataset load_dataset(const std::string& manifest_path);
void save_dataset(const Dataset& ds, const std::string& dir);

void save_ground_truth(const GroundTruth& gt, const std::string& path);
GroundTruth load_ground_truth(const std::string& path);

struct SynthResult {
  Dataset dataset;
  GroundTruth truth;
};

// Draws k_latent component centroids with pairwise distance at least
// component_separation, then fills bags with noisy instances. Positive bags
// get ceil(positive_fraction * n_i) instances from informative components,
// negative bags none. Requires k_latent <= d.
SynthResult generate_synthetic(const SynthConfig& cfg);

// Stratified k-fold split. Deterministic given seed; fold sizes differ by at
// most one, per-fold class counts differ by at most one from the stratified
// ideal. Requires at least n_folds bags of each class.
FoldAssignment split_folds(const Dataset& ds, int n_folds, std::uint64_t seed);

}  // namespace csmil
