#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csmil/clustering.hpp"
#include "csmil/common.hpp"
#include "csmil/datamodel.hpp"

namespace csmil {

// Gated attention scorer for one cluster: instance n gets logit
// w' tanh(V h_n) and the cluster prototype is the attention-weighted sum of
// its instances.
struct AttentionHead {
  Matrix V;  // L x d
  Vector w;  // L
};

struct ModelConfig {
  int K = 0;
  int d = 0;
  int L = 64;
  bool shared_head = false;
};

struct CsmilModel {
  ModelConfig cfg;
  std::vector<AttentionHead> heads;  // one per cluster, or a single shared one
  Vector beta;                       // K cluster weights
  Matrix W;                          // 2 x d classifier
  Vector b;                          // 2

  int head_count() const { return static_cast<int>(heads.size()); }
  const AttentionHead& head(int k) const { return heads[cfg.shared_head ? 0 : static_cast<std::size_t>(k)]; }
};

// Everything bag_forward computed, kept for the backward pass. Empty
// clusters get an empty alpha vector, an empty activation block and a zero
// prototype row.
struct ForwardCache {
  std::vector<std::vector<int>> parts;  // instance indices per cluster
  std::vector<Vector> alpha;            // per cluster, length = cluster size
  std::vector<Matrix> tanh_act;         // per cluster, L x cluster size
  Matrix prototypes;                    // K x d
  Vector bag_vector;                    // d
  Vector logits;                        // 2
  Vector probs;                         // 2
};

struct LossBreakdown {
  double total = 0;
  double data = 0;
  double penalty = 0;
};

struct AssignedBag {
  const Bag* bag = nullptr;
  ClusterAssignment assignment;
};
using AssignedBags = std::vector<AssignedBag>;

// Numerically safe softmax: subtracts the max logit first. Adding any
// constant to all logits leaves the output unchanged.
Vector stable_softmax(const Vector& logits);

// beta starts at all ones; weights are uniform in +-1/sqrt(fan_in), biases
// included, drawn in a fixed order from the seed.
CsmilModel init_model(const ModelConfig& cfg, std::uint64_t seed);

// alpha and prototype for one cluster's instances (rows of `instances`).
void attention_pool(const Matrix& instances, const AttentionHead& head, Vector* alpha_out,
                    Vector* prototype_out, Matrix* tanh_out = nullptr);

// z = sum_k beta_k z_k in ascending cluster order.
Vector aggregate_bag(const Matrix& prototypes, const Vector& beta);

void classify(const Vector& bag_vector, const CsmilModel& model, Vector* logits_out,
              Vector* probs_out);

ForwardCache bag_forward(const Bag& bag, const ClusterAssignment& assignment,
                         const CsmilModel& model);

// total = sum_i cross_entropy(probs_i, label_i) + gamma * ||beta||_1, with
// the data term and penalty also returned separately.
LossBreakdown batch_loss(const AssignedBags& bags, const CsmilModel& model, double gamma);

int beta_l0(const Vector& beta, double tol = 1e-8);

void save_model(const CsmilModel& model, std::uint64_t seed, const std::string& path);
CsmilModel load_model(const std::string& path, std::uint64_t* seed_out = nullptr);

}  // namespace csmil
