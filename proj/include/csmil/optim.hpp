#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csmil/metrics.hpp"
#include "csmil/model.hpp"

namespace csmil {

// Gradients of the data term (cross-entropy sum only; the l1 penalty is
// handled by the proximal step, never differentiated).
struct GradientSet {
  std::vector<AttentionHead> heads;
  Vector beta;
  Matrix W;
  Vector b;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int epochs = 300;
  double lr_smooth = 1e-3;  // Adam (or plain SGD) on heads and classifier
  double lr_beta = 1e-2;    // proximal step on beta
  double gamma = 0.0;
  int batch_size = 0;  // 0 = full batch; otherwise seeded shuffle each epoch
  AdamConfig adam;
  bool use_adam = true;      // false: plain SGD on the smooth parameters
  bool freeze_beta = false;  // keep beta at its initial value
  double grad_clip = 5.0;    // global max-norm on the data gradient; <= 0 off
  int early_stop_patience = 0;  // 0 off; tracks validation AUC, restores best
  std::uint64_t seed = 0;
};

struct EpochStats {
  double total = 0;
  double data = 0;
  double penalty = 0;
  int beta_l0 = 0;
  // NaN when there is no validation set (or AUC is undefined on it).
  double val_acc = 0;
  double val_f1 = 0;
  double val_auc = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

struct TrainResult {
  CsmilModel model;
  TrainHistory history;
};

GradientSet zero_gradients(const CsmilModel& model);

// Exact gradients of sum_i CE_i. Caches must come from bag_forward on the
// same bags and model; shape mismatches are rejected.
GradientSet backward(const AssignedBags& bags, const CsmilModel& model,
                     const std::vector<ForwardCache>& caches);

double soft_threshold(double v, double t);
Vector soft_threshold(const Vector& v, double t);

// Adam on the smooth parameters; beta moves by
//   beta <- soft_threshold(beta - lr_beta * grad_beta, lr_beta * gamma)
// which produces exact zeros. Throws NumericError if the loss leaves the
// finite range. Deterministic given cfg.seed.
TrainResult train(const AssignedBags& train_bags, const AssignedBags& val_bags,
                  const TrainConfig& cfg, const CsmilModel& init);

// Central finite differences over every coordinate of the data term at step
// h. Returns the max relative error with denominator
// max(|analytic|, |numeric|, 1e-8). An override gradient can be injected to
// verify the check itself detects faults.
double finite_diff_check(const CsmilModel& model, const AssignedBags& bags, double h,
                         const GradientSet* analytic_override = nullptr);

// CSV: epoch,total,data,penalty,beta_l0,val_acc,val_f1,val_auc.
std::string history_csv(const TrainHistory& history);

// Positive-class probability per bag, in input order.
std::vector<double> bag_scores(const AssignedBags& bags, const CsmilModel& model);

}  // namespace csmil
