#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csmil/common.hpp"

namespace csmil {

// Synthetic linear observation model y = Z beta_star + eps used to measure
// when l1 aggregation recovers the true cluster support. Columns of Z are
// iid Gaussian rescaled to norm exactly sqrt(M); the s support entries have
// magnitude uniform in [beta_min, 2 beta_min] with random signs.
struct RecoveryProblem {
  Matrix Z;          // M x K
  Vector beta_star;  // K
  Vector y;          // M
  double sigma = 0;
};

RecoveryProblem gen_linear_problem(int K, int s, int M, double sigma, double beta_min,
                                   std::uint64_t seed);

struct LassoOptions {
  int max_iter = 20000;
  double tol = 1e-10;        // relative objective change
  bool accelerated = false;  // momentum variant; plain version descends monotonically
  std::vector<double>* objective_trace = nullptr;
};

struct LassoSolution {
  Vector beta;
  int iterations = 0;
  double objective = 0;
  bool converged = false;
};

// Proximal gradient on (1/2M)||y - Z beta||^2 + gamma ||beta||_1 from the
// zero start. The step size is 1/L with L = lambda_max(Z'Z)/M obtained by
// power iteration (1e-10 relative tolerance). Thresholding writes exact
// zeros.
LassoSolution lasso_ista(const Matrix& Z, const Vector& y, double gamma,
                         const LassoOptions& opts = {});

// max_{k != l} |<Z_k, Z_l>| / (||Z_k|| ||Z_l||); equals |<Z_k, Z_l>|/M on
// designs with sqrt(M)-normalized columns.
double coherence(const Matrix& Z);

// min over all supports S of size s of lambda_min((1/M) Z_S' Z_S), by
// exhaustive enumeration. Refuses K > 20.
double re_constant(const Matrix& Z, int s);

// Sign-consistent support recovery, treating |beta_hat_k| < 1e-8 as zero.
// set_only compares supports while ignoring signs.
bool support_recovered(const Vector& beta_hat, const Vector& beta_star, bool set_only = false,
                       double zero_tol = 1e-8);

// KKT residual of the lasso objective at beta: max over coordinates of the
// distance from -grad_k to gamma * subgradient(|beta_k|).
double kkt_residual(const Matrix& Z, const Vector& y, double gamma, const Vector& beta);

struct PhaseRow {
  int M = 0;
  int s = 0;
  int K = 0;
  double sigma = 0;
  double gamma = 0;
  int trials = 0;
  double success_rate = 0;
  double mean_l2_error = 0;
};

struct PhaseTable {
  std::vector<PhaseRow> rows;
};

struct PhaseOptions {
  double beta_min = 1.0;
  // gamma defaults to the rule 2 sigma sqrt(log K / M) per grid point; the
  // override replaces it (noiseless runs use a tiny positive value).
  std::optional<double> gamma_override;
  int lasso_max_iter = 20000;
  double lasso_tol = 1e-10;
  int jobs = 1;
};

// Recovery rate over `trials` independent problems per M. Trial t uses seed
// seed + t so trials can run in any order or in parallel.
PhaseTable phase_transition(int K, int s, const std::vector<int>& m_grid, int trials,
                            double sigma, std::uint64_t seed, const PhaseOptions& opts = {});

// CSV: M,s,K,sigma,gamma,trials,success_rate,mean_l2_error.
std::string phase_csv(const PhaseTable& table);

// JSON {"mu": ..., "kappa_s": {"s": value, ...}}; kappa entries only for
// K <= 20 where enumeration is feasible.
std::string diagnostics_json(const Matrix& Z, const std::vector<int>& s_values);

}  // namespace csmil
