#include "csmil/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csmil/jsonx.hpp"
#include "csmil/optim.hpp"
#include "csmil/rng.hpp"

namespace csmil {

namespace {

double lasso_objective(const Matrix& Z, const Vector& y, double gamma, const Vector& beta) {
  double m = static_cast<double>(Z.rows());
  return (y - Z * beta).squaredNorm() / (2.0 * m) + gamma * beta.lpNorm<1>();
}

// Largest eigenvalue of the PSD matrix G by power iteration. The start must
// not be a fixed pattern: Gram matrices of sqrt(M)-normalized designs have a
// constant diagonal, and for K = 2 that makes the all-ones vector an exact
// eigenvector, possibly of the smaller eigenvalue. Convergence is judged by
// the eigen-residual, which stays large while the top component is still
// overtaking, unlike stagnation of the estimate itself.
double power_lambda_max(const Matrix& G) {
  const int n = static_cast<int>(G.rows());
  Rng rng(0x1fc7b5a3d2e90816ull);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  v /= v.norm();
  double lambda = 0;
  for (int it = 0; it < 100000; ++it) {
    Vector u = G * v;
    double norm = u.norm();
    if (norm == 0) return 0.0;
    lambda = v.dot(u);  // Rayleigh quotient, v is unit
    double resid = (u - lambda * v).norm();
    v = u / norm;
    if (resid <= 1e-10 * std::max(norm, 1e-300)) break;
  }
  return lambda;
}

}  // namespace

RecoveryProblem gen_linear_problem(int K, int s, int M, double sigma, double beta_min,
                                   std::uint64_t seed) {
  if (K < 1 || M < 1) throw ConfigError("need K >= 1 and M >= 1");
  if (s < 1 || s > K) throw ConfigError("need 1 <= s <= K");
  if (sigma < 0 || beta_min <= 0) throw ConfigError("need sigma >= 0 and beta_min > 0");
  Rng rng(seed);
  RecoveryProblem prob;
  prob.sigma = sigma;
  prob.Z.resize(M, K);
  for (int i = 0; i < M; ++i)
    for (int k = 0; k < K; ++k) prob.Z(i, k) = rng.normal();
  double target = std::sqrt(static_cast<double>(M));
  for (int k = 0; k < K; ++k) {
    double norm = prob.Z.col(k).norm();
    if (norm == 0) throw NumericError("degenerate zero column in design");
    prob.Z.col(k) *= target / norm;
  }
  // Support: first s entries of a partial Fisher-Yates pass.
  std::vector<int> perm(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) perm[static_cast<std::size_t>(k)] = k;
  for (int i = 0; i < s; ++i) {
    int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(K - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  prob.beta_star = Vector::Zero(K);
  for (int i = 0; i < s; ++i) {
    double mag = rng.uniform(beta_min, 2.0 * beta_min);
    double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    prob.beta_star[perm[static_cast<std::size_t>(i)]] = sign * mag;
  }
  prob.y = prob.Z * prob.beta_star;
  if (sigma > 0)
    for (int i = 0; i < M; ++i) prob.y[i] += sigma * rng.normal();
  return prob;
}

LassoSolution lasso_ista(const Matrix& Z, const Vector& y, double gamma,
                         const LassoOptions& opts) {
  if (Z.rows() != y.size()) throw ConfigError("lasso: y length does not match Z");
  if (gamma < 0) throw ConfigError("lasso: gamma must be >= 0");
  const int K = static_cast<int>(Z.cols());
  const double M = static_cast<double>(Z.rows());

  Matrix G = Z.transpose() * Z;
  double L = power_lambda_max(G) / M;
  LassoSolution sol;
  if (L <= 0) {  // all-zero design: the objective reduces to the penalty
    sol.beta = Vector::Zero(K);
    sol.objective = lasso_objective(Z, y, gamma, sol.beta);
    sol.converged = true;
    return sol;
  }
  Vector zty = Z.transpose() * y;

  Vector x = Vector::Zero(K);
  Vector v = x;  // momentum point (accelerated only)
  double t = 1.0;
  double obj = lasso_objective(Z, y, gamma, x);
  if (opts.objective_trace != nullptr) opts.objective_trace->push_back(obj);

  for (int it = 1; it <= opts.max_iter; ++it) {
    const Vector& at = opts.accelerated ? v : x;
    Vector grad = (G * at - zty) / M;
    Vector x_next = soft_threshold((at - grad / L).eval(), gamma / L);
    if (opts.accelerated) {
      double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      v = x_next + ((t - 1.0) / t_next) * (x_next - x);
      t = t_next;
    }
    x = std::move(x_next);
    double obj_next = lasso_objective(Z, y, gamma, x);
    if (opts.objective_trace != nullptr) opts.objective_trace->push_back(obj_next);
    double rel = std::abs(obj - obj_next) / std::max(std::abs(obj), 1e-15);
    obj = obj_next;
    sol.iterations = it;
    if (rel < opts.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.beta = std::move(x);
  sol.objective = obj;
  return sol;
}

double coherence(const Matrix& Z) {
  const int K = static_cast<int>(Z.cols());
  if (K < 2) throw ConfigError("coherence needs at least two columns");
  Vector norms(K);
  for (int k = 0; k < K; ++k) {
    norms[k] = Z.col(k).norm();
    if (norms[k] == 0) throw ConfigError("coherence: zero column");
  }
  double mu = 0;
  for (int k = 0; k < K; ++k)
    for (int l = k + 1; l < K; ++l)
      mu = std::max(mu, std::abs(Z.col(k).dot(Z.col(l))) / (norms[k] * norms[l]));
  return mu;
}

double re_constant(const Matrix& Z, int s) {
  const int K = static_cast<int>(Z.cols());
  if (s < 1 || s > K) throw ConfigError("re_constant needs 1 <= s <= K");
  if (K > 20) throw ConfigError("re_constant enumeration capped at K = 20");
  const double M = static_cast<double>(Z.rows());

  std::vector<int> comb(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) comb[static_cast<std::size_t>(i)] = i;
  double kappa = std::numeric_limits<double>::infinity();
  for (;;) {
    Matrix sub(Z.rows(), s);
    for (int i = 0; i < s; ++i) sub.col(i) = Z.col(comb[static_cast<std::size_t>(i)]);
    Eigen::SelfAdjointEigenSolver<Matrix> eig((sub.transpose() * sub) / M);
    kappa = std::min(kappa, eig.eigenvalues().minCoeff());
    // Next s-combination in lexicographic order.
    int i = s - 1;
    while (i >= 0 && comb[static_cast<std::size_t>(i)] == K - s + i) --i;
    if (i < 0) break;
    ++comb[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < s; ++j) comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
  }
  return kappa;
}

bool support_recovered(const Vector& beta_hat, const Vector& beta_star, bool set_only,
                       double zero_tol) {
  if (beta_hat.size() != beta_star.size()) throw ConfigError("support: length mismatch");
  for (int k = 0; k < beta_hat.size(); ++k) {
    int sh = std::abs(beta_hat[k]) < zero_tol ? 0 : (beta_hat[k] > 0 ? 1 : -1);
    int st = beta_star[k] == 0 ? 0 : (beta_star[k] > 0 ? 1 : -1);
    if (set_only) {
      if ((sh != 0) != (st != 0)) return false;
    } else if (sh != st) {
      return false;
    }
  }
  return true;
}

double kkt_residual(const Matrix& Z, const Vector& y, double gamma, const Vector& beta) {
  const double M = static_cast<double>(Z.rows());
  Vector grad = Z.transpose() * (Z * beta - y) / M;
  double worst = 0;
  for (int k = 0; k < beta.size(); ++k) {
    double r;
    if (beta[k] != 0)
      r = std::abs(grad[k] + gamma * (beta[k] > 0 ? 1.0 : -1.0));
    else
      r = std::max(std::abs(grad[k]) - gamma, 0.0);
    worst = std::max(worst, r);
  }
  return worst;
}

PhaseTable phase_transition(int K, int s, const std::vector<int>& m_grid, int trials,
                            double sigma, std::uint64_t seed, const PhaseOptions& opts) {
  if (trials < 1) throw ConfigError("phase_transition needs trials >= 1");
  if (m_grid.empty()) throw ConfigError("phase_transition needs a non-empty M grid");
  PhaseTable table;
  for (int M : m_grid) {
    double gamma = opts.gamma_override
                       ? *opts.gamma_override
                       : 2.0 * sigma * std::sqrt(std::log(static_cast<double>(K)) /
                                                 static_cast<double>(M));
    std::vector<char> ok(static_cast<std::size_t>(trials), 0);
    std::vector<double> err(static_cast<std::size_t>(trials), 0.0);
    parallel_for(trials, opts.jobs, [&](int t) {
      RecoveryProblem prob =
          gen_linear_problem(K, s, M, sigma, opts.beta_min, seed + static_cast<std::uint64_t>(t));
      LassoOptions lo;
      lo.max_iter = opts.lasso_max_iter;
      lo.tol = opts.lasso_tol;
      lo.accelerated = true;
      LassoSolution sol = lasso_ista(prob.Z, prob.y, gamma, lo);
      ok[static_cast<std::size_t>(t)] = support_recovered(sol.beta, prob.beta_star) ? 1 : 0;
      err[static_cast<std::size_t>(t)] = (sol.beta - prob.beta_star).norm();
    });
    PhaseRow row;
    row.M = M;
    row.s = s;
    row.K = K;
    row.sigma = sigma;
    row.gamma = gamma;
    row.trials = trials;
    long hits = 0;
    double total_err = 0;
    for (int t = 0; t < trials; ++t) {
      hits += ok[static_cast<std::size_t>(t)];
      total_err += err[static_cast<std::size_t>(t)];
    }
    row.success_rate = static_cast<double>(hits) / static_cast<double>(trials);
    row.mean_l2_error = total_err / static_cast<double>(trials);
    table.rows.push_back(row);
  }
  return table;
}

std::string phase_csv(const PhaseTable& table) {
  std::string out = "M,s,K,sigma,gamma,trials,success_rate,mean_l2_error\n";
  for (const auto& r : table.rows) {
    out += std::to_string(r.M);
    out += ',';
    out += std::to_string(r.s);
    out += ',';
    out += std::to_string(r.K);
    out += ',';
    out += fmt17(r.sigma);
    out += ',';
    out += fmt17(r.gamma);
    out += ',';
    out += std::to_string(r.trials);
    out += ',';
    out += fmt17(r.success_rate);
    out += ',';
    out += fmt17(r.mean_l2_error);
    out += '\n';
  }
  return out;
}

std::string diagnostics_json(const Matrix& Z, const std::vector<int>& s_values) {
  Json j;
  j["mu"] = coherence(Z);
  Json kappa = Json::object();
  if (Z.cols() <= 20)
    for (int s : s_values) kappa[std::to_string(s)] = re_constant(Z, s);
  j["kappa_s"] = kappa;
  return dump_fixed(j);
}

}  // namespace csmil
