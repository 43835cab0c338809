#include "csmil/clustering.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "csmil/jsonx.hpp"
#include "csmil/rng.hpp"

namespace csmil {

namespace {

// Index of the nearest center by squared Euclidean distance, lowest index on
// exact ties.
int nearest_center(const Matrix& centers, const Eigen::RowVectorXd& x, double* dist2_out) {
  int best = 0;
  double best_d = (centers.row(0) - x).squaredNorm();
  for (int k = 1; k < centers.rows(); ++k) {
    double d = (centers.row(k) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  if (dist2_out != nullptr) *dist2_out = best_d;
  return best;
}

Matrix seed_plus_plus(const Matrix& points, int K, Rng& rng) {
  const int n = static_cast<int>(points.rows());
  Matrix centers(K, points.cols());
  centers.row(0) = points.row(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
  Vector d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int k = 1; k < K; ++k) {
    double total = d2.sum();
    int pick;
    if (total > 0) {
      double r = rng.uniform01() * total;
      double acc = 0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      // All remaining mass is zero (duplicate points); fall back to uniform.
      pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(k) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }
  return centers;
}

struct LloydResult {
  Matrix centers;
  double inertia;
  int iterations;
};

LloydResult lloyd(const Matrix& points, int K, std::uint64_t seed, const KmeansOptions& opts) {
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  Rng rng(seed);
  Matrix centers = seed_plus_plus(points, K, rng);

  std::vector<int> assign(static_cast<std::size_t>(n));
  double inertia = 0;
  int iter = 0;
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (iter = 1; iter <= opts.max_iter; ++iter) {
    inertia = 0;
    std::vector<int> counts(static_cast<std::size_t>(K), 0);
    for (int i = 0; i < n; ++i) {
      double d2;
      int k = nearest_center(centers, points.row(i), &d2);
      assign[static_cast<std::size_t>(i)] = k;
      ++counts[static_cast<std::size_t>(k)];
      inertia += d2;
    }
    assert(inertia <= prev_inertia + 1e-9 * (1.0 + prev_inertia));
    prev_inertia = inertia;
    if (opts.inertia_trace != nullptr) opts.inertia_trace->push_back(inertia);

    Matrix next = Matrix::Zero(K, d);
    for (int i = 0; i < n; ++i) next.row(assign[static_cast<std::size_t>(i)]) += points.row(i);

    // Empty clusters: move the center onto the point farthest from it. The
    // moved center has nothing assigned, so current inertia is unaffected and
    // the next assignment pass can only improve. Each repair claims a
    // distinct point.
    std::vector<char> claimed(static_cast<std::size_t>(n), 0);
    for (int k = 0; k < K; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        next.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
        continue;
      }
      int far = -1;
      double far_d = -1;
      for (int i = 0; i < n; ++i) {
        if (claimed[static_cast<std::size_t>(i)]) continue;
        double dd = (points.row(i) - centers.row(k)).squaredNorm();
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      if (far >= 0) {
        claimed[static_cast<std::size_t>(far)] = 1;
        next.row(k) = points.row(far);
      } else {
        next.row(k) = centers.row(k);
      }
    }

    double shift = (next - centers).cwiseAbs().maxCoeff();
    centers = next;
    if (shift < opts.tol) break;
  }
  if (iter > opts.max_iter) iter = opts.max_iter;

  // Final pass so the reported inertia matches the returned centers.
  inertia = 0;
  for (int i = 0; i < n; ++i) {
    double d2;
    nearest_center(centers, points.row(i), &d2);
    inertia += d2;
  }
  return {std::move(centers), inertia, iter};
}

bool row_less(const Matrix& m, int a, int b) {
  for (int j = 0; j < m.cols(); ++j) {
    if (m(a, j) < m(b, j)) return true;
    if (m(a, j) > m(b, j)) return false;
  }
  return false;
}

}  // namespace

ClusterModel kmeans_global(const Matrix& points, int K, std::uint64_t seed,
                           const KmeansOptions& opts) {
  const int n = static_cast<int>(points.rows());
  if (K < 1) throw ConfigError("K must be >= 1");
  if (n < K)
    throw ConfigError("need at least K points: got " + std::to_string(n) + " for K=" +
                      std::to_string(K));
  if (n == 0 || points.cols() == 0) throw ConfigError("empty point set");
  if (!points.allFinite()) throw ConfigError("non-finite values in clustering input");
  if (opts.restarts < 1 || opts.max_iter < 1) throw ConfigError("bad kmeans options");

  Vector mean, scale;
  Matrix standardized;
  const Matrix* work = &points;
  if (opts.zscore) {
    mean = points.colwise().mean();
    scale.resize(points.cols());
    for (int j = 0; j < points.cols(); ++j) {
      double var = (points.col(j).array() - mean[j]).square().mean();
      scale[j] = var > 0 ? std::sqrt(var) : 1.0;
    }
    standardized = (points.rowwise() - mean.transpose()).array().rowwise() /
                   scale.transpose().array();
    work = &standardized;
  }

  std::vector<std::uint64_t> restart_seeds(static_cast<std::size_t>(opts.restarts));
  for (int r = 0; r < opts.restarts; ++r)
    restart_seeds[static_cast<std::size_t>(r)] = derive_seed(seed, "kmeans-restart", static_cast<std::uint64_t>(r));

  LloydResult best{{}, std::numeric_limits<double>::infinity(), 0};
  for (int r = 0; r < opts.restarts; ++r) {
    LloydResult res = lloyd(*work, K, restart_seeds[static_cast<std::size_t>(r)], opts);
    if (res.inertia < best.inertia) best = std::move(res);
  }

  // Canonical center order: lexicographic by coordinates. Keeps output
  // independent of seeding order and makes cluster ids comparable across
  // runs on near-identical data.
  std::vector<int> order(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) order[static_cast<std::size_t>(k)] = k;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return row_less(best.centers, a, b); });
  ClusterModel model;
  model.K = K;
  model.dim = static_cast<int>(points.cols());
  model.centers.resize(K, points.cols());
  for (int k = 0; k < K; ++k) model.centers.row(k) = best.centers.row(order[static_cast<std::size_t>(k)]);
  model.inertia = best.inertia;
  model.iterations_run = best.iterations;
  if (opts.zscore) {
    model.feature_mean = std::move(mean);
    model.feature_scale = std::move(scale);
  }
  return model;
}

ClusterAssignment assign_local(const Bag& bag, const ClusterModel& model) {
  if (bag.dim() != model.dim)
    throw ConfigError("bag " + bag.id + " dim " + std::to_string(bag.dim()) +
                      " does not match cluster model dim " + std::to_string(model.dim));
  bool z = model.feature_mean.size() > 0;
  ClusterAssignment a;
  a.cluster_of_instance.resize(static_cast<std::size_t>(bag.n()));
  a.counts.assign(static_cast<std::size_t>(model.K), 0);
  Eigen::RowVectorXd row;
  for (int i = 0; i < bag.n(); ++i) {
    if (z)
      row = (bag.embeddings.row(i) - model.feature_mean.transpose()).array() /
            model.feature_scale.transpose().array();
    else
      row = bag.embeddings.row(i);
    int k = nearest_center(model.centers, row, nullptr);
    a.cluster_of_instance[static_cast<std::size_t>(i)] = k;
    ++a.counts[static_cast<std::size_t>(k)];
  }
  return a;
}

std::vector<std::vector<int>> partition_bag(const Bag& bag, const ClusterAssignment& assignment) {
  if (static_cast<int>(assignment.cluster_of_instance.size()) != bag.n())
    throw ConfigError("assignment length does not match bag " + bag.id);
  std::vector<std::vector<int>> parts(assignment.counts.size());
  for (int i = 0; i < bag.n(); ++i) {
    int k = assignment.cluster_of_instance[static_cast<std::size_t>(i)];
    if (k < 0 || k >= static_cast<int>(parts.size()))
      throw ConfigError("assignment for bag " + bag.id + " references cluster " + std::to_string(k));
    parts[static_cast<std::size_t>(k)].push_back(i);
  }
  return parts;
}

void save_cluster_model(const ClusterModel& model, const std::string& path) {
  Json j;
  j["K"] = model.K;
  j["dim"] = model.dim;
  Json rows = Json::array();
  for (int k = 0; k < model.K; ++k) {
    Json row = Json::array();
    for (int c = 0; c < model.dim; ++c) row.push_back(model.centers(k, c));
    rows.push_back(row);
  }
  j["centers"] = rows;
  if (model.feature_mean.size() > 0) {
    Json mean = Json::array(), scale = Json::array();
    for (int c = 0; c < model.dim; ++c) {
      mean.push_back(model.feature_mean[c]);
      scale.push_back(model.feature_scale[c]);
    }
    j["feature_mean"] = mean;
    j["feature_scale"] = scale;
  }
  write_text_file(path, dump_fixed(j));
}

ClusterModel load_cluster_model(const std::string& path) {
  Json j = parse_json_file(path);
  ClusterModel model;
  model.K = j.at("K").get<int>();
  model.dim = j.at("dim").get<int>();
  const auto& rows = j.at("centers");
  if (model.K < 1 || model.dim < 1 || static_cast<int>(rows.size()) != model.K)
    throw ConfigError("malformed cluster model: " + path);
  model.centers.resize(model.K, model.dim);
  for (int k = 0; k < model.K; ++k) {
    const auto& row = rows[static_cast<std::size_t>(k)];
    if (static_cast<int>(row.size()) != model.dim)
      throw ConfigError("malformed cluster model row: " + path);
    for (int c = 0; c < model.dim; ++c) model.centers(k, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  if (j.contains("feature_mean")) {
    const auto& mean = j["feature_mean"];
    const auto& scale = j.at("feature_scale");
    if (static_cast<int>(mean.size()) != model.dim || static_cast<int>(scale.size()) != model.dim)
      throw ConfigError("malformed standardization in cluster model: " + path);
    model.feature_mean.resize(model.dim);
    model.feature_scale.resize(model.dim);
    for (int c = 0; c < model.dim; ++c) {
      model.feature_mean[c] = mean[static_cast<std::size_t>(c)].get<double>();
      model.feature_scale[c] = scale[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return model;
}

std::string assignments_csv(const Dataset& ds, const std::vector<ClusterAssignment>& assigns) {
  if (assigns.size() != ds.bags.size()) throw ConfigError("assignment count mismatch");
  std::string out = "bag_id,instance_index,cluster_id\n";
  for (std::size_t b = 0; b < ds.bags.size(); ++b) {
    const auto& bag = ds.bags[b];
    const auto& a = assigns[b];
    for (int i = 0; i < bag.n(); ++i) {
      out += bag.id;
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += std::to_string(a.cluster_of_instance[static_cast<std::size_t>(i)]);
      out += '\n';
    }
  }
  return out;
}

}  // namespace csmil
