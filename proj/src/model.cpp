#include "csmil/model.hpp"

#include <cmath>

#include "csmil/jsonx.hpp"
#include "csmil/rng.hpp"

namespace csmil {

namespace {

double logsumexp2(const Vector& u) {
  double m = u.maxCoeff();
  double s = 0;
  for (int i = 0; i < u.size(); ++i) s += std::exp(u[i] - m);
  return m + std::log(s);
}

void uniform_fill(Matrix& m, double bound, Rng& rng) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
}

void uniform_fill(Vector& v, double bound, Rng& rng) {
  for (int i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
}

}  // namespace

Vector stable_softmax(const Vector& logits) {
  Vector out(logits.size());
  double m = logits.maxCoeff();
  double s = 0;
  for (int i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    s += out[i];
  }
  out /= s;
  return out;
}

CsmilModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.K < 1 || cfg.d < 1 || cfg.L < 1) throw ConfigError("model needs K, d, L >= 1");
  CsmilModel model;
  model.cfg = cfg;
  Rng rng(derive_seed(seed, "init"));
  int n_heads = cfg.shared_head ? 1 : cfg.K;
  double vb = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  double wb = 1.0 / std::sqrt(static_cast<double>(cfg.L));
  for (int h = 0; h < n_heads; ++h) {
    AttentionHead head;
    head.V.resize(cfg.L, cfg.d);
    head.w.resize(cfg.L);
    uniform_fill(head.V, vb, rng);
    uniform_fill(head.w, wb, rng);
    model.heads.push_back(std::move(head));
  }
  model.beta = Vector::Ones(cfg.K);
  model.W.resize(2, cfg.d);
  model.b.resize(2);
  uniform_fill(model.W, vb, rng);
  uniform_fill(model.b, vb, rng);
  return model;
}

void attention_pool(const Matrix& instances, const AttentionHead& head, Vector* alpha_out,
                    Vector* prototype_out, Matrix* tanh_out) {
  const int m = static_cast<int>(instances.rows());
  if (m == 0) throw ConfigError("attention_pool on an empty instance set");
  if (instances.cols() != head.V.cols()) throw ConfigError("attention head dim mismatch");
  Matrix t = (head.V * instances.transpose()).array().tanh();  // L x m
  Vector logits = t.transpose() * head.w;                      // m
  Vector alpha = stable_softmax(logits);
  if (prototype_out != nullptr) *prototype_out = instances.transpose() * alpha;
  if (alpha_out != nullptr) *alpha_out = std::move(alpha);
  if (tanh_out != nullptr) *tanh_out = std::move(t);
}

Vector aggregate_bag(const Matrix& prototypes, const Vector& beta) {
  if (prototypes.rows() != beta.size()) throw ConfigError("aggregate: K mismatch");
  return prototypes.transpose() * beta;
}

void classify(const Vector& bag_vector, const CsmilModel& model, Vector* logits_out,
              Vector* probs_out) {
  if (bag_vector.size() != model.cfg.d) throw ConfigError("classify: dim mismatch");
  Vector logits = model.W * bag_vector + model.b;
  if (probs_out != nullptr) *probs_out = stable_softmax(logits);
  if (logits_out != nullptr) *logits_out = std::move(logits);
}

ForwardCache bag_forward(const Bag& bag, const ClusterAssignment& assignment,
                         const CsmilModel& model) {
  if (bag.dim() != model.cfg.d)
    throw ConfigError("bag " + bag.id + " dim does not match model");
  if (static_cast<int>(assignment.counts.size()) != model.cfg.K)
    throw ConfigError("assignment K does not match model for bag " + bag.id);
  ForwardCache cache;
  cache.parts = partition_bag(bag, assignment);
  cache.alpha.resize(static_cast<std::size_t>(model.cfg.K));
  cache.tanh_act.resize(static_cast<std::size_t>(model.cfg.K));
  cache.prototypes = Matrix::Zero(model.cfg.K, model.cfg.d);
  for (int k = 0; k < model.cfg.K; ++k) {
    const auto& idx = cache.parts[static_cast<std::size_t>(k)];
    if (idx.empty()) continue;
    Matrix rows(static_cast<int>(idx.size()), model.cfg.d);
    for (std::size_t r = 0; r < idx.size(); ++r) rows.row(static_cast<int>(r)) = bag.embeddings.row(idx[r]);
    Vector alpha, proto;
    Matrix t;
    attention_pool(rows, model.head(k), &alpha, &proto, &t);
    cache.alpha[static_cast<std::size_t>(k)] = std::move(alpha);
    cache.tanh_act[static_cast<std::size_t>(k)] = std::move(t);
    cache.prototypes.row(k) = proto.transpose();
  }
  cache.bag_vector = aggregate_bag(cache.prototypes, model.beta);
  classify(cache.bag_vector, model, &cache.logits, &cache.probs);
  return cache;
}

LossBreakdown batch_loss(const AssignedBags& bags, const CsmilModel& model, double gamma) {
  if (gamma < 0) throw ConfigError("gamma must be >= 0");
  LossBreakdown out;
  for (const auto& ab : bags) {
    ForwardCache cache = bag_forward(*ab.bag, ab.assignment, model);
    // Cross-entropy via logsumexp, stable for extreme logits.
    out.data += logsumexp2(cache.logits) - cache.logits[ab.bag->label];
  }
  out.penalty = gamma * model.beta.lpNorm<1>();
  out.total = out.data + out.penalty;
  return out;
}

int beta_l0(const Vector& beta, double tol) {
  int nz = 0;
  for (int k = 0; k < beta.size(); ++k)
    if (std::abs(beta[k]) > tol) ++nz;
  return nz;
}

namespace {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("malformed matrix in checkpoint");
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[static_cast<std::size_t>(i)].size()) != cols)
      throw ConfigError("ragged matrix in checkpoint");
    for (int c = 0; c < cols; ++c) m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

void save_model(const CsmilModel& model, std::uint64_t seed, const std::string& path) {
  Json j;
  j["K"] = model.cfg.K;
  j["d"] = model.cfg.d;
  j["L"] = model.cfg.L;
  Json beta = Json::array();
  for (int k = 0; k < model.beta.size(); ++k) beta.push_back(model.beta[k]);
  j["beta"] = beta;
  Json heads = Json::array();
  for (const auto& h : model.heads) {
    Json hj;
    hj["V"] = matrix_to_json(h.V);
    Json w = Json::array();
    for (int i = 0; i < h.w.size(); ++i) w.push_back(h.w[i]);
    hj["w"] = w;
    heads.push_back(hj);
  }
  j["heads"] = heads;
  j["W"] = matrix_to_json(model.W);
  Json b = Json::array();
  for (int i = 0; i < model.b.size(); ++i) b.push_back(model.b[i]);
  j["b"] = b;
  Json cfg;
  cfg["shared_head"] = model.cfg.shared_head;
  j["config"] = cfg;
  j["seed"] = seed;
  write_text_file(path, dump_fixed(j));
}

CsmilModel load_model(const std::string& path, std::uint64_t* seed_out) {
  Json j = parse_json_file(path);
  CsmilModel model;
  model.cfg.K = j.at("K").get<int>();
  model.cfg.d = j.at("d").get<int>();
  model.cfg.L = j.at("L").get<int>();
  model.cfg.shared_head = j.at("config").value("shared_head", false);
  const auto& beta = j.at("beta");
  if (static_cast<int>(beta.size()) != model.cfg.K) throw ConfigError("beta length mismatch: " + path);
  model.beta.resize(model.cfg.K);
  for (int k = 0; k < model.cfg.K; ++k) model.beta[k] = beta[static_cast<std::size_t>(k)].get<double>();
  int expect_heads = model.cfg.shared_head ? 1 : model.cfg.K;
  const auto& heads = j.at("heads");
  if (static_cast<int>(heads.size()) != expect_heads) throw ConfigError("head count mismatch: " + path);
  for (const auto& hj : heads) {
    AttentionHead h;
    h.V = matrix_from_json(hj.at("V"));
    const auto& w = hj.at("w");
    h.w.resize(static_cast<int>(w.size()));
    for (int i = 0; i < h.w.size(); ++i) h.w[i] = w[static_cast<std::size_t>(i)].get<double>();
    if (h.V.rows() != model.cfg.L || h.V.cols() != model.cfg.d || h.w.size() != model.cfg.L)
      throw ConfigError("head shape mismatch: " + path);
    model.heads.push_back(std::move(h));
  }
  model.W = matrix_from_json(j.at("W"));
  const auto& b = j.at("b");
  model.b.resize(static_cast<int>(b.size()));
  for (int i = 0; i < model.b.size(); ++i) model.b[i] = b[static_cast<std::size_t>(i)].get<double>();
  if (model.W.rows() != 2 || model.W.cols() != model.cfg.d || model.b.size() != 2)
    throw ConfigError("classifier shape mismatch: " + path);
  if (seed_out != nullptr) *seed_out = j.value("seed", static_cast<std::uint64_t>(0));
  return model;
}

}  // namespace csmil
