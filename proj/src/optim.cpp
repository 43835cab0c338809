#include "csmil/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csmil/rng.hpp"

namespace csmil {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double grad_norm(const GradientSet& g) {
  double s = g.W.squaredNorm() + g.b.squaredNorm() + g.beta.squaredNorm();
  for (const auto& h : g.heads) s += h.V.squaredNorm() + h.w.squaredNorm();
  return std::sqrt(s);
}

void scale_gradients(GradientSet& g, double f) {
  g.W *= f;
  g.b *= f;
  g.beta *= f;
  for (auto& h : g.heads) {
    h.V *= f;
    h.w *= f;
  }
}

template <class T>
void adam_update(T& p, const T& g, T& m, T& v, double lr, const AdamConfig& a, double bias1,
                 double bias2) {
  m = a.beta1 * m + (1.0 - a.beta1) * g;
  v = (a.beta2 * v.array() + (1.0 - a.beta2) * g.array().square()).matrix();
  p -= (lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + a.eps)).matrix();
}

struct AdamState {
  GradientSet m;
  GradientSet v;
  long t = 0;
};

void smooth_step(CsmilModel& model, const GradientSet& g, const TrainConfig& cfg,
                 AdamState& state) {
  if (!cfg.use_adam) {
    for (std::size_t h = 0; h < model.heads.size(); ++h) {
      model.heads[h].V -= cfg.lr_smooth * g.heads[h].V;
      model.heads[h].w -= cfg.lr_smooth * g.heads[h].w;
    }
    model.W -= cfg.lr_smooth * g.W;
    model.b -= cfg.lr_smooth * g.b;
    return;
  }
  ++state.t;
  double bias1 = 1.0 - std::pow(cfg.adam.beta1, static_cast<double>(state.t));
  double bias2 = 1.0 - std::pow(cfg.adam.beta2, static_cast<double>(state.t));
  for (std::size_t h = 0; h < model.heads.size(); ++h) {
    adam_update(model.heads[h].V, g.heads[h].V, state.m.heads[h].V, state.v.heads[h].V,
                cfg.lr_smooth, cfg.adam, bias1, bias2);
    adam_update(model.heads[h].w, g.heads[h].w, state.m.heads[h].w, state.v.heads[h].w,
                cfg.lr_smooth, cfg.adam, bias1, bias2);
  }
  adam_update(model.W, g.W, state.m.W, state.v.W, cfg.lr_smooth, cfg.adam, bias1, bias2);
  adam_update(model.b, g.b, state.m.b, state.v.b, cfg.lr_smooth, cfg.adam, bias1, bias2);
}

}  // namespace

GradientSet zero_gradients(const CsmilModel& model) {
  GradientSet g;
  for (const auto& h : model.heads) {
    AttentionHead z;
    z.V = Matrix::Zero(h.V.rows(), h.V.cols());
    z.w = Vector::Zero(h.w.size());
    g.heads.push_back(std::move(z));
  }
  g.beta = Vector::Zero(model.beta.size());
  g.W = Matrix::Zero(model.W.rows(), model.W.cols());
  g.b = Vector::Zero(model.b.size());
  return g;
}

GradientSet backward(const AssignedBags& bags, const CsmilModel& model,
                     const std::vector<ForwardCache>& caches) {
  if (bags.size() != caches.size()) throw ConfigError("backward: cache count mismatch");
  GradientSet g = zero_gradients(model);
  const int K = model.cfg.K;
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const Bag& bag = *bags[b].bag;
    const ForwardCache& cache = caches[b];
    if (cache.prototypes.rows() != K || cache.bag_vector.size() != model.cfg.d ||
        static_cast<int>(cache.parts.size()) != K)
      throw ConfigError("backward: stale cache for bag " + bag.id);

    // Classifier: d(CE)/d(logits) = probs - onehot(label).
    Vector gu = cache.probs;
    gu[bag.label] -= 1.0;
    g.W += gu * cache.bag_vector.transpose();
    g.b += gu;
    Vector gz = model.W.transpose() * gu;

    for (int k = 0; k < K; ++k) {
      g.beta[k] += cache.prototypes.row(k).dot(gz);
      const auto& idx = cache.parts[static_cast<std::size_t>(k)];
      if (idx.empty()) continue;
      const Vector& alpha = cache.alpha[static_cast<std::size_t>(k)];
      const Matrix& t = cache.tanh_act[static_cast<std::size_t>(k)];
      const int m = static_cast<int>(idx.size());
      if (alpha.size() != m || t.cols() != m)
        throw ConfigError("backward: stale cache for bag " + bag.id);
      Matrix rows(m, model.cfg.d);
      for (int r = 0; r < m; ++r) rows.row(r) = bag.embeddings.row(idx[static_cast<std::size_t>(r)]);

      // Prototype is sum_n alpha_n h_n with alpha = softmax(t' w).
      Vector gzk = model.beta[k] * gz;
      Vector q = rows * gzk;
      double mix = alpha.dot(q);
      Vector ga = (alpha.array() * (q.array() - mix)).matrix();

      std::size_t hi = model.cfg.shared_head ? 0 : static_cast<std::size_t>(k);
      g.heads[hi].w += t * ga;
      const Vector& w = model.head(k).w;
      Matrix pre = ((w * ga.transpose()).array() * (1.0 - t.array().square())).matrix();
      g.heads[hi].V += pre * rows;
    }
  }
  return g;
}

double soft_threshold(double v, double t) {
  if (t < 0) throw ConfigError("soft_threshold needs t >= 0");
  double mag = std::abs(v) - t;
  if (mag <= 0) return 0.0;
  return v > 0 ? mag : -mag;
}

Vector soft_threshold(const Vector& v, double t) {
  Vector out(v.size());
  for (int i = 0; i < v.size(); ++i) out[i] = soft_threshold(v[i], t);
  return out;
}

TrainResult train(const AssignedBags& train_bags, const AssignedBags& val_bags,
                  const TrainConfig& cfg, const CsmilModel& init) {
  if (train_bags.empty()) throw ConfigError("no training bags");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.gamma < 0) throw ConfigError("gamma must be >= 0");
  if (cfg.lr_smooth <= 0 || cfg.lr_beta <= 0) throw ConfigError("learning rates must be positive");
  if (cfg.early_stop_patience > 0 && val_bags.empty())
    throw ConfigError("early stopping needs a validation set");
  {
    bool has0 = false, has1 = false;
    for (const auto& ab : train_bags) (ab.bag->label == 1 ? has1 : has0) = true;
    if (!has0 || !has1) throw ConfigError("training needs at least one bag of each class");
  }

  CsmilModel model = init;
  AdamState adam{zero_gradients(model), zero_gradients(model), 0};
  Rng shuffle_rng(derive_seed(cfg.seed, "batches"));
  TrainResult out;

  std::vector<int> val_labels;
  for (const auto& ab : val_bags) val_labels.push_back(ab.bag->label);

  double best_val_auc = -1;
  int since_best = 0;
  CsmilModel best_model = model;

  const int n = static_cast<int>(train_bags.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.batch_size > 0) shuffle_rng.shuffle(order);
    int bs = cfg.batch_size > 0 ? cfg.batch_size : n;
    for (int start = 0; start < n; start += bs) {
      int stop = std::min(start + bs, n);
      AssignedBags batch;
      batch.reserve(static_cast<std::size_t>(stop - start));
      for (int i = start; i < stop; ++i) batch.push_back(train_bags[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);

      std::vector<ForwardCache> caches;
      caches.reserve(batch.size());
      for (const auto& ab : batch) caches.push_back(bag_forward(*ab.bag, ab.assignment, model));
      GradientSet g = backward(batch, model, caches);
      if (cfg.grad_clip > 0) {
        double norm = grad_norm(g);
        if (norm > cfg.grad_clip) scale_gradients(g, cfg.grad_clip / norm);
      }
      smooth_step(model, g, cfg, adam);
      if (!cfg.freeze_beta)
        model.beta = soft_threshold((model.beta - cfg.lr_beta * g.beta).eval(),
                                    cfg.lr_beta * cfg.gamma);
    }

    EpochStats stats;
    LossBreakdown loss = batch_loss(train_bags, model, cfg.gamma);
    stats.total = loss.total;
    stats.data = loss.data;
    stats.penalty = loss.penalty;
    stats.beta_l0 = beta_l0(model.beta);
    stats.val_acc = stats.val_f1 = stats.val_auc = kNan;
    if (!val_bags.empty()) {
      MetricReport rep = compute_metrics(bag_scores(val_bags, model), val_labels);
      stats.val_acc = rep.accuracy;
      stats.val_f1 = rep.f1;
      stats.val_auc = rep.auc.value_or(kNan);
    }
    out.history.epochs.push_back(stats);

    if (!std::isfinite(stats.total))
      throw NumericError("training diverged at epoch " + std::to_string(epoch));

    if (cfg.early_stop_patience > 0) {
      if (std::isfinite(stats.val_auc) && stats.val_auc > best_val_auc) {
        best_val_auc = stats.val_auc;
        best_model = model;
        since_best = 0;
      } else {
        ++since_best;
        if (since_best >= cfg.early_stop_patience) {
          out.model = best_model;
          return out;
        }
      }
    }
  }
  out.model = cfg.early_stop_patience > 0 && best_val_auc >= 0 ? best_model : model;
  return out;
}

double finite_diff_check(const CsmilModel& model, const AssignedBags& bags, double h,
                         const GradientSet* analytic_override) {
  if (h <= 0) throw ConfigError("finite difference step must be positive");
  CsmilModel probe = model;
  GradientSet analytic;
  if (analytic_override != nullptr) {
    analytic = *analytic_override;
  } else {
    std::vector<ForwardCache> caches;
    caches.reserve(bags.size());
    for (const auto& ab : bags) caches.push_back(bag_forward(*ab.bag, ab.assignment, probe));
    analytic = backward(bags, probe, caches);
  }

  auto data_term = [&]() { return batch_loss(bags, probe, 0.0).data; };
  double worst = 0;
  auto check_coord = [&](double* p, double a) {
    double keep = *p;
    *p = keep + h;
    double up = data_term();
    *p = keep - h;
    double down = data_term();
    *p = keep;
    double numeric = (up - down) / (2.0 * h);
    double err = std::abs(numeric - a) /
                 std::max({std::abs(a), std::abs(numeric), 1e-8});
    if (err > worst) worst = err;
  };

  for (std::size_t hd = 0; hd < probe.heads.size(); ++hd) {
    auto& V = probe.heads[hd].V;
    for (int i = 0; i < V.rows(); ++i)
      for (int j = 0; j < V.cols(); ++j) check_coord(&V(i, j), analytic.heads[hd].V(i, j));
    auto& w = probe.heads[hd].w;
    for (int i = 0; i < w.size(); ++i) check_coord(&w[i], analytic.heads[hd].w[i]);
  }
  for (int i = 0; i < probe.W.rows(); ++i)
    for (int j = 0; j < probe.W.cols(); ++j) check_coord(&probe.W(i, j), analytic.W(i, j));
  for (int i = 0; i < probe.b.size(); ++i) check_coord(&probe.b[i], analytic.b[i]);
  for (int k = 0; k < probe.beta.size(); ++k) check_coord(&probe.beta[k], analytic.beta[k]);
  return worst;
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,total,data,penalty,beta_l0,val_acc,val_f1,val_auc\n";
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const auto& s = history.epochs[e];
    out += std::to_string(e);
    out += ',';
    out += fmt17(s.total);
    out += ',';
    out += fmt17(s.data);
    out += ',';
    out += fmt17(s.penalty);
    out += ',';
    out += std::to_string(s.beta_l0);
    out += ',';
    out += fmt17(s.val_acc);
    out += ',';
    out += fmt17(s.val_f1);
    out += ',';
    out += fmt17(s.val_auc);
    out += '\n';
  }
  return out;
}

std::vector<double> bag_scores(const AssignedBags& bags, const CsmilModel& model) {
  std::vector<double> scores;
  scores.reserve(bags.size());
  for (const auto& ab : bags)
    scores.push_back(bag_forward(*ab.bag, ab.assignment, model).probs[1]);
  return scores;
}

}  // namespace csmil
