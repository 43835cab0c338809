// End-to-end acceptance checks for the shipped library and CLI. Each
// criterion prints exactly one [PASS]/[FAIL] line; the process exits nonzero
// if any of them fail. Thresholds live next to the checks and are meant to
// be read: every numeric gate was pinned against an independent oracle or a
// reference run before it was written down here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "csmil/evalx.hpp"
#include "csmil/recovery.hpp"
#include "csmil/rng.hpp"
#include "oracles.hpp"

using namespace csmil;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
 public:
  explicit Criterion(int number, std::string title)
      : number_(number), title_(std::move(title)), start_(std::chrono::steady_clock::now()) {}

  void finish(bool ok, const std::string& detail) {
    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::printf("[%s] %d %s (%s) [%.1fs]\n", ok ? "PASS" : "FAIL", number_, title_.c_str(),
                detail.c_str(), dt);
    std::fflush(stdout);
    if (!ok) ++g_failures;
  }

 private:
  int number_;
  std::string title_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---- CLI helpers -----------------------------------------------------------

fs::path work_root() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "csmil_acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

int run_cli(const std::string& args, const fs::path& stdout_file) {
  std::string cmd = std::string(CSMIL_BIN) + " " + args + " > " + stdout_file.string() +
                    " 2> " + stdout_file.string() + ".err";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in.good()) return "<missing " + p.string() + ">";
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Byte-compares every regular file under two directories.
bool dir_equal(const fs::path& a, const fs::path& b, std::string* why) {
  std::map<std::string, fs::path> fa, fb;
  for (auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa[fs::relative(e.path(), a).string()] = e.path();
  for (auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb[fs::relative(e.path(), b).string()] = e.path();
  if (fa.size() != fb.size()) {
    *why = "file count differs";
    return false;
  }
  for (const auto& [rel, pa] : fa) {
    auto it = fb.find(rel);
    if (it == fb.end()) {
      *why = "missing " + rel;
      return false;
    }
    if (slurp(pa) != slurp(it->second)) {
      *why = rel + " differs";
      return false;
    }
  }
  return true;
}

// ---- shared fixtures -------------------------------------------------------

// The reference benchmark: the generator's stock configuration at seed 0,
// five stratified folds, mini-batch training so the proximal step runs often
// enough to zero out coordinates within the epoch budget.
struct Benchmark {
  SynthResult sr;
  FoldAssignment folds;
  TrainConfig cfg;
  CvOptions opts;
};

const Benchmark& benchmark() {
  static Benchmark b = [] {
    Benchmark bm;
    SynthConfig sc;
    sc.seed = 0;
    bm.sr = generate_synthetic(sc);
    bm.folds = split_folds(bm.sr.dataset, 5, 0);
    bm.cfg.epochs = 300;
    bm.cfg.batch_size = 16;
    bm.opts.L = 64;
    return bm;
  }();
  return b;
}

// Full-data clustering of the benchmark, derived the same way the train
// command does it, plus the informative fraction of each cluster from the
// generator's ground truth.
struct FullClustering {
  ClusterModel cm;
  std::vector<ClusterAssignment> assigns;
  std::vector<double> informative_fraction;
};

const FullClustering& full_clustering() {
  static FullClustering fc = [] {
    const Benchmark& bm = benchmark();
    const Dataset& ds = bm.sr.dataset;
    long total = 0;
    for (const auto& bag : ds.bags) total += bag.n();
    Matrix pts(total, ds.dim);
    long row = 0;
    for (const auto& bag : ds.bags) {
      pts.middleRows(row, bag.n()) = bag.embeddings;
      row += bag.n();
    }
    FullClustering out;
    out.cm = kmeans_global(pts, 8, derive_seed(0, "kmeans"));
    std::vector<long> inf(8, 0), all(8, 0);
    std::vector<bool> informative(9, false);
    for (int c : bm.sr.truth.informative_components) informative[static_cast<std::size_t>(c)] = true;
    for (const auto& bag : ds.bags) {
      ClusterAssignment a = assign_local(bag, out.cm);
      const auto& comps = bm.sr.truth.component_of_instance.at(bag.id);
      for (int i = 0; i < bag.n(); ++i) {
        int k = a.cluster_of_instance[static_cast<std::size_t>(i)];
        ++all[static_cast<std::size_t>(k)];
        if (informative[static_cast<std::size_t>(comps[static_cast<std::size_t>(i)])])
          ++inf[static_cast<std::size_t>(k)];
      }
      out.assigns.push_back(std::move(a));
    }
    for (int k = 0; k < 8; ++k)
      out.informative_fraction.push_back(
          all[static_cast<std::size_t>(k)] == 0
              ? 0.0
              : static_cast<double>(inf[static_cast<std::size_t>(k)]) /
                    static_cast<double>(all[static_cast<std::size_t>(k)]));
    return out;
  }();
  return fc;
}

// ---- criteria --------------------------------------------------------------

// 1. Analytic gradients of the bag loss agree with central finite
// differences over random shapes, including empty clusters and shared heads.
void criterion_gradients() {
  Criterion c(1, "analytic gradients match central differences");
  double worst = 0;
  for (int s = 0; s < 20; ++s) {
    std::uint64_t seed = derive_seed(0, "gradcheck", static_cast<std::uint64_t>(s));
    Rng rng(seed);
    int K = 1 + s % 3;
    CsmilModel model = init_model({K, 3, 2, false}, seed);
    std::vector<oracles::ProbeBag> probes;
    for (int b = 0; b < 2; ++b) {
      int n = 3 + static_cast<int>(rng.below(3));
      probes.push_back(oracles::make_probe_bag(rng, K, 3, n, b % 2, b == 0 && K > 1));
    }
    AssignedBags bags;
    for (auto& p : probes) bags.push_back({&p.bag, p.assignment});
    worst = std::max(worst, finite_diff_check(model, bags, 1e-6));
  }
  c.finish(worst < 1e-4, "20 shapes, max_rel_error=" + fmt(worst));
}

// 2. With a single cluster and unit weight the full pipeline reduces to
// plain gated attention pooling, probability for probability.
void criterion_attention_equivalence() {
  Criterion c(2, "single-cluster pipeline equals attention-pooling reference");
  Rng rng(202);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    int d = 2 + static_cast<int>(rng.below(6));
    int n = 1 + static_cast<int>(rng.below(12));
    CsmilModel m = init_model({1, d, 4 + static_cast<int>(rng.below(5)), false},
                              derive_seed(7, "abmil", static_cast<std::uint64_t>(t)));
    Bag bag;
    bag.id = "t";
    bag.label = static_cast<int>(rng.below(2));
    bag.embeddings.resize(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) bag.embeddings(i, j) = rng.normal();
    ClusterAssignment as;
    as.cluster_of_instance.assign(static_cast<std::size_t>(n), 0);
    as.counts = {n};
    ForwardCache fc = bag_forward(bag, as, m);
    Vector ref = oracles::ref_abmil_probs(bag.embeddings, m.heads[0].V, m.heads[0].w, m.W, m.b);
    worst = std::max(worst, (fc.probs - ref).cwiseAbs().maxCoeff());
  }
  c.finish(worst < 1e-12, "100 bags, max_abs_diff=" + fmt(worst));
}

// 3. Restarted k-means reaches the exhaustive-enumeration optimum on
// problems small enough to brute-force.
void criterion_kmeans_exhaustive() {
  Criterion c(3, "k-means matches exhaustive partition search");
  Rng rng(31337);
  KmeansOptions opt;
  opt.restarts = 100;
  int solved = 0;
  double worst_gap = 0;
  for (int t = 0; t < 50; ++t) {
    int n = 4 + static_cast<int>(rng.below(5));
    int k = 2 + static_cast<int>(rng.below(2));
    int d = 1 + static_cast<int>(rng.below(2));
    Matrix pts(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) pts(i, j) = rng.normal() * 3.0;
    ClusterModel cm = kmeans_global(pts, k, 1000 + t, opt);
    double best = oracles::brute_kmeans_sse(pts, k);
    double gap = std::abs(cm.inertia - best) / (1.0 + best);
    worst_gap = std::max(worst_gap, gap);
    if (gap <= 1e-8) ++solved;
  }
  c.finish(solved == 50, "50 problems, solved=" + std::to_string(solved) +
                             ", worst_gap=" + fmt(worst_gap));
}

// 4. The l1 solver is checked three ways: the orthogonal closed form, an
// independently written coordinate-descent solver, and its own momentum
// variant; plain descent must also be monotone with first-order optimality
// at the end.
void criterion_lasso_routes() {
  Criterion c(4, "l1 solver agrees with closed form and coordinate descent");
  bool ok = true;
  std::string detail;

  int M = 10;
  Matrix Z = std::sqrt(static_cast<double>(M)) * Matrix::Identity(M, M);
  Rng rng(404);
  Vector y(M);
  for (int i = 0; i < M; ++i) y(i) = rng.normal() * 2.0;
  double gamma = 0.3;
  LassoSolution sol = lasso_ista(Z, y, gamma);
  double worst = 0;
  for (int i = 0; i < M; ++i) {
    double v = y(i) / std::sqrt(static_cast<double>(M));
    double want = (std::abs(v) <= gamma) ? 0.0 : (v > 0 ? v - gamma : v + gamma);
    worst = std::max(worst, std::abs(sol.beta(i) - want));
  }
  if (worst >= 1e-8) {
    ok = false;
    detail = "closed_form_diff=" + fmt(worst);
  }

  double worst_pair = 0, worst_kkt = 0;
  for (int t = 0; t < 20 && ok; ++t) {
    int K = 3 + static_cast<int>(rng.below(8));
    int s = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
    int m = K + 2 + static_cast<int>(rng.below(20));
    double sigma = 0.05 * static_cast<double>(rng.below(3));
    RecoveryProblem p = gen_linear_problem(K, s, m, sigma, 1.0, 2000 + t);
    double g = 0.02 + 0.01 * static_cast<double>(t % 4);
    LassoOptions tight;
    tight.tol = 1e-14;
    tight.max_iter = 200000;
    LassoOptions accel = tight;
    accel.accelerated = true;
    LassoSolution a = lasso_ista(p.Z, p.y, g, tight);
    LassoSolution b = lasso_ista(p.Z, p.y, g, accel);
    Vector cd = oracles::lasso_cd(p.Z, p.y, g);
    worst_pair = std::max(worst_pair, (a.beta - b.beta).cwiseAbs().maxCoeff());
    worst_pair = std::max(worst_pair, (a.beta - cd).cwiseAbs().maxCoeff());
    worst_kkt = std::max(worst_kkt, kkt_residual(p.Z, p.y, g, a.beta));
  }
  if (ok && (worst_pair >= 1e-5 || worst_kkt >= 1e-6)) {
    ok = false;
    detail = "route_diff=" + fmt(worst_pair) + ", kkt=" + fmt(worst_kkt);
  }

  if (ok) {
    RecoveryProblem p = gen_linear_problem(8, 2, 24, 0.1, 1.0, 13);
    std::vector<double> trace;
    LassoOptions opts;
    opts.objective_trace = &trace;
    lasso_ista(p.Z, p.y, 0.03, opts);
    for (std::size_t i = 1; i < trace.size(); ++i)
      if (trace[i] > trace[i - 1] + 1e-12) {
        ok = false;
        detail = "objective rose at iteration " + std::to_string(i);
        break;
      }
  }
  if (ok)
    detail = "20 problems, route_diff=" + fmt(worst_pair) + ", kkt=" + fmt(worst_kkt);
  c.finish(ok, detail);
}

// 5. Support recovery turns on as the sample count grows: near-zero success
// on starved designs, reliable recovery on the stock grid, error no worse
// than the sigma*sqrt(s log K / M) scaling extrapolated from smaller M, and
// a sample-complexity threshold that grows linearly in s log K.
void criterion_phase_transition() {
  Criterion c(5, "sparse recovery phase transition and sample-complexity scaling");
  bool ok = true;
  std::string detail;

  PhaseOptions opts;
  PhaseTable t =
      phase_transition(64, 4, {8, 16, 32, 64, 134, 192}, 50, 0.05, derive_seed(0, "recover"), opts);
  double succ_low = t.rows.front().success_rate;
  double succ_high = 0;
  for (const auto& r : t.rows)
    if (r.M == 134) succ_high = r.success_rate;
  if (!(succ_low <= 0.5 && succ_high >= 0.9)) {
    ok = false;
    detail = "success(8)=" + fmt(succ_low) + ", success(134)=" + fmt(succ_high);
  }

  // error-bound constant: fit on converged rows below the largest M, then
  // demand the largest M stays under it
  if (ok) {
    auto ratio = [](const PhaseRow& r) {
      return r.mean_l2_error /
             (r.sigma * std::sqrt(static_cast<double>(r.s) * std::log(static_cast<double>(r.K)) /
                                  static_cast<double>(r.M)));
    };
    double c_fit = 0;
    for (std::size_t i = 0; i + 1 < t.rows.size(); ++i)
      if (t.rows[i].success_rate >= 0.7) c_fit = std::max(c_fit, ratio(t.rows[i]));
    double last = ratio(t.rows.back());
    if (!(c_fit > 0 && last <= c_fit)) {
      ok = false;
      detail = "error ratio " + fmt(last) + " above fitted constant " + fmt(c_fit);
    }
  }

  // minimal M reaching 90% success, regressed on s log K
  double slope = 0, r2 = 0;
  if (ok) {
    std::vector<int> grid;
    for (int m = 5; m <= 250; m += 5) grid.push_back(m);
    std::vector<double> xs, ys;
    for (int s : {2, 4})
      for (int K : {32, 64, 128}) {
        PhaseTable pt = phase_transition(K, s, grid, 50, 0.05, derive_seed(0, "recover"), opts);
        for (const auto& r : pt.rows)
          if (r.success_rate >= 0.9) {
            xs.push_back(static_cast<double>(s) * std::log(static_cast<double>(K)));
            ys.push_back(static_cast<double>(r.M));
            break;
          }
      }
    if (xs.size() != 6) {
      ok = false;
      detail = "threshold not reached on " + std::to_string(6 - xs.size()) + " grids";
    } else {
      double n = 6, sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (int i = 0; i < 6; ++i) {
        sx += xs[static_cast<std::size_t>(i)];
        sy += ys[static_cast<std::size_t>(i)];
        sxx += xs[static_cast<std::size_t>(i)] * xs[static_cast<std::size_t>(i)];
        sxy += xs[static_cast<std::size_t>(i)] * ys[static_cast<std::size_t>(i)];
      }
      slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      double icpt = (sy - slope * sx) / n;
      double sse = 0, sst = 0, ym = sy / n;
      for (int i = 0; i < 6; ++i) {
        double e = ys[static_cast<std::size_t>(i)] -
                   (icpt + slope * xs[static_cast<std::size_t>(i)]);
        sse += e * e;
        sst += (ys[static_cast<std::size_t>(i)] - ym) * (ys[static_cast<std::size_t>(i)] - ym);
      }
      r2 = 1.0 - sse / sst;
      if (!(slope > 0 && r2 > 0.8)) {
        ok = false;
        detail = "slope=" + fmt(slope) + ", R2=" + fmt(r2);
      }
    }
  }
  if (ok)
    detail = "success(8)=" + fmt(succ_low) + ", success(134)=" + fmt(succ_high) +
             ", slope=" + fmt(slope) + ", R2=" + fmt(r2);
  c.finish(ok, detail);
}

// 6. On the stock synthetic benchmark cross-validated sparse training keeps
// its discrimination, needs no more clusters than the near-unregularized
// run, and the full-data run recovers exactly the informative clusters while
// zeroing out background ones.
void criterion_benchmark_cv() {
  Criterion c(6, "sparse aggregation keeps accuracy while pruning clusters");
  const Benchmark& bm = benchmark();
  bool ok = true;
  std::string detail;

  TrainConfig sparse = bm.cfg;
  sparse.gamma = 0.1;
  CvReport rs = cross_validate(bm.sr.dataset, bm.folds, sparse, 8, 0, bm.opts);
  TrainConfig loose = bm.cfg;
  loose.gamma = 0.0001;
  CvReport rl = cross_validate(bm.sr.dataset, bm.folds, loose, 8, 0, bm.opts);

  double auc = rs.mean.auc.value_or(0.0);
  double l0s = 0, l0l = 0;
  for (int f = 0; f < 5; ++f) {
    l0s += beta_l0(rs.folds[static_cast<std::size_t>(f)].final_beta);
    l0l += beta_l0(rl.folds[static_cast<std::size_t>(f)].final_beta);
  }
  l0s /= 5;
  l0l /= 5;
  if (!(auc >= 0.95)) {
    ok = false;
    detail = "mean_auc=" + fmt(auc);
  } else if (!(l0s <= l0l)) {
    ok = false;
    detail = "support " + fmt(l0s) + " not smaller than " + fmt(l0l);
  }

  if (ok) {
    const FullClustering& fc = full_clustering();
    AssignedBags bags;
    for (std::size_t i = 0; i < bm.sr.dataset.bags.size(); ++i)
      bags.push_back({&bm.sr.dataset.bags[i], fc.assigns[i]});
    CsmilModel init = init_model({8, bm.sr.dataset.dim, 64, false}, derive_seed(0, "init"));
    TrainConfig cfg = sparse;
    cfg.seed = derive_seed(0, "train");
    TrainResult tr = train(bags, {}, cfg, init);
    SelectionReport sel =
        identify_selected_clusters(tr.model.beta, bm.sr.dataset, fc.assigns, bm.sr.truth);
    bool zeroed_background = false;
    for (int k = 0; k < 8; ++k)
      if (sel.informative_fraction[static_cast<std::size_t>(k)] < 0.5 &&
          tr.model.beta(k) == 0.0)
        zeroed_background = true;
    if (!(sel.recall == 1.0)) {
      ok = false;
      detail = "full-data recall=" + fmt(sel.recall);
    } else if (!zeroed_background) {
      ok = false;
      detail = "no background cluster was zeroed";
    } else {
      detail = "mean_auc=" + fmt(auc) + ", support=" + fmt(l0s) + " vs " + fmt(l0l) +
               ", recall=1, background zeroed";
    }
  }
  c.finish(ok, detail);
}

// 7. Leave-one-cluster-out: removing a cluster that carries the informative
// components costs accuracy; removing a pure background cluster does not.
void criterion_ablation() {
  Criterion c(7, "informative clusters are the ones the ablation punishes");
  const Benchmark& bm = benchmark();
  const FullClustering& fc = full_clustering();
  AblationReport ab = ablate_clusters(bm.sr.dataset, bm.folds, bm.cfg, 8, 0, bm.opts);

  bool ok = true;
  std::string detail;
  double worst_inf = -1e9, worst_bg = 1e9;
  int n_inf = 0, n_bg = 0;
  for (int k = 0; k < 8; ++k) {
    double frac = fc.informative_fraction[static_cast<std::size_t>(k)];
    double delta = ab.delta_acc[static_cast<std::size_t>(k)];
    if (frac >= 0.5) {
      ++n_inf;
      worst_inf = std::max(worst_inf, delta);  // should be very negative
      if (delta > -0.10) {
        ok = false;
        detail = "informative cluster " + std::to_string(k) + " delta=" + fmt(delta);
      }
    } else if (frac == 0.0) {
      ++n_bg;
      worst_bg = std::min(worst_bg, delta);
      if (delta < -0.02) {
        ok = false;
        detail = "background cluster " + std::to_string(k) + " delta=" + fmt(delta);
      }
    }
  }
  if (n_inf == 0 || n_bg == 0) {
    ok = false;
    detail = "degenerate clustering: inf=" + std::to_string(n_inf) +
             ", bg=" + std::to_string(n_bg);
  }
  if (ok)
    detail = std::to_string(n_inf) + " informative (worst delta " + fmt(worst_inf) + "), " +
             std::to_string(n_bg) + " background (worst delta " + fmt(worst_bg) + ")";
  c.finish(ok, detail);
}

// 8. Trapezoidal AUC equals brute-force pair counting, ties included.
void criterion_auc_oracle() {
  Criterion c(8, "ranking metric equals pair-counting oracle");
  MetricReport hand = compute_metrics({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
  bool ok = hand.auc.has_value() && std::abs(*hand.auc - 0.75) < 1e-12;
  double worst = ok ? 0.0 : 1.0;
  Rng rng(808);
  for (int t = 0; t < 30 && ok; ++t) {
    int n = 10 + static_cast<int>(rng.below(190));
    std::vector<double> scores;
    std::vector<int> labels;
    bool seen[2] = {false, false};
    for (int i = 0; i < n; ++i) {
      scores.push_back(static_cast<double>(rng.below(25)) / 25.0);
      int y = static_cast<int>(rng.below(2));
      labels.push_back(y);
      seen[y] = true;
    }
    if (!seen[0] || !seen[1]) continue;
    MetricReport r = compute_metrics(scores, labels);
    worst = std::max(worst, std::abs(*r.auc - oracles::auc_pairs(scores, labels)));
  }
  ok = ok && worst < 1e-12;
  c.finish(ok, "30 score sets with ties, max_abs_diff=" + fmt(worst));
}

// 9. Every subcommand writes byte-identical artifacts when rerun, including
// under --jobs 4.
void criterion_cli_determinism() {
  Criterion c(9, "command-line artifacts are byte-reproducible");
  fs::path root = work_root();
  std::string synth_sets =
      " --set synth.bags_per_class=6 --set synth.d=6 --set synth.k_latent=3"
      " --set synth.s_informative=1 --set synth.n_min=4 --set synth.n_max=6";

  bool ok = true;
  std::string detail = "9 subcommands x 3 runs";
  fs::path ds = root / "det_synth_a";  // first step writes the dataset here

  struct Step {
    std::string name;
    std::string args;  // without --out
  };
  std::vector<Step> steps;
  steps.push_back({"synth", "synth --seed 3" + synth_sets});
  std::string man = " --manifest " + (ds / "manifest.json").string();
  steps.push_back({"cluster", "cluster --seed 3 --set cluster.K=3" + man});
  steps.push_back({"train", "train --seed 3 --set cluster.K=3 --set train.epochs=15" + man});
  steps.push_back({"eval", ""});  // filled in after train runs
  steps.push_back(
      {"ablate", "ablate --seed 7 --set cluster.K=2 --set train.epochs=8 --set folds.n=3" + man});
  steps.push_back({"sweep-gamma",
                   "sweep-gamma --seed 5 --set cluster.K=3 --set train.epochs=8 --set folds.n=3"
                   " --set sweep.gammas=[0.001,0.05]" +
                       man});
  steps.push_back({"sweep-k",
                   "sweep-k --seed 5 --set train.epochs=8 --set folds.n=3"
                   " --set sweep.ks=[2,3]" +
                       man});
  steps.push_back({"recover",
                   "recover --seed 2 --set recover.K=8 --set recover.s=2"
                   " --set recover.m_grid=[8,16] --set recover.trials=4"
                   " --set recover.diag_s=[1]"});
  steps.push_back({"gradcheck", "gradcheck --seed 0 --set gradcheck.seeds=5"});

  for (auto& step : steps) {
    if (step.name == "eval") {
      fs::path tr = root / "det_train_a";
      step.args = "eval" + man + " --checkpoint " + (tr / "checkpoint.json").string() +
                  " --centers " + (tr / "centers.json").string();
    }
    fs::path a = root / ("det_" + step.name + "_a");
    fs::path b = root / ("det_" + step.name + "_b");
    fs::path j = root / ("det_" + step.name + "_j4");
    for (const auto& [dir, extra] :
         {std::pair<fs::path, std::string>{a, ""}, {b, ""}, {j, " --jobs 4"}}) {
      int rc = run_cli(step.args + extra + " --out " + dir.string(),
                       fs::path(dir.string() + ".log"));
      if (rc != 0) {
        ok = false;
        detail = step.name + " exited " + std::to_string(rc);
        break;
      }
    }
    if (!ok) break;
    if (step.name == "gradcheck") {
      // no artifacts here, the figure goes to stdout
      std::string la = slurp(fs::path(a.string() + ".log"));
      if (la.find("max_rel_error=") == std::string::npos) {
        ok = false;
        detail = "gradcheck printed no error figure";
      } else if (la != slurp(fs::path(b.string() + ".log")) ||
                 la != slurp(fs::path(j.string() + ".log"))) {
        ok = false;
        detail = "gradcheck stdout differs between runs";
      }
      continue;
    }
    std::string why;
    if (!dir_equal(a, b, &why) || !dir_equal(a, j, &why)) {
      ok = false;
      detail = step.name + ": " + why;
      break;
    }
  }
  c.finish(ok, detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite, binary under test: %s\n", CSMIL_BIN);
  criterion_gradients();
  criterion_attention_equivalence();
  criterion_kmeans_exhaustive();
  criterion_lasso_routes();
  criterion_phase_transition();
  criterion_benchmark_cv();
  criterion_ablation();
  criterion_auc_oracle();
  criterion_cli_determinism();
  std::printf("%d/9 criteria passed\n", 9 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
