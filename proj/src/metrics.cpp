#include "csmil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csmil/common.hpp"

namespace csmil {

MetricReport compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.empty() || scores.size() != labels.size())
    throw ConfigError("metrics need matching, non-empty scores and labels");
  const std::size_t n = scores.size();
  MetricReport rep;
  long pos = 0, neg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(scores[i])) throw ConfigError("non-finite score");
    if (labels[i] != 0 && labels[i] != 1) throw ConfigError("labels must be 0 or 1");
    bool predicted = scores[i] > 0.5;
    if (labels[i] == 1) {
      ++pos;
      predicted ? ++rep.tp : ++rep.fn;
    } else {
      ++neg;
      predicted ? ++rep.fp : ++rep.tn;
    }
  }
  rep.accuracy = static_cast<double>(rep.tp + rep.tn) / static_cast<double>(n);
  long f1_den = 2 * rep.tp + rep.fp + rep.fn;
  rep.f1 = f1_den > 0 ? 2.0 * static_cast<double>(rep.tp) / static_cast<double>(f1_den) : 0.0;

  if (pos == 0 || neg == 0) return rep;  // AUC and ROC undefined

  // AUC by average ranks, equal to pair counting with ties worth 0.5.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) pos_rank_sum += avg_rank;
    i = j;
  }
  double p = static_cast<double>(pos), ng = static_cast<double>(neg);
  rep.auc = (pos_rank_sum - p * (p + 1) / 2.0) / (p * ng);

  // ROC over distinct thresholds from high to low, starting at (0,0).
  rep.roc.push_back({0.0, 0.0});
  long ctp = 0, cfp = 0;
  for (std::size_t t = n; t > 0;) {
    std::size_t j = t;
    double v = scores[order[t - 1]];
    while (t > 0 && scores[order[t - 1]] == v) {
      labels[order[t - 1]] == 1 ? ++ctp : ++cfp;
      --t;
    }
    (void)j;
    rep.roc.push_back({static_cast<double>(cfp) / ng, static_cast<double>(ctp) / p});
  }
  return rep;
}

std::string roc_csv(const MetricReport& report) {
  std::string out = "fpr,tpr\n";
  for (const auto& pt : report.roc) {
    out += fmt17(pt.fpr);
    out += ',';
    out += fmt17(pt.tpr);
    out += '\n';
  }
  return out;
}

}  // namespace csmil
