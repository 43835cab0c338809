#pragma once

#include <optional>
#include <string>
#include <vector>

namespace csmil {

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
};

// Threshold metrics are taken at 0.5 with positive class 1 (predict positive
// when score > 0.5). AUC uses pair counting with ties worth 0.5 and is left
// unset when only one class is present; the ROC is empty in that case too.
struct MetricReport {
  double accuracy = 0;
  double f1 = 0;
  std::optional<double> auc;
  std::vector<RocPoint> roc;
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

MetricReport compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels);

// CSV rows fpr,tpr.
std::string roc_csv(const MetricReport& report);

}  // namespace csmil
