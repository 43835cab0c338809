#pragma once

#include <string>
#include <vector>

namespace csmil {

struct SvgSeries {
  std::string label;
  std::vector<double> y;
};

// Minimal self-contained renderers so reports need no plotting dependency.
// Output is deterministic for identical input.
std::string svg_line_chart(const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<double>& x,
                           const std::vector<SvgSeries>& series, bool log_x = false);

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values);

}  // namespace csmil
