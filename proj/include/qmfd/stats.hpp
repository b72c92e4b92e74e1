#pragma once

#include <vector>

namespace qmfd {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  int points = 0;
  bool defined = false;
};

// Least-squares line through (log x, log y) over points with y > floor.
LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, double floor = 0.0);

}  // namespace qmfd
