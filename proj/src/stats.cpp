#include "qmfd/stats.hpp"

#include <cmath>

namespace qmfd {

LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, double floor) {
  LineFit fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(y[i] > floor) || !(x[i] > 0)) continue;
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++fit.points;
  }
  if (fit.points < 2) return fit;
  double n = fit.points, den = n * sxx - sx * sx;
  if (den <= 0) return fit;
  fit.slope = (n * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.defined = true;
  return fit;
}

}  // namespace qmfd
