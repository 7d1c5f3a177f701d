#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qsvm {

// Empirical nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
inline double nearest_rank_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) throw std::invalid_argument("nearest_rank_percentile: empty sample");
  std::sort(values.begin(), values.end());
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
  if (rank < 1) rank = 1;
  if (rank > values.size()) rank = values.size();
  return values[rank - 1];
}

struct ScalingFitPoint {
  double x = 0.0;
  double mean = 0.0;
  double p159 = 0.0;
  double p841 = 0.0;
  std::size_t count = 0;
};

struct ScalingFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double exponent_stderr = 0.0;
  double fit_residual = 0.0;  // RMS residual of the log-log fit
  std::size_t n_runs = 0;
  std::size_t excluded = 0;
  std::vector<ScalingFitPoint> points;
};

// Ordinary least squares of ln(mean y per x) against ln x, with (15.9, 84.1)
// nearest-rank bands of the raw y values per grid point.
inline ScalingFit loglog_fit(const std::vector<std::pair<double, double>>& samples) {
  if (samples.empty()) throw std::invalid_argument("loglog_fit: no samples");
  std::map<double, std::vector<double>> groups;
  for (const auto& [x, y] : samples) {
    if (!(x > 0.0) || !(y > 0.0))
      throw std::invalid_argument("loglog_fit: values must be strictly positive");
    groups[x].push_back(y);
  }
  if (groups.size() < 2) throw std::invalid_argument("loglog_fit: need at least 2 distinct x");

  ScalingFit fit;
  fit.n_runs = samples.size();
  std::vector<double> lx, ly;
  for (auto& [x, ys] : groups) {
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= static_cast<double>(ys.size());
    fit.points.push_back({x, mean, nearest_rank_percentile(ys, 15.9),
                          nearest_rank_percentile(ys, 84.1), ys.size()});
    lx.push_back(std::log(x));
    ly.push_back(std::log(mean));
  }

  const std::size_t g = lx.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(g);
  my /= static_cast<double>(g);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("loglog_fit: degenerate x grid");
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;

  double ssr = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const double r = ly[i] - (fit.intercept + fit.exponent * lx[i]);
    ssr += r * r;
  }
  fit.fit_residual = std::sqrt(ssr / static_cast<double>(g));
  fit.exponent_stderr = g > 2 ? std::sqrt(ssr / static_cast<double>(g - 2) / sxx) : 0.0;
  return fit;
}

}  // namespace qsvm
