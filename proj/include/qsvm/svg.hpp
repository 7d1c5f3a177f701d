#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "qsvm/fit.hpp"
#include "qsvm/io.hpp"

namespace qsvm {

// Minimal dependency-free log-log scatter plot with percentile bars and the
// fitted power law. Plots are a convenience; the CSV files are the contract.
inline std::string loglog_plot_svg(const ScalingFit& fit, const std::string& title,
                                   const std::string& x_label, const std::string& y_label) {
  const int width = 640, height = 480;
  const int ml = 70, mr = 20, mt = 40, mb = 50;

  double lx_min = 1e300, lx_max = -1e300, ly_min = 1e300, ly_max = -1e300;
  for (const auto& p : fit.points) {
    lx_min = std::min(lx_min, std::log10(p.x));
    lx_max = std::max(lx_max, std::log10(p.x));
    for (double v : {p.mean, p.p159 > 0 ? p.p159 : p.mean, p.p841 > 0 ? p.p841 : p.mean}) {
      ly_min = std::min(ly_min, std::log10(v));
      ly_max = std::max(ly_max, std::log10(v));
    }
  }
  if (lx_max - lx_min < 1e-12) lx_max = lx_min + 1.0;
  if (ly_max - ly_min < 1e-12) ly_max = ly_min + 1.0;
  const double pad = 0.05 * (ly_max - ly_min);
  ly_min -= pad;
  ly_max += pad;

  auto px = [&](double lx) {
    return ml + (lx - lx_min) / (lx_max - lx_min) * (width - ml - mr);
  };
  auto py = [&](double ly) {
    return height - mb - (ly - ly_min) / (ly_max - ly_min) * (height - mt - mb);
  };
  auto num = [](double v) {
    char buf[32];
    snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
       "\" height=\"" + std::to_string(height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + std::to_string(width / 2) + "\" y=\"24\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"15\">" + title + "</text>\n";

  // axes
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(height - mb) + "\" x2=\"" + num(width - mr) +
       "\" y2=\"" + num(height - mb) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) + "\" y2=\"" +
       num(height - mb) + "\" stroke=\"black\"/>\n";

  // decade ticks
  for (int e = static_cast<int>(std::ceil(lx_min)); e <= static_cast<int>(std::floor(lx_max)); ++e) {
    s += "<line x1=\"" + num(px(e)) + "\" y1=\"" + num(height - mb) + "\" x2=\"" + num(px(e)) +
         "\" y2=\"" + num(height - mb + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(px(e)) + "\" y=\"" + num(height - mb + 20) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">1e" +
         std::to_string(e) + "</text>\n";
  }
  for (int e = static_cast<int>(std::ceil(ly_min)); e <= static_cast<int>(std::floor(ly_max)); ++e) {
    s += "<line x1=\"" + num(ml - 5) + "\" y1=\"" + num(py(e)) + "\" x2=\"" + num(ml) +
         "\" y2=\"" + num(py(e)) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(py(e) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" +
         std::to_string(e) + "</text>\n";
  }
  s += "<text x=\"" + std::to_string(width / 2) + "\" y=\"" + std::to_string(height - 12) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + x_label +
       "</text>\n";
  s += "<text x=\"16\" y=\"" + std::to_string(height / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 " +
       std::to_string(height / 2) + ")\">" + y_label + "</text>\n";

  // fit line across the x range
  {
    const double lx0 = lx_min, lx1 = lx_max;
    const double ln10 = 2.302585092994046;
    const double ly0 = (fit.intercept + fit.exponent * lx0 * ln10) / ln10;
    const double ly1 = (fit.intercept + fit.exponent * lx1 * ln10) / ln10;
    s += "<line x1=\"" + num(px(lx0)) + "\" y1=\"" + num(py(ly0)) + "\" x2=\"" + num(px(lx1)) +
         "\" y2=\"" + num(py(ly1)) + "\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
    s += "<text x=\"" + num(width - mr - 4) + "\" y=\"" + num(mt + 14) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#d62728\">slope " +
         num(fit.exponent) + "</text>\n";
  }

  // percentile bars and means
  for (const auto& p : fit.points) {
    const double x = px(std::log10(p.x));
    if (p.p159 > 0.0 && p.p841 > 0.0) {
      s += "<line x1=\"" + num(x) + "\" y1=\"" + num(py(std::log10(p.p159))) + "\" x2=\"" +
           num(x) + "\" y2=\"" + num(py(std::log10(p.p841))) +
           "\" stroke=\"#1f77b4\" stroke-width=\"1\"/>\n";
    }
    s += "<circle cx=\"" + num(x) + "\" cy=\"" + num(py(std::log10(p.mean))) +
         "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace qsvm
