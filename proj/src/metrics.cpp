#include "xatk/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace xatk {

namespace {

// Single-window SSIM statistic over one channel's window at (w0, h0).
double window_ssim(const ImageTensor& x, const ImageTensor& y, int c, int w0,
                   int h0, int ww, int wh, const SsimConfig& cfg) {
  const double n = static_cast<double>(ww) * wh;
  double mx = 0.0, my = 0.0;
  for (int h = h0; h < h0 + wh; ++h) {
    for (int w = w0; w < w0 + ww; ++w) {
      mx += x.at(w, h, c);
      my += y.at(w, h, c);
    }
  }
  mx /= n;
  my /= n;

  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (int h = h0; h < h0 + wh; ++h) {
    for (int w = w0; w < w0 + ww; ++w) {
      const double dx = x.at(w, h, c) - mx;
      const double dy = y.at(w, h, c) - my;
      vx += dx * dx;
      vy += dy * dy;
      cov += dx * dy;
    }
  }
  vx /= n;
  vy /= n;
  cov /= n;

  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);
  return ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
         ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace

double ssim(const ImageTensor& x, const ImageTensor& y,
            const SsimConfig& cfg) {
  require_same_shape(x, y, "ssim");
  if (cfg.k1 <= 0.0 || cfg.k2 <= 0.0 || cfg.window < 1 || cfg.stride < 1) {
    throw ConfigError("ssim: k1, k2, window, stride must be positive");
  }

  // Global fallback when the window does not fit.
  const int ww = std::min(cfg.window, x.width());
  const int wh = std::min(cfg.window, x.height());

  double channel_sum = 0.0;
  for (int c = 0; c < x.channels(); ++c) {
    double window_sum = 0.0;
    std::size_t windows = 0;
    for (int h0 = 0; h0 + wh <= x.height(); h0 += cfg.stride) {
      for (int w0 = 0; w0 + ww <= x.width(); w0 += cfg.stride) {
        window_sum += window_ssim(x, y, c, w0, h0, ww, wh, cfg);
        ++windows;
      }
    }
    channel_sum += window_sum / static_cast<double>(windows);
  }
  return channel_sum / x.channels();
}

double explanation_change_pct(const AttributionMap& z,
                              const AttributionMap& zhat) {
  require_same_shape(z, zhat, "explanation_change_pct");
  const double mass = abs_sum(z);
  if (mass == 0.0) {
    throw DataError(
        "explanation_change_pct: original explanation has zero mass "
        "(undefined denominator)");
  }
  return 100.0 * abs_diff_sum(z, zhat) / mass;
}

double prediction_change(const ClassProbs& p, const ClassProbs& phat,
                         int y_star) {
  if (p.size() != phat.size()) {
    throw ShapeError("prediction_change: probability vectors differ in size");
  }
  if (y_star < 0 || y_star >= static_cast<int>(p.size())) {
    throw ConfigError("prediction_change: class index out of range");
  }
  return std::abs(p[y_star] - phat[y_star]);
}

}  // namespace xatk
