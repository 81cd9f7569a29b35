#pragma once

// SSIM, the temporal-pooled quality proxy (tpq, not VMAF) and Student-t
// confidence summaries.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "dia/error.hpp"
#include "dia/media.hpp"

namespace dia {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

namespace detail {

inline std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(size));
  const double centre = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    taps[i] = std::exp(-((i - centre) * (i - centre)) / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Valid-mode separable filtering of a w x h plane.
inline std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = w - k + 1, oh = h - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += taps[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += taps[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

/// Single-scale SSIM with a Gaussian window and no border padding, averaged
/// over valid window positions then over channels. Frames smaller than the
/// window use the largest odd window that fits.
inline double ssim_frame(const Frame& a, const Frame& b, const SsimParams& p = {}) {
  require(a.same_shape(b), ErrorKind::dimension, "SSIM needs frames of equal dimensions");
  int win = std::min({p.window, a.width, a.height});
  if (win % 2 == 0) --win;
  const auto taps = detail::gaussian_taps(win, p.sigma);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  const int w = a.width, h = a.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.pixels[i * a.channels + c];
      y[i] = b.pixels[i * b.channels + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, w, h, taps);
    const auto my = detail::filter_valid(y, w, h, taps);
    const auto mxx = detail::filter_valid(xx, w, h, taps);
    const auto myy = detail::filter_valid(yy, w, h, taps);
    const auto mxy = detail::filter_valid(xy, w, h, taps);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = mxx[i] - mx[i] * mx[i];
      const double vy = myy[i] - my[i] * my[i];
      const double cov = mxy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / a.channels;
}

/// mean SSIM_t - 0.5 * mean |SSIM_t - SSIM_{t-1}|. A labelled stand-in for
/// a temporal video quality model; it is not VMAF.
inline double tpq_from_per_frame(std::span<const double> per_frame) {
  require(!per_frame.empty(), ErrorKind::parameter, "tpq needs at least one frame");
  const double mean = std::accumulate(per_frame.begin(), per_frame.end(), 0.0) / static_cast<double>(per_frame.size());
  if (per_frame.size() < 2) return mean;
  double fluctuation = 0.0;
  for (std::size_t t = 1; t < per_frame.size(); ++t) fluctuation += std::abs(per_frame[t] - per_frame[t - 1]);
  return mean - 0.5 * fluctuation / static_cast<double>(per_frame.size() - 1);
}

struct QualityScore {
  double ssim = 0.0;
  double tpq = 0.0;
  std::vector<double> per_frame_ssim;
};

inline QualityScore ssim_video(const Video& a, const Video& b, const SsimParams& p = {}) {
  a.validate();
  b.validate();
  require(a.frame_count() == b.frame_count(), ErrorKind::dimension, "SSIM needs videos with equal frame counts");
  QualityScore q;
  for (int t = 0; t < a.frame_count(); ++t) q.per_frame_ssim.push_back(ssim_frame(a.frames[t], b.frames[t], p));
  q.ssim = std::accumulate(q.per_frame_ssim.begin(), q.per_frame_ssim.end(), 0.0) /
           static_cast<double>(q.per_frame_ssim.size());
  q.tpq = tpq_from_per_frame(q.per_frame_ssim);
  return q;
}

inline double tpq(const Video& a, const Video& b) { return ssim_video(a, b).tpq; }

// ---------------------------------------------------------------------------

struct CiSummary {
  double mean = 0.0;
  std::optional<double> ci95_half_width;
  std::size_t n = 0;
};

/// Two-sided 97.5% Student-t quantile.
inline double student_t_975(std::size_t dof) {
  boost::math::students_t_distribution<double> dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.975);
}

/// Mean with a 95% Student-t half-width from the sample standard deviation;
/// the half-width is absent below two values.
inline CiSummary summarize(std::span<const double> values) {
  require(!values.empty(), ErrorKind::parameter, "cannot summarize an empty list");
  CiSummary s;
  s.n = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  s.ci95_half_width = student_t_975(s.n - 1) * sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

}  // namespace dia
