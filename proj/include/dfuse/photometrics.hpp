#pragma once

<n></n>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dfuse/core.hpp"
#include "dfuse/geometry.hpp"

namespace dfuse {

/// H x W x C image with values in [0, 1], C = 1 or 3. Channel-interleaved
/// storage: values[(y*W + x)*C + c].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> values;

  Image() = default;
  Image(int height_, int width_, int channels_, double fill = 0.0)
      : height(height_), width(width_), channels(channels_) {
    if (height <= 0 || width <= 0 || (channels != 1 && channels != 3)) {
      throw std::invalid_argument("Image: bad dimensions (C must be 1 or 3)");
    }
    values.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  double& at(int y, int x, int c) {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const double& at(int y, int x, int c) const {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  void validate() const {
    for (double v : values) {
      if (!(std::isfinite(v) && v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("Image: values must be finite in [0,1]");
      }
    }
  }
};

namespace detail {

// reflect-101 index: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
inline int reflect(int i, int n) {
  if (n == 1) return 0;
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}

}  // namespace detail

struct WarpedImage {
  Image image;
  Grid<std::uint8_t> mask;
};

/// Backward-warps a source image into the target view: each valid target
/// pixel is lifted with the target depth, moved by pose_t_to_s, projected
/// into the source image and bilinearly sampled. Pixels whose sample falls
/// outside the source image (or behind the camera, or without valid target
/// depth) come back unmasked with value 0.
inline WarpedImage warp_image(const Image& source, const DepthField& target_depth,
                              const RigidTransform& pose_t_to_s,
                              const Intrinsics& k) {
  if (source.height != target_depth.height() ||
      source.width != target_depth.width()) {
    throw std::invalid_argument("warp_image: dimension mismatch");
  }
  WarpedImage out{Image(source.height, source.width, source.channels, 0.0),
                  Grid<std::uint8_t>(source.height, source.width, 0)};
  for (int y = 0; y < source.height; ++y) {
    for (int x = 0; x < source.width; ++x) {
      if (!target_depth.valid(y, x)) continue;
      const Eigen::Vector3d p_t = unproject(
          {static_cast<double>(x), static_cast<double>(y)},
          target_depth.values.at(y, x), k);
      const Eigen::Vector3d p_s = pose_t_to_s.apply(p_t);
      if (!(p_s.z() > 0.0)) continue;
      const Eigen::Vector2d uv = project(p_s, k).pixel;
      const double u = uv.x();
      const double v = uv.y();
      if (!(u >= 0.0 && v >= 0.0 && u <= source.width - 1 &&
            v <= source.height - 1)) {
        continue;
      }
      int x0 = std::min(static_cast<int>(std::floor(u)),
                        std::max(source.width - 2, 0));
      int y0 = std::min(static_cast<int>(std::floor(v)),
                        std::max(source.height - 2, 0));
      const int x1 = std::min(x0 + 1, source.width - 1);
      const int y1 = std::min(y0 + 1, source.height - 1);
      const double ax = u - x0;
      const double ay = v - y0;
      for (int c = 0; c < source.channels; ++c) {
        const double top =
            (1.0 - ax) * source.at(y0, x0, c) + ax * source.at(y0, x1, c);
        const double bot =
            (1.0 - ax) * source.at(y1, x0, c) + ax * source.at(y1, x1, c);
        out.image.at(y, x, c) = (1.0 - ay) * top + ay * bot;
      }
      out.mask.at(y, x) = 1;
    }
  }
  return out;
}

/// Per-pixel photometric residual r = (alpha/2)(1 - SSIM) + (1-alpha)*L1.
/// SSIM uses 3x3 box windows with reflect padding and C1 = 0.01^2,
/// C2 = 0.03^2; both SSIM and L1 are averaged over channels.
inline Grid<double> photometric_residual(const Image& target,
                                         const Image& warped, double alpha) {
  if (target.height != warped.height || target.width != warped.width ||
      target.channels != warped.channels) {
    throw std::invalid_argument("photometric_residual: dimension mismatch");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("photometric_residual: alpha must be in [0,1]");
  }
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const int h = target.height;
  const int w = target.width;
  const int nc = target.channels;
  Grid<double> out(h, w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double ssim_sum = 0.0;
      double l1_sum = 0.0;
      for (int c = 0; c < nc; ++c) {
        double mt = 0.0, mw = 0.0, tt = 0.0, ww = 0.0, tw = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = detail::reflect(y + dy, h);
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = detail::reflect(x + dx, w);
            const double a = target.at(yy, xx, c);
            const double b = warped.at(yy, xx, c);
            mt += a;
            mw += b;
            tt += a * a;
            ww += b * b;
            tw += a * b;
          }
        }
        mt /= 9.0;
        mw /= 9.0;
        const double var_t = tt / 9.0 - mt * mt;
        const double var_w = ww / 9.0 - mw * mw;
        const double cov = tw / 9.0 - mt * mw;
        const double ssim = ((2.0 * mt * mw + kC1) * (2.0 * cov + kC2)) /
                            ((mt * mt + mw * mw + kC1) * (var_t + var_w + kC2));
        ssim_sum += ssim;
        l1_sum += std::abs(target.at(y, x, c) - warped.at(y, x, c));
      }
      const double ssim = ssim_sum / nc;
      const double l1 = l1_sum / nc;
      out.at(y, x) = 0.5 * alpha * (1.0 - ssim) + (1.0 - alpha) * l1;
    }
  }
  return out;
}

/// Per-pixel minimum across residual maps (one map per source view).
inline Grid<double> min_reprojection(std::span<const Grid<double>> maps) {
  if (maps.empty()) {
    throw std::invalid_argument("min_reprojection: empty residual list");
  }
  Grid<double> out = maps[0];
  for (std::size_t i = 1; i < maps.size(); ++i) {
    if (!maps[i].same_shape(out)) {
      throw std::invalid_argument("min_reprojection: dimension mismatch");
    }
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] = std::min(out[j], maps[i][j]);
    }
  }
  return out;
}

/// Edge-aware smoothness of the mean-normalized depth:
/// mean |dx d^| e^{-|dx I|} + mean |dy d^| e^{-|dy I|}, forward differences,
/// image gradients averaged over channels. Terms are evaluated where both
/// pixels of the difference are valid.
inline double smoothness_loss(const DepthField& depth, const Image& image) {
  if (depth.height() != image.height || depth.width() != image.width) {
    throw std::invalid_argument("smoothness_loss: dimension mismatch");
  }
  double depth_sum = 0.0;
  std::size_t valid = 0;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (depth.valid(y, x)) {
        depth_sum += depth.values.at(y, x);
        ++valid;
      }
    }
  }
  if (valid == 0) {
    throw std::invalid_argument("smoothness_loss: all depth pixels invalid");
  }
  const double mean_depth = depth_sum / static_cast<double>(valid);

  const auto image_grad = [&](int y0, int x0, int y1, int x1) {
    double g = 0.0;
    for (int c = 0; c < image.channels; ++c) {
      g += std::abs(image.at(y1, x1, c) - image.at(y0, x0, c));
    }
    return g / image.channels;
  };

  double sum_x = 0.0;
  std::size_t n_x = 0;
  double sum_y = 0.0;
  std::size_t n_y = 0;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!depth.valid(y, x)) continue;
      if (x + 1 < depth.width() && depth.valid(y, x + 1)) {
        const double dd = std::abs(depth.values.at(y, x + 1) -
                                   depth.values.at(y, x)) /
                          mean_depth;
        sum_x += dd * std::exp(-image_grad(y, x, y, x + 1));
        ++n_x;
      }
      if (y + 1 < depth.height() && depth.valid(y + 1, x)) {
        const double dd = std::abs(depth.values.at(y + 1, x) -
                                   depth.values.at(y, x)) /
                          mean_depth;
        sum_y += dd * std::exp(-image_grad(y, x, y + 1, x));
        ++n_y;
      }
    }
  }
  double loss = 0.0;
  if (n_x > 0) loss += sum_x / static_cast<double>(n_x);
  if (n_y > 0) loss += sum_y / static_cast<double>(n_y);
  return loss;
}

/// Multi-scale total: (1/s) * sum over scales of
/// (mean photometric residual + lambda * smoothness).
inline double mono_loss(std::span<const Grid<double>> photometric,
                        std::span<const DepthField> depths,
                        std::span<const Image> images, double lambda) {
  if (photometric.empty() || photometric.size() != depths.size() ||
      photometric.size() != images.size()) {
    throw std::invalid_argument("mono_loss: per-scale list length mismatch");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < photometric.size(); ++s) {
    const auto& map = photometric[s];
    if (map.empty()) {
      throw std::invalid_argument("mono_loss: empty residual map");
    }
    const double mean_residual =
        std::accumulate(map.begin(), map.end(), 0.0) /
        static_cast<double>(map.size());
    total += mean_residual + lambda * smoothness_loss(depths[s], images[s]);
  }
  return total / static_cast<double>(photometric.size());
}

/// Uncertainty-weighted negative log likelihood:
/// mean over evaluated pixels of residual/U + log U. When mask is given only
/// masked pixels are evaluated.
inline double nll_loss(const Grid<double>& residual,
                       const Grid<double>& uncertainty,
                       const Grid<std::uint8_t>* mask = nullptr) {
  if (!residual.same_shape(uncertainty) ||
      (mask != nullptr && !residual.same_shape(*mask))) {
    throw std::invalid_argument("nll_loss: dimension mismatch");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    if (mask != nullptr && !(*mask)[i]) continue;
    const double u = uncertainty[i];
    if (!(u > 0.0)) {
      throw std::invalid_argument("nll_loss: non-positive uncertainty");
    }
    sum += residual[i] / u + std::log(u);
    ++n;
  }
  if (n == 0) {
    throw std::invalid_argument("nll_loss: no pixels to evaluate");
  }
  return sum / static_cast<double>(n);
}

struct DepthMetricsRecord {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

}  // namespace detail

/// Standard depth error/accuracy metrics over pixels valid in both fields
/// with gt <= cap. Predictions are clamped to [1e-3, cap]; optional median
/// scaling aligns median(pred) to median(gt) before clamping. Accuracy
/// thresholds use strict inequality max(pred/gt, gt/pred) < 1.25^k.
inline DepthMetricsRecord depth_metrics(const DepthField& pred,
                                        const DepthField& gt, double cap,
                                        bool median_scaling = false) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw std::invalid_argument("depth_metrics: dimension mismatch");
  }
  std::vector<double> ps;
  std::vector<double> gs;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!pred.valid(y, x) || !gt.valid(y, x)) continue;
      const double g = gt.values.at(y, x);
      if (g > cap) continue;
      ps.push_back(pred.values.at(y, x));
      gs.push_back(g);
    }
  }
  if (ps.empty()) {
    throw std::invalid_argument("depth_metrics: no overlapping valid pixels");
  }
  if (median_scaling) {
    const double scale = detail::median(gs) / detail::median(ps);
    for (double& p : ps) p *= scale;
  }
  DepthMetricsRecord rec;
  const double n = static_cast<double>(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double p = std::clamp(ps[i], 1e-3, cap);
    const double g = gs[i];
    const double err = p - g;
    rec.abs_rel += std::abs(err) / g;
    rec.sq_rel += err * err / g;
    rec.rmse += err * err;
    const double dlog = std::log(p) - std::log(g);
    rec.rmse_log += dlog * dlog;
    const double ratio = std::max(p / g, g / p);
    rec.d1 += (ratio < 1.25) ? 1.0 : 0.0;
    rec.d2 += (ratio < 1.25 * 1.25) ? 1.0 : 0.0;
    rec.d3 += (ratio < 1.25 * 1.25 * 1.25) ? 1.0 : 0.0;
  }
  rec.abs_rel /= n;
  rec.sq_rel /= n;
  rec.rmse = std::sqrt(rec.rmse / n);
  rec.rmse_log = std::sqrt(rec.rmse_log / n);
  rec.d1 /= n;
  rec.d2 /= n;
  rec.d3 /= n;
  return rec;
}

enum class ErrorAggregate {
  kMean,  // mean of per-pixel error values
  kRmse,  // sqrt of mean of squared per-pixel error values
};

struct SparsificationResult {
  std::vector<double> fractions;
  std::vector<double> sparsification;
  std::vector<double> oracle;
  std::vector<double> random;
  double ause = 0.0;
};

namespace detail {

inline double aggregate(std::span<const double> values, ErrorAggregate agg) {
  double sum = 0.0;
  for (double v : values) {
    sum += (agg == ErrorAggregate::kRmse) ? v * v : v;
  }
  const double mean = sum / static_cast<double>(values.size());
  return (agg == ErrorAggregate::kRmse) ? std::sqrt(mean) : mean;
}

// Descending-key order with ties broken by ascending index.
inline std::vector<std::size_t> descending_order(std::span<const double> key) {
  std::vector<std::size_t> order(key.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return order;
}

inline std::vector<double> removal_curve(std::span<const double> errors,
                                         const std::vector<std::size_t>& order,
                                         const std::vector<double>& fractions,
                                         ErrorAggregate agg) {
  // errors re-ordered so that prefix removal = suffix aggregation
  std::vector<double> sorted(errors.size());
  for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = errors[order[i]];
  const auto n = static_cast<double>(errors.size());
  std::vector<double> curve;
  curve.reserve(fractions.size());
  for (double f : fractions) {
    const auto removed = static_cast<std::size_t>(std::llround(f * n));
    const std::size_t kept = errors.size() - std::min(removed, errors.size() - 1);
    curve.push_back(aggregate(
        std::span<const double>(sorted.data() + (errors.size() - kept), kept),
        agg));
  }
  return curve;
}

}  // namespace detail

/// Sparsification analysis: repeatedly removes the highest-uncertainty
/// pixels (step fraction at a time, up to 98%) and evaluates the error
/// metric on the remainder. The oracle curve removes by descending true
/// error instead; the random curve is the constant full-set metric. AUSE is
/// the trapezoidal area between the sparsification and oracle curves.
inline SparsificationResult sparsification(std::span<const double> errors,
                                           std::span<const double> uncertainty,
                                           ErrorAggregate agg = ErrorAggregate::kMean,
                                           double step = 0.02) {
  if (errors.size() != uncertainty.size()) {
    throw std::invalid_argument("sparsification: length mismatch");
  }
  if (errors.size() < 50) {
    throw std::invalid_argument("sparsification: need at least 50 pixels");
  }
  if (!(step > 0.0 && step < 1.0)) {
    throw std::invalid_argument("sparsification: step must be in (0,1)");
  }
  SparsificationResult res;
  for (double f = 0.0; f <= 0.98 + 1e-12; f += step) {
    res.fractions.push_back(f);
  }
  const auto unc_order = detail::descending_order(uncertainty);
  const auto err_order = detail::descending_order(errors);
  res.sparsification =
      detail::removal_curve(errors, unc_order, res.fractions, agg);
  res.oracle = detail::removal_curve(errors, err_order, res.fractions, agg);
  res.random.assign(res.fractions.size(), detail::aggregate(errors, agg));
  double area = 0.0;
  for (std::size_t i = 1; i < res.fractions.size(); ++i) {
    const double d0 = res.sparsification[i - 1] - res.oracle[i - 1];
    const double d1 = res.sparsification[i] - res.oracle[i];
    area += 0.5 * (d0 + d1) * (res.fractions[i] - res.fractions[i - 1]);
  }
  res.ause = area;
  return res;
}

}  // namespace dfuse
