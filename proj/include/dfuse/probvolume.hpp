#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dfuse/core.hpp"
#include "dfuse/geometry.hpp"

namespace dfuse {

/// Strictly increasing positive depth planes d_1 < d_2 < ... < d_N (meters).
struct DepthHypotheses {
  std::vector<double> planes;

  int count() const { return static_cast<int>(planes.size()); }

  void validate() const {
    if (planes.size() < 2) {
      throw std::invalid_argument("DepthHypotheses: need at least 2 planes");
    }
    for (std::size_t j = 0; j < planes.size(); ++j) {
      if (!(planes[j] > 0.0) || !std::isfinite(planes[j])) {
        throw std::invalid_argument("DepthHypotheses: planes must be > 0");
      }
      if (j > 0 && !(planes[j] > planes[j - 1])) {
        throw std::invalid_argument(
            "DepthHypotheses: planes must be strictly increasing");
      }
    }
  }
};

/// Per-pixel discrete distribution over hypothesis depth planes. Probs are
/// stored plane-innermost: probs[(y*W + x)*N + j].
class ProbabilityVolume {
 public:
  ProbabilityVolume() = default;
  ProbabilityVolume(int height, int width, DepthHypotheses hypotheses)
      : height_(height), width_(width), hypotheses_(std::move(hypotheses)) {
    hypotheses_.validate();
    if (height <= 0 || width <= 0) {
      throw std::invalid_argument("ProbabilityVolume: bad dimensions");
    }
    probs_.assign(static_cast<std::size_t>(height) * width *
                      hypotheses_.count(),
                  0.0);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int plane_count() const { return hypotheses_.count(); }
  const DepthHypotheses& hypotheses() const { return hypotheses_; }

  double& at(int y, int x, int j) { return probs_[index(y, x, j)]; }
  const double& at(int y, int x, int j) const { return probs_[index(y, x, j)]; }

  const double* pixel(int y, int x) const { return &probs_[index(y, x, 0)]; }

  /// Checks non-negativity and per-pixel normalization within tol.
  void validate(double tol = 1e-6) const {
    const int n = plane_count();
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        const double* p = pixel(y, x);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
          if (!(p[j] >= 0.0)) {
            throw std::invalid_argument(
                "ProbabilityVolume: negative probability");
          }
          sum += p[j];
        }
        if (std::abs(sum - 1.0) > tol) {
          throw std::invalid_argument(
              "ProbabilityVolume: unnormalized volume (per-pixel sum "
              "deviates from 1 beyond tolerance)");
        }
      }
    }
  }

 private:
  std::size_t index(int y, int x, int j) const {
    return (static_cast<std::size_t>(y) * width_ + x) *
               static_cast<std::size_t>(hypotheses_.count()) +
           j;
  }

  int height_ = 0;
  int width_ = 0;
  DepthHypotheses hypotheses_;
  std::vector<double> probs_;
};

/// Per-pixel expected depth sum_j d_j * P_j. All output pixels are valid.
inline DepthField expectation_depth(const ProbabilityVolume& v) {
  v.validate();
  DepthField out(v.height(), v.width(), 0.0, true);
  const int n = v.plane_count();
  const auto& planes = v.hypotheses().planes;
  for (int y = 0; y < v.height(); ++y) {
    for (int x = 0; x < v.width(); ++x) {
      const double* p = v.pixel(y, x);
      double d = 0.0;
      for (int j = 0; j < n; ++j) d += planes[j] * p[j];
      out.values.at(y, x) = d;
    }
  }
  return out;
}

/// Per-pixel Shannon entropy in nats; terms with P_j = 0 contribute 0.
inline Grid<double> entropy_uncertainty(const ProbabilityVolume& v) {
  v.validate();
  Grid<double> out(v.height(), v.width(), 0.0);
  const int n = v.plane_count();
  for (int y = 0; y < v.height(); ++y) {
    for (int x = 0; x < v.width(); ++x) {
      const double* p = v.pixel(y, x);
      double h = 0.0;
      for (int j = 0; j < n; ++j) {
        if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
      }
      out.at(y, x) = h;
    }
  }
  return out;
}

}  // namespace dfuse
