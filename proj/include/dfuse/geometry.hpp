#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "dfuse/core.hpp"

namespace dfuse {

/// Pinhole camera. Pixel centers sit at integer coordinates; (0,0) is the
/// center of the top-left pixel, so the valid continuous pixel domain is
/// [0, width-1] x [0, height-1].
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  double mean_focal() const { return 0.5 * (fx + fy); }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
      throw std::invalid_argument("Intrinsics: focal lengths must be > 0");
    }
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("Intrinsics: image size must be positive");
    }
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw std::invalid_argument(
          "Intrinsics: principal point outside image bounds");
    }
  }
};

/// Rigid body transform on SE(3): x -> rotation * x + translation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  double orthonormality_error() const {
    const Eigen::Matrix3d e =
        rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    return e.cwiseAbs().maxCoeff();
  }

  void validate(double tol = 1e-9) const {
    if (orthonormality_error() > tol) {
      throw std::invalid_argument("RigidTransform: rotation not orthonormal");
    }
    if (std::abs(rotation.determinant() - 1.0) > tol) {
      throw std::invalid_argument("RigidTransform: det(R) != +1");
    }
    if (!translation.allFinite()) {
      throw std::invalid_argument("RigidTransform: non-finite translation");
    }
  }
};

/// Composition: compose(a, b) applies b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline RigidTransform inverse(const RigidTransform& a) {
  RigidTransform out;
  out.rotation = a.rotation.transpose();
  out.translation = -(out.rotation * a.translation);
  return out;
}

/// Closest rotation matrix in Frobenius norm (polar factor with det +1).
inline Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

/// Dense positive depth in meters with a per-pixel validity mask. Values at
/// unmasked pixels carry no meaning and are ignored by every operation.
struct DepthField {
  Grid<double> values;
  Grid<std::uint8_t> mask;

  DepthField() = default;
  DepthField(int height, int width, double fill = 0.0, bool valid = false)
      : values(height, width, fill),
        mask(height, width, valid ? std::uint8_t{1} : std::uint8_t{0}) {}

  int height() const { return values.height(); }
  int width() const { return values.width(); }

  bool valid(int y, int x) const { return mask.at(y, x) != 0; }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto m : mask) n += (m != 0);
    return n;
  }

  void validate() const {
    if (!values.same_shape(mask)) {
      throw std::invalid_argument("DepthField: values/mask shape mismatch");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (mask[i] && !(std::isfinite(values[i]) && values[i] > 0.0)) {
        throw std::invalid_argument(
            "DepthField: masked value must be finite and > 0");
      }
    }
  }
};

struct PixelProjection {
  Eigen::Vector2d pixel;
  double depth;
};

/// Projects a camera-frame point onto the image plane.
inline PixelProjection project(const Eigen::Vector3d& point,
                               const Intrinsics& k) {
  if (!(point.z() > 0.0)) {
    throw std::invalid_argument("project: point behind camera (z <= 0)");
  }
  return {{k.fx * point.x() / point.z() + k.cx,
           k.fy * point.y() / point.z() + k.cy},
          point.z()};
}

/// Lifts a pixel at the given depth back to a camera-frame point.
inline Eigen::Vector3d unproject(const Eigen::Vector2d& pixel, double depth,
                                 const Intrinsics& k) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("unproject: depth must be > 0");
  }
  return {(pixel.x() - k.cx) * depth / k.fx,
          (pixel.y() - k.cy) * depth / k.fy, depth};
}

/// Bilinear sample of a masked depth field at continuous pixel (u, v).
/// Returns nullopt when the footprint leaves the image or touches any
/// invalid pixel, so masked-out values never leak into the interpolation.
inline std::optional<double> sample_depth_bilinear(const DepthField& field,
                                                   double u, double v) {
  if (!(u >= 0.0 && v >= 0.0 && u <= field.width() - 1 &&
        v <= field.height() - 1)) {
    return std::nullopt;
  }
  int x0 = static_cast<int>(std::floor(u));
  int y0 = static_cast<int>(std::floor(v));
  x0 = std::min(x0, field.width() - 2 >= 0 ? field.width() - 2 : 0);
  y0 = std::min(y0, field.height() - 2 >= 0 ? field.height() - 2 : 0);
  if (field.width() == 1) x0 = 0;
  if (field.height() == 1) y0 = 0;
  const int x1 = std::min(x0 + 1, field.width() - 1);
  const int y1 = std::min(y0 + 1, field.height() - 1);
  if (!field.valid(y0, x0) || !field.valid(y0, x1) || !field.valid(y1, x0) ||
      !field.valid(y1, x1)) {
    return std::nullopt;
  }
  const double ax = u - x0;
  const double ay = v - y0;
  const double top =
      (1.0 - ax) * field.values.at(y0, x0) + ax * field.values.at(y0, x1);
  const double bot =
      (1.0 - ax) * field.values.at(y1, x0) + ax * field.values.at(y1, x1);
  return (1.0 - ay) * top + ay * bot;
}

/// Warps a source-view depth map into the target view. Every valid source
/// pixel is unprojected, moved by pose_s_to_t, and splatted onto its
/// nearest target pixel; collisions keep the smaller depth (z-buffer).
/// Target pixels no source pixel reaches stay unmasked. The scan order is
/// fixed, so output does not depend on scheduling.
inline DepthField warp_depth(const DepthField& source_depth,
                             const RigidTransform& pose_s_to_t,
                             const Intrinsics& k) {
  DepthField out(source_depth.height(), source_depth.width(),
                 std::numeric_limits<double>::infinity(), false);
  for (int y = 0; y < source_depth.height(); ++y) {
    for (int x = 0; x < source_depth.width(); ++x) {
      if (!source_depth.valid(y, x)) continue;
      const Eigen::Vector3d p_src = unproject(
          {static_cast<double>(x), static_cast<double>(y)},
          source_depth.values.at(y, x), k);
      const Eigen::Vector3d p_tgt = pose_s_to_t.apply(p_src);
      if (!(p_tgt.z() > 0.0)) continue;
      const PixelProjection proj = project(p_tgt, k);
      const int xi = static_cast<int>(std::lround(proj.pixel.x()));
      const int yi = static_cast<int>(std::lround(proj.pixel.y()));
      if (!out.values.in_bounds(yi, xi)) continue;
      if (proj.depth < out.values.at(yi, xi)) {
        out.values.at(yi, xi) = proj.depth;
        out.mask.at(yi, xi) = 1;
      }
    }
  }
  return out;
}

}  // namespace dfuse
