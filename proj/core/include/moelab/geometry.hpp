#pragma once

#include <array>
#include <optional>
#include <vector>

#include "moelab/tensor.hpp"

namespace moelab {

inline constexpr double kNearPlane = 0.1;  // meters; closer points are invalid

using Vec3 = std::array<double, 3>;

/// Pinhole camera. Extrinsic maps world -> camera (camera frame: x right,
/// y down, z forward); rotation block must be orthonormal with det +1.
struct Camera {
  Tensor extrinsic;  // 4x4
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  double width = 0.0, height = 0.0;

  /// Throws when the rotation block is not a proper rotation or fx/fy <= 0.
  void validate() const;

  /// Camera placed at `position`, looking along the horizontal direction
  /// `yaw` (radians, world z-up).
  static Camera looking(const Vec3& position, double yaw, double fx, double fy, double cx,
                        double cy, double width, double height);
};

struct Box3D {
  Vec3 center{0.0, 0.0, 0.0};
  Vec3 size{1.0, 1.0, 1.0};  // (length, width, height), all > 0
  double yaw = 0.0;          // rotation about world z, in (-pi, pi]
  int class_id = 0;

  void validate() const;
};

struct ProjectedPoint {
  double u = 0.0, v = 0.0, depth = 0.0;
  bool valid = false;  // depth > kNearPlane
};

struct CropRect {
  std::size_t camera_index = 0;
  double u_min = 0.0, v_min = 0.0, u_max = 0.0, v_max = 0.0;
  double mean_depth = 0.0;
};

/// The 8 corners of the yaw-rotated cuboid. Corner j has body-frame signs
/// (x,y,z) = (j&1 ? +l/2 : -l/2, j&2 ? +w/2 : -w/2, j&4 ? +h/2 : -h/2),
/// rotated by yaw about z and translated to the center.
std::array<Vec3, 8> box_corners(const Box3D& box);

/// Perspective projection of world points; points at depth <= kNearPlane are
/// flagged invalid instead of thrown.
std::vector<ProjectedPoint> project_to_camera(const std::vector<Vec3>& points,
                                              const Camera& cam);

/// Axis-aligned rectangle over the valid projected corners, clamped to the
/// image. Empty when fewer than 2 corners are valid or the clamped area is
/// below 1 px^2.
std::optional<CropRect> crop_rect(const Box3D& box, const Camera& cam,
                                  std::size_t camera_index = 0);

/// Row-major flattening of every 4x4 extrinsic: C x 16.
Tensor flatten_extrinsics(const std::vector<Camera>& rig);
Tensor unflatten_extrinsic(const Tensor& flat, std::size_t row);

}  // namespace moelab
