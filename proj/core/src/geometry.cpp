#include "moelab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace moelab {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

void Camera::validate() const {
  if (extrinsic.rows() != 4 || extrinsic.cols() != 4)
    throw std::invalid_argument("camera extrinsic must be 4x4");
  if (!(fx > 0.0 && fy > 0.0)) throw std::invalid_argument("camera focal lengths must be > 0");
  // Rotation block orthonormality within 1e-9.
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < 3; ++t) dot += extrinsic(i, t) * extrinsic(j, t);
      const double expect = i == j ? 1.0 : 0.0;
      if (std::fabs(dot - expect) > 1e-9)
        throw std::invalid_argument("camera rotation block is not orthonormal");
    }
  }
  const double det =
      extrinsic(0, 0) * (extrinsic(1, 1) * extrinsic(2, 2) - extrinsic(1, 2) * extrinsic(2, 1)) -
      extrinsic(0, 1) * (extrinsic(1, 0) * extrinsic(2, 2) - extrinsic(1, 2) * extrinsic(2, 0)) +
      extrinsic(0, 2) * (extrinsic(1, 0) * extrinsic(2, 1) - extrinsic(1, 1) * extrinsic(2, 0));
  if (std::fabs(det - 1.0) > 1e-9)
    throw std::invalid_argument("camera rotation block must have det +1");
  if (extrinsic(3, 0) != 0.0 || extrinsic(3, 1) != 0.0 || extrinsic(3, 2) != 0.0 ||
      extrinsic(3, 3) != 1.0)
    throw std::invalid_argument("camera extrinsic last row must be (0,0,0,1)");
}

Camera Camera::looking(const Vec3& position, double yaw, double fx, double fy, double cx,
                       double cy, double width, double height) {
  // World z-up. Camera rows: x_cam = right, y_cam = down, z_cam = forward.
  const Vec3 forward{std::cos(yaw), std::sin(yaw), 0.0};
  const Vec3 right{std::sin(yaw), -std::cos(yaw), 0.0};
  const Vec3 down{0.0, 0.0, -1.0};

  Camera cam;
  cam.extrinsic = Tensor(4, 4);
  const Vec3 rows[3] = {right, down, forward};
  for (std::size_t i = 0; i < 3; ++i) {
    double t = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      cam.extrinsic(i, j) = rows[i][j];
      t += rows[i][j] * position[j];
    }
    cam.extrinsic(i, 3) = -t;
  }
  cam.extrinsic(3, 3) = 1.0;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.validate();
  return cam;
}

void Box3D::validate() const {
  if (!(size[0] > 0.0 && size[1] > 0.0 && size[2] > 0.0))
    throw std::invalid_argument("box sizes must be > 0");
  if (!(yaw > -kPi - 1e-12 && yaw <= kPi + 1e-12))
    throw std::invalid_argument("box yaw must lie in (-pi, pi]");
}

std::array<Vec3, 8> box_corners(const Box3D& box) {
  box.validate();
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  std::array<Vec3, 8> corners;
  for (int j = 0; j < 8; ++j) {
    const double bx = (j & 1) ? 0.5 * box.size[0] : -0.5 * box.size[0];
    const double by = (j & 2) ? 0.5 * box.size[1] : -0.5 * box.size[1];
    const double bz = (j & 4) ? 0.5 * box.size[2] : -0.5 * box.size[2];
    corners[j] = {box.center[0] + c * bx - s * by, box.center[1] + s * bx + c * by,
                  box.center[2] + bz};
  }
  return corners;
}

std::vector<ProjectedPoint> project_to_camera(const std::vector<Vec3>& points,
                                              const Camera& cam) {
  std::vector<ProjectedPoint> out;
  out.reserve(points.size());
  for (const Vec3& p : points) {
    double camv[3];
    for (std::size_t i = 0; i < 3; ++i) {
      camv[i] = cam.extrinsic(i, 3);
      for (std::size_t j = 0; j < 3; ++j) camv[i] += cam.extrinsic(i, j) * p[j];
    }
    ProjectedPoint pp;
    pp.depth = camv[2];
    if (camv[2] > kNearPlane) {
      pp.valid = true;
      pp.u = cam.fx * camv[0] / camv[2] + cam.cx;
      pp.v = cam.fy * camv[1] / camv[2] + cam.cy;
    }
    out.push_back(pp);
  }
  return out;
}

std::optional<CropRect> crop_rect(const Box3D& box, const Camera& cam,
                                  std::size_t camera_index) {
  const auto corners = box_corners(box);
  const auto projected =
      project_to_camera(std::vector<Vec3>(corners.begin(), corners.end()), cam);

  double u_min = 0.0, v_min = 0.0, u_max = 0.0, v_max = 0.0, depth_sum = 0.0;
  std::size_t valid = 0;
  for (const auto& pp : projected) {
    if (!pp.valid) continue;
    if (valid == 0) {
      u_min = u_max = pp.u;
      v_min = v_max = pp.v;
    } else {
      u_min = std::min(u_min, pp.u);
      u_max = std::max(u_max, pp.u);
      v_min = std::min(v_min, pp.v);
      v_max = std::max(v_max, pp.v);
    }
    depth_sum += pp.depth;
    ++valid;
  }
  if (valid < 2) return std::nullopt;

  CropRect rect;
  rect.camera_index = camera_index;
  rect.u_min = std::clamp(u_min, 0.0, cam.width);
  rect.u_max = std::clamp(u_max, 0.0, cam.width);
  rect.v_min = std::clamp(v_min, 0.0, cam.height);
  rect.v_max = std::clamp(v_max, 0.0, cam.height);
  rect.mean_depth = depth_sum / static_cast<double>(valid);
  const double area = (rect.u_max - rect.u_min) * (rect.v_max - rect.v_min);
  if (!(rect.u_max > rect.u_min) || !(rect.v_max > rect.v_min) || area < 1.0)
    return std::nullopt;
  return rect;
}

Tensor flatten_extrinsics(const std::vector<Camera>& rig) {
  if (rig.empty()) throw std::invalid_argument("flatten_extrinsics: empty rig");
  Tensor out(rig.size(), 16);
  for (std::size_t c = 0; c < rig.size(); ++c) {
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) out(c, 4 * i + j) = rig[c].extrinsic(i, j);
  }
  return out;
}

Tensor unflatten_extrinsic(const Tensor& flat, std::size_t row) {
  if (flat.cols() != 16 || row >= flat.rows())
    throw std::invalid_argument("unflatten_extrinsic: bad shape or row");
  Tensor out(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) out(i, j) = flat(row, 4 * i + j);
  return out;
}

}  // namespace moelab
