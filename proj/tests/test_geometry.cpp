#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "moelab/geometry.hpp"
#include "moelab/rng.hpp"

using namespace moelab;

namespace {

constexpr double kPi = 3.14159265358979323846;

Camera identity_camera(double fx, double fy, double cx, double cy, double w, double h) {
  Camera cam;
  cam.extrinsic = Tensor::identity(4);
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = w;
  cam.height = h;
  cam.validate();
  return cam;
}

// Rigid transform: rotation about z by angle, then translation.
Tensor rigid_z(double angle, const Vec3& t) {
  Tensor m = Tensor::identity(4);
  m(0, 0) = std::cos(angle);
  m(0, 1) = -std::sin(angle);
  m(1, 0) = std::sin(angle);
  m(1, 1) = std::cos(angle);
  m(0, 3) = t[0];
  m(1, 3) = t[1];
  m(2, 3) = t[2];
  return m;
}

Tensor mat4_mul(const Tensor& a, const Tensor& b) {
  Tensor c(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t t = 0; t < 4; ++t) c(i, j) += a(i, t) * b(t, j);
  return c;
}

Vec3 apply_rigid(const Tensor& m, const Vec3& p) {
  Vec3 out{};
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = m(i, 3);
    for (std::size_t j = 0; j < 3; ++j) out[i] += m(i, j) * p[j];
  }
  return out;
}

}  // namespace

TEST_CASE("unit cube corners") {
  Box3D box;
  box.size = {1.0, 1.0, 1.0};
  const auto corners = box_corners(box);
  for (int j = 0; j < 8; ++j) {
    CHECK(std::fabs(corners[j][0]) == doctest::Approx(0.5));
    CHECK(std::fabs(corners[j][1]) == doctest::Approx(0.5));
    CHECK(std::fabs(corners[j][2]) == doctest::Approx(0.5));
  }
  // Corner 0 carries all-negative body signs.
  CHECK(corners[0][0] == doctest::Approx(-0.5));
  CHECK(corners[7][2] == doctest::Approx(0.5));
}

TEST_CASE("quarter-turn yaw swaps the footprint") {
  Box3D a;
  a.size = {2.0, 1.0, 1.0};
  a.yaw = kPi / 2.0;
  Box3D b;
  b.size = {1.0, 2.0, 1.0};
  const auto ca = box_corners(a);
  const auto cb = box_corners(b);
  // Same corner set (possibly reordered): compare per-corner nearest match.
  for (const auto& p : ca) {
    double best = 1e9;
    for (const auto& q : cb) {
      best = std::min(best, std::fabs(p[0] - q[0]) + std::fabs(p[1] - q[1]) +
                                std::fabs(p[2] - q[2]));
    }
    CHECK(best < 1e-12);
  }
}

TEST_CASE("pairwise corner distances match the analytic diagonals") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Box3D box;
    box.center = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 3)};
    box.size = {rng.uniform(0.5, 4), rng.uniform(0.5, 4), rng.uniform(0.5, 4)};
    box.yaw = rng.uniform(-kPi, kPi);
    if (box.yaw <= -kPi) box.yaw = kPi;
    const auto c = box_corners(box);
    auto dist = [&c](int i, int j) {
      return std::sqrt(std::pow(c[i][0] - c[j][0], 2) + std::pow(c[i][1] - c[j][1], 2) +
                       std::pow(c[i][2] - c[j][2], 2));
    };
    CHECK(dist(0, 1) == doctest::Approx(box.size[0]));
    CHECK(dist(0, 2) == doctest::Approx(box.size[1]));
    CHECK(dist(0, 4) == doctest::Approx(box.size[2]));
    const double full = std::sqrt(box.size[0] * box.size[0] + box.size[1] * box.size[1] +
                                  box.size[2] * box.size[2]);
    CHECK(dist(0, 7) == doctest::Approx(full));
  }
  CHECK_THROWS(box_corners(Box3D{{0, 0, 0}, {0.0, 1.0, 1.0}, 0.0, 0}));
}

TEST_CASE("principal point projection is exact") {
  const Camera cam = identity_camera(100, 100, 50, 50, 100, 100);
  const auto pts = project_to_camera({{0.0, 0.0, 5.0}}, cam);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].valid);
  CHECK(pts[0].u == 50.0);
  CHECK(pts[0].v == 50.0);
  CHECK(pts[0].depth == 5.0);
}

TEST_CASE("points behind the camera are flagged invalid") {
  const Camera cam = identity_camera(100, 100, 50, 50, 100, 100);
  const auto pts = project_to_camera({{0.0, 0.0, -5.0}, {0.0, 0.0, 0.05}}, cam);
  CHECK(!pts[0].valid);
  CHECK(!pts[1].valid);  // in front but inside the near plane
}

TEST_CASE("translation-only extrinsic reproduces the origin case") {
  Camera cam = identity_camera(100, 100, 50, 50, 100, 100);
  const Vec3 t{1.5, -2.0, 0.75};
  cam.extrinsic(0, 3) = t[0];
  cam.extrinsic(1, 3) = t[1];
  cam.extrinsic(2, 3) = t[2];

  const Camera origin_cam = identity_camera(100, 100, 50, 50, 100, 100);
  const Vec3 p{0.3, 0.6, 5.0};
  const Vec3 shifted{p[0] - t[0], p[1] - t[1], p[2] - t[2]};
  const auto a = project_to_camera({shifted}, cam);
  const auto b = project_to_camera({p}, origin_cam);
  CHECK(a[0].u == doctest::Approx(b[0].u).epsilon(1e-12));
  CHECK(a[0].v == doctest::Approx(b[0].v).epsilon(1e-12));
  CHECK(a[0].depth == doctest::Approx(b[0].depth).epsilon(1e-12));
}

TEST_CASE("camera validation rejects non-rotations") {
  Camera cam = identity_camera(100, 100, 50, 50, 100, 100);
  cam.extrinsic(0, 0) = 2.0;
  CHECK_THROWS(cam.validate());
  Camera mirror = identity_camera(100, 100, 50, 50, 100, 100);
  mirror.extrinsic(0, 0) = -1.0;  // det -1
  CHECK_THROWS(mirror.validate());
}

TEST_CASE("crop_rect cases") {
  const Camera cam = identity_camera(200, 200, 400, 225, 800, 450);

  SUBCASE("fully behind yields nothing") {
    Box3D box;
    box.center = {0.0, 0.0, -10.0};
    CHECK(!crop_rect(box, cam).has_value());
  }
  SUBCASE("frontal box is symmetric about the principal point") {
    Box3D box;
    box.center = {0.0, 0.0, 8.0};  // straight ahead on the optical axis
    box.size = {2.0, 2.0, 2.0};
    const auto rect = crop_rect(box, cam);
    REQUIRE(rect.has_value());
    CHECK(rect->u_min + rect->u_max == doctest::Approx(2 * 400.0).epsilon(1e-6));
    CHECK(rect->v_min + rect->v_max == doctest::Approx(2 * 225.0).epsilon(1e-6));
    CHECK(rect->mean_depth > 0.0);
  }
  SUBCASE("halving the distance roughly doubles the width") {
    Box3D far_box;
    far_box.center = {0.0, 0.0, 40.0};
    far_box.size = {1.0, 1.0, 1.0};
    Box3D near_box = far_box;
    near_box.center[2] = 20.0;
    const auto fr = crop_rect(far_box, cam);
    const auto nr = crop_rect(near_box, cam);
    REQUIRE(fr.has_value());
    REQUIRE(nr.has_value());
    const double ratio = (nr->u_max - nr->u_min) / (fr->u_max - fr->u_min);
    CHECK(ratio > 1.8);
    CHECK(ratio < 2.2);
  }
}

TEST_CASE("flatten_extrinsics round trip") {
  std::vector<Camera> rig;
  rig.push_back(Camera::looking({1.0, 0.0, 1.6}, 0.0, 400, 400, 400, 225, 800, 450));
  rig.push_back(Camera::looking({0.0, 1.0, 1.6}, kPi / 2, 400, 400, 400, 225, 800, 450));
  const Tensor flat = flatten_extrinsics(rig);
  CHECK(flat.rows() == 2);
  CHECK(flat.cols() == 16);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(unflatten_extrinsic(flat, c) == rig[c].extrinsic);  // bitwise
  }

  Camera ident = identity_camera(1, 1, 0, 0, 10, 10);
  const Tensor one = flatten_extrinsics({ident});
  const double expect[16] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  for (std::size_t i = 0; i < 16; ++i) CHECK(one(0, i) == expect[i]);
}

TEST_CASE("conjugation invariance of the projection") {
  Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Camera cam =
        Camera::looking({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 2)},
                        rng.uniform(-kPi, kPi), 300, 320, 400, 225, 800, 450);
    const Tensor world_xform =
        rigid_z(rng.uniform(-kPi, kPi),
                {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-2, 2)});
    // Inverse of the rigid transform.
    Tensor inv = Tensor::identity(4);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) inv(i, j) = world_xform(j, i);
    for (std::size_t i = 0; i < 3; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 3; ++j) acc += inv(i, j) * world_xform(j, 3);
      inv(i, 3) = -acc;
    }

    Camera moved = cam;
    moved.extrinsic = mat4_mul(cam.extrinsic, inv);
    moved.validate();

    const Vec3 p{rng.uniform(2, 10), rng.uniform(-3, 3), rng.uniform(0, 2)};
    const auto base = project_to_camera({p}, cam);
    const auto conj = project_to_camera({apply_rigid(world_xform, p)}, moved);
    if (!base[0].valid) {
      CHECK(!conj[0].valid);
      continue;
    }
    CHECK(std::fabs(base[0].u - conj[0].u) < 1e-9);
    CHECK(std::fabs(base[0].v - conj[0].v) < 1e-9);
    CHECK(std::fabs(base[0].depth - conj[0].depth) < 1e-9);
  }
}

TEST_CASE("corner rectangle contains dense surface samples") {
  Rng rng(33);
  const Camera cam = identity_camera(300, 300, 400, 225, 800, 450);
  int tested = 0;
  while (tested < 20) {
    Box3D box;
    box.center = {rng.uniform(-4, 4), rng.uniform(-2, 2), rng.uniform(8, 25)};
    box.size = {rng.uniform(0.5, 3), rng.uniform(0.5, 3), rng.uniform(0.5, 3)};
    box.yaw = rng.uniform(-kPi, kPi);
    if (box.yaw <= -kPi) box.yaw = kPi;

    const auto corners = box_corners(box);
    const auto projected =
        project_to_camera(std::vector<Vec3>(corners.begin(), corners.end()), cam);
    bool all_valid = true;
    for (const auto& pp : projected) all_valid = all_valid && pp.valid;
    if (!all_valid) continue;
    ++tested;

    double u_min = projected[0].u, u_max = projected[0].u;
    double v_min = projected[0].v, v_max = projected[0].v;
    for (const auto& pp : projected) {
      u_min = std::min(u_min, pp.u);
      u_max = std::max(u_max, pp.u);
      v_min = std::min(v_min, pp.v);
      v_max = std::max(v_max, pp.v);
    }

    // 200 bilinear samples over random faces must project inside the hull
    // rectangle of the corners.
    const double cy = std::cos(box.yaw), sy = std::sin(box.yaw);
    for (int s = 0; s < 200; ++s) {
      const int axis = static_cast<int>(rng.uniform_index(3));
      const double side = rng.uniform() < 0.5 ? -0.5 : 0.5;
      double b[3] = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                     rng.uniform(-0.5, 0.5)};
      b[axis] = side;
      const double bx = b[0] * box.size[0], by = b[1] * box.size[1], bz = b[2] * box.size[2];
      const Vec3 world{box.center[0] + cy * bx - sy * by, box.center[1] + sy * bx + cy * by,
                       box.center[2] + bz};
      const auto pp = project_to_camera({world}, cam)[0];
      REQUIRE(pp.valid);
      CHECK(pp.u >= u_min - 1e-9);
      CHECK(pp.u <= u_max + 1e-9);
      CHECK(pp.v >= v_min - 1e-9);
      CHECK(pp.v <= v_max + 1e-9);
    }
  }
}
