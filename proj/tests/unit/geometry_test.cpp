#include <doctest.h>

#include <Eigen/LU>
#include <random>

#include "skyanchor/error.hpp"
#include "skyanchor/geometry.hpp"
#include "skyanchor/image.hpp"
#include "skyanchor/render.hpp"
#include "support/scenes.hpp"

using namespace skyanchor;
using namespace skyanchor::testing;

namespace {

Pose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-3.0, 3.0);
  Pose p;
  p.rotation = exp_so3(Vec3(n(rng), n(rng), n(rng)).normalized() * angle(rng));
  p.translation = Vec3(n(rng), n(rng), n(rng));
  return p;
}

double max_abs_diff(const Mat4& a, const Mat4& b) { return (a - b).cwiseAbs().maxCoeff(); }

const TagFamily& family() {
  static const TagFamily f = TagFamily::load(SKYANCHOR_DATA_DIR "/families/tagStandard41h12.txt");
  return f;
}

}  // namespace

TEST_CASE("compose and invert against the homogeneous-matrix oracle") {
  std::mt19937_64 rng(7);
  const Pose id = Pose::identity();
  for (int trial = 0; trial < 200; ++trial) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    CHECK(a.is_valid());

    const Pose ab = compose(a, b);
    CHECK(max_abs_diff(ab.matrix(), a.matrix() * b.matrix()) < 1e-9);
    CHECK(max_abs_diff(invert(a).matrix(), a.matrix().inverse()) < 1e-9);
    CHECK(max_abs_diff(compose(a, invert(a)).matrix(), Mat4::Identity()) < 1e-9);
    CHECK(max_abs_diff(compose(id, a).matrix(), a.matrix()) < 1e-15);

    const Pose c = random_pose(rng);
    CHECK(max_abs_diff(compose(compose(a, b), c).matrix(), compose(a, compose(b, c)).matrix()) < 1e-8);
  }
}

TEST_CASE("invert edge cases") {
  CHECK(invert(Pose::identity()).matrix() == Mat4::Identity());
  Pose t;
  t.translation = Vec3(1, 2, 3);
  CHECK(invert(t).translation == Vec3(-1, -2, -3));
  CHECK(invert(t).rotation == Mat3::Identity());
}

TEST_CASE("project") {
  const CameraIntrinsics k = desk_camera();
  SUBCASE("optical axis lands on the principal point") {
    const Vec2 px = project(k, Pose::identity(), Vec3(0, 0, 2.5));
    CHECK(px.x() == doctest::Approx(k.cx));
    CHECK(px.y() == doctest::Approx(k.cy));
  }
  SUBCASE("formula value") {
    CameraIntrinsics k2 = k;
    k2.fx = 500;
    k2.cx = 320;
    CHECK(project(k2, Pose::identity(), Vec3(0.1, 0, 1)).x() == doctest::Approx(370.0));
  }
  SUBCASE("behind the camera") {
    CHECK_THROWS_AS(project(k, Pose::identity(), Vec3(0, 0, -1)), Error);
    try {
      project(k, Pose::identity(), Vec3(0.3, 0, 0));
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::PointBehindCamera);
    }
  }
  SUBCASE("homogeneous oracle and identity insertion") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int i = 0; i < 200; ++i) {
      Pose pose = random_pose(rng);
      pose.translation = Vec3(u(rng), u(rng), 3.0);
      const Vec3 x(u(rng), u(rng), u(rng));
      Eigen::Matrix<double, 3, 4> proj = k.matrix() * pose.matrix().topRows<3>();
      const Vec3 h = proj * x.homogeneous();
      const Vec2 px = project(k, pose, x);
      CHECK((px - h.hnormalized()).norm() < 1e-9);

      const Pose other = random_pose(rng);
      const Pose padded = compose(compose(pose, compose(other, invert(other))), Pose::identity());
      CHECK((project(k, padded, x) - px).norm() < 1e-9);
    }
  }
}

TEST_CASE("intrinsics validation") {
  CameraIntrinsics k = desk_camera();
  CHECK_NOTHROW(k.validate());
  k.fx = 0.0;
  CHECK_THROWS_AS(k.validate(), Error);
  k = desk_camera();
  k.cx = k.width;
  CHECK_THROWS_AS(k.validate(), Error);
}

TEST_CASE("so3 helpers") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    CHECK(rotation_distance_deg(a.rotation, a.rotation) < 1e-6);
    CHECK(rotation_distance_deg(slerp(a.rotation, b.rotation, 0.0), a.rotation) < 1e-6);
    CHECK(rotation_distance_deg(slerp(a.rotation, b.rotation, 1.0), b.rotation) < 1e-6);
    const double whole = rotation_distance_deg(a.rotation, b.rotation);
    const double half = rotation_distance_deg(a.rotation, slerp(a.rotation, b.rotation, 0.5));
    CHECK(half == doctest::Approx(whole / 2.0).epsilon(1e-6));
  }
  const Vec3 from = Vec3(1, 2, 3).normalized();
  const Vec3 to = Vec3(-2, 0.5, 1).normalized();
  CHECK((rotation_between(from, to) * from - to).norm() < 1e-12);
  CHECK((rotation_between(from, -from) * from + from).norm() < 1e-12);
}

TEST_CASE("pgm round trip and malformed input") {
  GrayImage img(5, 3, 0);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) img.at(x, y) = static_cast<std::uint8_t>(x * 40 + y);
  CHECK(decode_pgm(encode_pgm(img)) == img);

  const std::string bytes = encode_pgm(img);
  CHECK_THROWS_AS(decode_pgm(bytes.substr(0, bytes.size() - 1)), Error);
  CHECK_THROWS_AS(decode_pgm(std::string("P2\n1 1\n255\n0")), Error);
  CHECK_THROWS_AS(decode_pgm(std::string("P5\n2 2\n65535\n")), Error);
  CHECK(decode_pgm(std::string("P5\n# comment\n1 1\n255\n\x07", 22)).at(0, 0) == 7);
}

TEST_CASE("render_tag") {
  const CameraIntrinsics k = desk_camera();
  const double size = 0.1;

  SUBCASE("fronto-parallel border corners fall on projected tag corners") {
    const Pose pose = fronto_parallel(0.5);  // 120 px border square, 24 px cells
    const GrayImage img = render_tag(family(), 0, pose, k, size, 0.0);
    const auto corners = true_corners(pose, k, size);
    const Vec2 center = project(k, pose, Vec3::Zero());
    for (const Vec2& c : corners) {
      const Vec2 inward = (center - c).normalized();
      const Vec2 in = c + 2.5 * inward;
      const Vec2 out = c - 2.5 * inward;
      // border ring inside the edge is white, the ring outside is black
      CHECK(img.at(static_cast<int>(std::lround(in.x())), static_cast<int>(std::lround(in.y()))) == 255);
      CHECK(img.at(static_cast<int>(std::lround(out.x())), static_cast<int>(std::lround(out.y()))) == 0);
    }
    // the edge itself is half covered
    const Vec2 mid = 0.5 * (corners[0] + corners[1]);
    CHECK(std::abs(img.sample(mid.x(), mid.y()) - 127.5) < 20.0);
  }

  SUBCASE("noise-free rendering is deterministic") {
    Pose pose = fronto_parallel(0.6);
    pose.rotation = rot_x(20) * rot_z(30);
    CHECK(render_tag(family(), 5, pose, k, size, 0.0) == render_tag(family(), 5, pose, k, size, 0.0));
    RenderOptions opts;
    opts.noise_seed = 9;
    CHECK(render_tag(family(), 5, pose, k, size, 4.0, opts) ==
          render_tag(family(), 5, pose, k, size, 4.0, opts));
  }

  SUBCASE("errors") {
    const Pose pose = fronto_parallel(0.5);
    auto code_of = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::IoError;
    };
    CHECK(code_of([&] { render_tag(family(), family().size(), pose, k, size, 0.0); }) ==
          ErrorCode::IdOutOfRange);
    CHECK(code_of([&] { render_tag(family(), 0, pose, k, 0.0, 0.0); }) == ErrorCode::NonPositiveTagSize);
    CHECK(code_of([&] { render_tag(family(), 0, fronto_parallel(0.05), k, size, 0.0); }) ==
          ErrorCode::TagOutsideFrustum);
  }
}
