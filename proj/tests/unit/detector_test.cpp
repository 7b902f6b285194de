#include <doctest.h>

#include <random>

#include "skyanchor/detector.hpp"
#include "skyanchor/error.hpp"
#include "skyanchor/render.hpp"
#include "support/scenes.hpp"

using namespace skyanchor;
using namespace skyanchor::testing;

namespace {

const TagFamily& family() {
  static const TagFamily f = TagFamily::load(SKYANCHOR_DATA_DIR "/families/tagStandard41h12.txt");
  return f;
}

constexpr double kTagSize = 0.1;

// Smallest corner RMS over the four cyclic orderings of `quad`.
double best_cyclic_rms(const std::array<Vec2, 4>& quad, const std::array<Vec2, 4>& truth) {
  double best = 1e9;
  for (int r = 0; r < 4; ++r) {
    std::array<Vec2, 4> rotated;
    for (int i = 0; i < 4; ++i) rotated[i] = quad[(i + r) % 4];
    best = std::min(best, corner_rms(rotated, truth));
  }
  return best;
}

double max_corner_error(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  double m = 0.0;
  for (int i = 0; i < 4; ++i) m = std::max(m, (a[i] - b[i]).norm());
  return m;
}

Pose tilted(double distance, double rx, double ry, double rz) {
  Pose p = fronto_parallel(distance);
  p.rotation = rot_x(rx) * rot_y(ry) * rot_z(rz);
  return p;
}

}  // namespace

TEST_CASE("adaptive_threshold") {
  DetectorParams params;
  SUBCASE("uniform gray is entirely ambiguous") {
    const GrayImage img(64, 48, 128);
    const GrayImage bin = adaptive_threshold(img, params);
    for (auto v : bin.pixels()) CHECK(v == kBinaryAmbiguous);
    CHECK(find_quads(bin, params).empty());
  }
  SUBCASE("half black, half white") {
    GrayImage img(12, 12, 0);
    for (int y = 0; y < 12; ++y)
      for (int x = 6; x < 12; ++x) img.at(x, y) = 255;
    const GrayImage bin = adaptive_threshold(img, params);
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 12; ++x) CHECK(bin.at(x, y) == (x < 6 ? kBinaryBlack : kBinaryWhite));
    }
  }
  SUBCASE("rendered tag: outer ring black, inner ring white") {
    // Far tag: 7 px cells, so every cell center sees contrast. Near tag: big
    // cells leave their centers ambiguous, but nothing may be misclassified.
    const CameraIntrinsics k = desk_camera();
    const auto& layout = family().layout();
    for (const double distance : {1.7, 0.5}) {
      const Pose pose = tilted(distance, 15, -10, 30);
      const GrayImage img = render_tag(family(), 4, pose, k, kTagSize, 0.0);
      const GrayImage bin = adaptive_threshold(img, params);
      int classified = 0;
      for (int ring = -1; ring <= 0; ++ring) {
        const int lo = ring, hi = layout.width_at_border - 1 - ring;
        const auto expected = ring == 0 ? kBinaryWhite : kBinaryBlack;
        for (int cy = lo; cy <= hi; ++cy) {
          for (int cx = lo; cx <= hi; ++cx) {
            if (cx != lo && cx != hi && cy != lo && cy != hi) continue;
            const Vec2 center = layout.cell_center(cx, cy);
            const double q = 0.3 / layout.width_at_border;
            for (double du : {-q, 0.0, q}) {
              for (double dv : {-q, 0.0, q}) {
                const Vec2 px = project(k, pose, Vec3((center.x() + du) * kTagSize, (center.y() + dv) * kTagSize, 0.0));
                const auto v = bin.at(static_cast<int>(std::lround(px.x())), static_cast<int>(std::lround(px.y())));
                if (distance > 1.0 && du == 0.0 && dv == 0.0) CHECK(v == expected);
                if (v != kBinaryAmbiguous) {
                  CHECK(v == expected);
                  ++classified;
                }
              }
            }
          }
        }
      }
      CHECK(classified > 100);
    }
  }
  SUBCASE("too small") {
    CHECK_THROWS_AS(adaptive_threshold(GrayImage(3, 3, 0), params), Error);
  }
}

TEST_CASE("find_quads") {
  DetectorParams params;
  const CameraIntrinsics k = desk_camera();
  SUBCASE("blank image") {
    CHECK(find_quads(adaptive_threshold(GrayImage(640, 480, 200), params), params).empty());
  }
  SUBCASE("one rendered tag yields exactly one quad on the true corners") {
    for (const Pose& pose : {fronto_parallel(0.6), tilted(0.5, 25, 10, 70), tilted(0.7, -30, 20, 200)}) {
      const GrayImage img = render_tag(family(), 11, pose, k, kTagSize, 0.0);
      const auto quads = find_quads(adaptive_threshold(img, params), params);
      const auto truth = true_corners(pose, k, kTagSize);
      int matching = 0;
      for (const auto& q : quads)
        if (best_cyclic_rms(q.corners, truth) < 1.0) ++matching;
      CHECK(matching == 1);
      for (const auto& q : quads) {
        double area = 0.0;
        for (int i = 0; i < 4; ++i)
          area += q.corners[i].x() * q.corners[(i + 1) % 4].y() - q.corners[(i + 1) % 4].x() * q.corners[i].y();
        CHECK(area < 0.0);  // counter-clockwise on screen
      }
    }
  }
  SUBCASE("a filled triangle is rejected by the angle test") {
    GrayImage img(320, 240, 0);
    fill_polygon(img, {Vec2(60, 200), Vec2(260, 190), Vec2(150, 30)}, 255);
    CHECK(find_quads(adaptive_threshold(img, params), params).empty());
  }
}

TEST_CASE("homography_from_corners") {
  SUBCASE("canonical corners give the identity") {
    const Mat3 h = homography_from_corners(canonical_corners());
    CHECK((h - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("scaled and shifted square gives the similarity") {
    std::array<Vec2, 4> c;
    for (int i = 0; i < 4; ++i) c[i] = 100.0 * canonical_corners()[i] + Vec2(320, 240);
    Mat3 expected;
    expected << 100, 0, 320, 0, 100, 240, 0, 0, 1;
    CHECK((homography_from_corners(c) - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("random projective warps are reproduced") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      Mat3 warp;
      warp << 150 + 30 * u(rng), 20 * u(rng), 320 + 50 * u(rng),
              20 * u(rng), 150 + 30 * u(rng), 240 + 50 * u(rng),
              0.3 * u(rng), 0.3 * u(rng), 1.0;
      std::array<Vec2, 4> c;
      for (int i = 0; i < 4; ++i) c[i] = apply_homography(warp, canonical_corners()[i]);
      const Mat3 h = homography_from_corners(c);
      for (int i = 0; i < 4; ++i)
        CHECK((apply_homography(h, canonical_corners()[i]) - c[i]).norm() < 1e-8);
      CHECK(h(2, 2) == doctest::Approx(1.0));
    }
  }
  SUBCASE("collinear corners") {
    const std::array<Vec2, 4> c = {Vec2(0, 0), Vec2(1, 1), Vec2(2, 2), Vec2(3, 3)};
    try {
      homography_from_corners(c);
      FAIL("expected DegenerateCorners");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateCorners);
    }
    const std::array<Vec2, 4> three = {Vec2(0, 0), Vec2(10, 0), Vec2(20, 0), Vec2(5, 10)};
    CHECK_THROWS_AS(homography_from_corners(three), Error);
  }
}

TEST_CASE("decode") {
  DetectorParams params;
  const CameraIntrinsics k = desk_camera();
  const Pose pose = tilted(0.55, 10, 20, 15);
  const auto truth = true_corners(pose, k, kTagSize);
  QuadCandidate quad;
  quad.corners = {truth[2], truth[3], truth[0], truth[1]};  // arbitrary start

  SUBCASE("clean tag id 0") {
    const auto det = decode(render_tag(family(), 0, pose, k, kTagSize, 0.0), quad, family(), params);
    REQUIRE(det.has_value());
    CHECK(det->id == 0);
    CHECK(det->hamming == 0);
    CHECK(det->decision_margin > 50.0);
    CHECK(max_corner_error(det->corners, truth) < 1e-9);  // rotated back to tag order
  }
  SUBCASE("one inverted bit is corrected") {
    RenderOptions opts;
    opts.flipped_bits = {20};
    const auto det = decode(render_tag(family(), 0, pose, k, kTagSize, 0.0, opts), quad, family(), params);
    REQUIRE(det.has_value());
    CHECK(det->id == 0);
    CHECK(det->hamming == 1);
  }
  SUBCASE("max_hamming + 1 distant inverted bits are rejected") {
    RenderOptions opts;
    opts.flipped_bits = {0, 20, 40};  // top-left corner, bottom-right corner, center
    CHECK_FALSE(decode(render_tag(family(), 0, pose, k, kTagSize, 0.0, opts), quad, family(), params));
    opts.flipped_bits = {0, 20};
    const auto det = decode(render_tag(family(), 0, pose, k, kTagSize, 0.0, opts), quad, family(), params);
    REQUIRE(det.has_value());
    CHECK(det->hamming == 2);
  }
}

TEST_CASE("detect") {
  DetectorParams params;
  const CameraIntrinsics k = desk_camera();

  SUBCASE("blank image") {
    CHECK(detect(GrayImage(640, 480, 128), family(), params).empty());
  }
  SUBCASE("single tag id 7") {
    const Pose pose = tilted(0.6, 20, -15, 40);
    const auto dets = detect(render_tag(family(), 7, pose, k, kTagSize, 0.0), family(), params);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].id == 7);
    CHECK(dets[0].family == "tagStandard41h12");
    CHECK(corner_rms(dets[0].corners, true_corners(pose, k, kTagSize)) < 0.5);
  }
  SUBCASE("two tags") {
    GrayImage img(640, 480, kBackgroundGray);
    Pose left = tilted(0.7, 10, 10, 0);
    left.translation = Vec3(-0.16, 0.0, 0.7);
    Pose right = tilted(0.7, -10, 15, 60);
    right.translation = Vec3(0.16, 0.02, 0.7);
    render_tag_into(img, family(), 9, left, k, kTagSize);
    render_tag_into(img, family(), 3, right, k, kTagSize);
    const auto dets = detect(img, family(), params);
    REQUIRE(dets.size() == 2);
    CHECK(dets[0].id == 3);
    CHECK(dets[1].id == 9);
    CHECK(corner_rms(dets[0].corners, true_corners(right, k, kTagSize)) < 0.5);
    CHECK(corner_rms(dets[1].corners, true_corners(left, k, kTagSize)) < 0.5);
  }
  SUBCASE("too small") {
    CHECK_THROWS_AS(detect(GrayImage(2, 2, 0), family(), params), Error);
  }
  SUBCASE("invalid params") {
    DetectorParams bad;
    bad.max_hamming = 6;
    CHECK_THROWS_AS(detect(GrayImage(64, 64, 0), family(), bad), Error);
    bad = DetectorParams{};
    bad.threshold_tile = 1;
    CHECK_THROWS_AS(detect(GrayImage(64, 64, 0), family(), bad), Error);
  }
}

TEST_CASE("detection properties") {
  DetectorParams params;
  const CameraIntrinsics k = desk_camera();

  SUBCASE("in-plane rotation invariance") {
    for (int id : {1, 42, 2114}) {
      for (double rz : {0.0, 90.0, 180.0, 270.0}) {
        const Pose pose = tilted(0.6, 12, -8, rz);
        const auto dets = detect(render_tag(family(), id, pose, k, kTagSize, 0.0), family(), params);
        REQUIRE(dets.size() == 1);
        CHECK(dets[0].id == id);
        CHECK(corner_rms(dets[0].corners, true_corners(pose, k, kTagSize)) < 0.5);
      }
    }
  }

  SUBCASE("homography reproduces corners") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
      const Pose pose = random_tag_pose(rng, family(), k, kTagSize, 40.0, 0.4, 0.9);
      RenderOptions opts;
      opts.noise_seed = static_cast<std::uint64_t>(trial);
      for (const auto& det : detect(render_tag(family(), trial, pose, k, kTagSize, 3.0, opts), family(), params))
        for (int i = 0; i < 4; ++i)
          CHECK((apply_homography(det.homography, canonical_corners()[i]) - det.corners[i]).norm() < 1e-6);
    }
  }

  SUBCASE("detection count is non-increasing in noise") {
    GrayImage base(640, 480, kBackgroundGray);
    const std::array<Vec3, 4> positions = {Vec3(-0.17, -0.11, 0.75), Vec3(0.17, -0.11, 0.8),
                                           Vec3(-0.17, 0.12, 0.9), Vec3(0.17, 0.12, 1.0)};
    for (int i = 0; i < 4; ++i) {
      Pose p = tilted(1.0, 15.0 * i - 20.0, 10.0, 45.0 * i);
      p.translation = positions[i];
      render_tag_into(base, family(), 100 + i, p, k, kTagSize);
    }
    std::size_t previous = 1000;
    for (double sigma : {0.0, 2.0, 5.0, 10.0}) {
      GrayImage img = base;
      add_gaussian_noise(img, sigma, 77);
      const std::size_t count = detect(img, family(), params).size();
      CHECK(count <= previous);
      previous = count;
    }
  }

  SUBCASE("deterministic") {
    RenderOptions opts;
    opts.noise_seed = 4;
    const GrayImage img = render_tag(family(), 77, tilted(0.5, 30, 0, 10), k, kTagSize, 5.0, opts);
    const auto a = detect(img, family(), params);
    const auto b = detect(img, family(), params);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].decision_margin == b[i].decision_margin);
      for (int c = 0; c < 4; ++c) CHECK(a[i].corners[c] == b[i].corners[c]);
    }
  }
}

TEST_CASE("large tags near the camera") {
  // Wide cells leave only thin white strips after thresholding; the border
  // trace has to close on them.
  const auto k = desk_camera();
  const DetectorParams params;
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 30; ++trial) {
    const Pose pose = random_tag_pose(rng, family(), k, kTagSize, 60.0, 0.3, 0.45);
    const int id = 200 + trial;
    const auto dets = detect(render_tag(family(), id, pose, k, kTagSize, 0.0), family(), params);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].id == id);
    CHECK(corner_rms(dets[0].corners, true_corners(pose, k, kTagSize)) < 0.5);
  }
}
