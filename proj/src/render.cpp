#include "skyanchor/render.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include <Eigen/LU>

#include "skyanchor/error.hpp"

namespace skyanchor {

std::array<Vec3, 4> tag_corner_points(double tag_size) {
  const double h = tag_size / 2.0;
  return {Vec3(-h, h, 0.0), Vec3(h, h, 0.0), Vec3(h, -h, 0.0), Vec3(-h, -h, 0.0)};
}

namespace {

struct CellGrid {
  int offset = 0;
  int width = 0;
  std::vector<std::optional<bool>> white;

  std::optional<bool> lookup(int cx, int cy) const {
    const int gx = cx + offset;
    const int gy = cy + offset;
    if (gx < 0 || gy < 0 || gx >= width || gy >= width) return std::nullopt;
    return white[static_cast<std::size_t>(gy * width + gx)];
  }
};

CellGrid build_grid(const TagFamily& family, std::uint64_t code) {
  const TagLayout& layout = family.layout();
  CellGrid grid;
  grid.offset = layout.margin();
  grid.width = layout.total_width;
  grid.white.resize(static_cast<std::size_t>(grid.width * grid.width));
  for (int gy = 0; gy < grid.width; ++gy)
    for (int gx = 0; gx < grid.width; ++gx)
      grid.white[static_cast<std::size_t>(gy * grid.width + gx)] =
          family.cell_is_white(code, gx - grid.offset, gy - grid.offset);
  return grid;
}

void draw(GrayImage& img, const TagFamily& family, int id, const Pose& pose,
          const CameraIntrinsics& k, double tag_size, const RenderOptions& options) {
  if (!(tag_size > 0.0)) fail(ErrorCode::NonPositiveTagSize, "tag size must be positive");
  k.validate();
  std::uint64_t code = family.code(id);
  const int nbits = family.bits_per_tag();
  for (int bit : options.flipped_bits) {
    if (bit < 0 || bit >= nbits) fail(ErrorCode::IdOutOfRange, "flipped bit index out of range");
    code ^= 1ULL << (nbits - 1 - bit);
  }
  const CellGrid grid = build_grid(family, code);
  const TagLayout& layout = family.layout();

  // Printed extent in tag units, then the frustum check on its corners.
  const double half_extent = 0.5 * layout.total_width / layout.width_at_border;
  double umin = img.width(), umax = -1.0, vmin = img.height(), vmax = -1.0;
  for (int i = 0; i < 4; ++i) {
    const double sx = (i == 1 || i == 2) ? 1.0 : -1.0;
    const double sy = (i >= 2) ? 1.0 : -1.0;
    const Vec3 corner(sx * half_extent * tag_size, sy * half_extent * tag_size, 0.0);
    if (pose.apply(corner).z() <= 1e-9)
      fail(ErrorCode::TagOutsideFrustum, "tag extends behind the camera");
    const Vec2 px = project(k, pose, corner);
    if (px.x() < 0.0 || px.y() < 0.0 || px.x() > img.width() - 1.0 ||
        px.y() > img.height() - 1.0)
      fail(ErrorCode::TagOutsideFrustum, "tag not fully inside the image");
    umin = std::min(umin, px.x());
    umax = std::max(umax, px.x());
    vmin = std::min(vmin, px.y());
    vmax = std::max(vmax, px.y());
  }

  // Tag-unit plane point (a, b, 1) -> pixel via K [s r1, s r2, t].
  Mat3 plane_to_px;
  plane_to_px.col(0) = tag_size * pose.rotation.col(0);
  plane_to_px.col(1) = tag_size * pose.rotation.col(1);
  plane_to_px.col(2) = pose.translation;
  plane_to_px = k.matrix() * plane_to_px;
  const Mat3 px_to_plane = plane_to_px.inverse();

  const int n = std::max(1, options.supersample);
  const double wab = layout.width_at_border;
  const int x0 = std::max(0, static_cast<int>(std::floor(umin)) - 1);
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(umax)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(vmin)) - 1);
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(vmax)) + 1);

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double acc = 0.0;
      int covered = 0;
      for (int sy = 0; sy < n; ++sy) {
        for (int sx = 0; sx < n; ++sx) {
          const double px = x + (sx + 0.5) / n - 0.5;
          const double py = y + (sy + 0.5) / n - 0.5;
          const Vec3 q = px_to_plane * Vec3(px, py, 1.0);
          const double a = q.x() / q.z();
          const double b = q.y() / q.z();
          const auto cell = grid.lookup(static_cast<int>(std::floor((a + 0.5) * wab)),
                                        static_cast<int>(std::floor((b + 0.5) * wab)));
          if (!cell) continue;
          acc += *cell ? 255.0 : 0.0;
          ++covered;
        }
      }
      if (covered == 0) continue;
      const double total = n * n;
      const double value = (acc + (total - covered) * img.at(x, y)) / total;
      img.at(x, y) = static_cast<std::uint8_t>(std::lround(value));
    }
  }
}

}  // namespace

GrayImage render_tag(const TagFamily& family, int id, const Pose& tag_to_camera,
                     const CameraIntrinsics& k, double tag_size, double noise_sigma,
                     const RenderOptions& options) {
  k.validate();
  GrayImage img(k.width, k.height, kBackgroundGray);
  draw(img, family, id, tag_to_camera, k, tag_size, options);
  add_gaussian_noise(img, noise_sigma, options.noise_seed);
  return img;
}

void render_tag_into(GrayImage& img, const TagFamily& family, int id,
                     const Pose& tag_to_camera, const CameraIntrinsics& k,
                     double tag_size, const RenderOptions& options) {
  draw(img, family, id, tag_to_camera, k, tag_size, options);
}

void add_gaussian_noise(GrayImage& img, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& p : img.pixels()) {
    const double v = std::clamp(p + noise(rng), 0.0, 255.0);
    p = static_cast<std::uint8_t>(std::lround(v));
  }
}

void fill_polygon(GrayImage& img, const std::vector<Vec2>& vertices,
                  std::uint8_t value, int supersample) {
  if (vertices.size() < 3) return;
  const auto inside = [&](double px, double py) {
    bool in = false;
    for (std::size_t i = 0, j = vertices.size() - 1; i < vertices.size(); j = i++) {
      const Vec2& a = vertices[i];
      const Vec2& b = vertices[j];
      if ((a.y() > py) != (b.y() > py) &&
          px < (b.x() - a.x()) * (py - a.y()) / (b.y() - a.y()) + a.x())
        in = !in;
    }
    return in;
  };
  const int n = std::max(1, supersample);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      int hits = 0;
      for (int sy = 0; sy < n; ++sy)
        for (int sx = 0; sx < n; ++sx)
          if (inside(x + (sx + 0.5) / n - 0.5, y + (sy + 0.5) / n - 0.5)) ++hits;
      if (hits == 0) continue;
      const double f = static_cast<double>(hits) / (n * n);
      img.at(x, y) = static_cast<std::uint8_t>(std::lround(f * value + (1.0 - f) * img.at(x, y)));
    }
  }
}

}  // namespace skyanchor
