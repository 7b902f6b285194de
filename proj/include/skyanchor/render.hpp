#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "skyanchor/geometry.hpp"
#include "skyanchor/image.hpp"
#include "skyanchor/tag_family.hpp"

namespace skyanchor {

// Synthetic tag renderer. It is the ground truth for detector and pose tests,
// so it shares nothing with the detector beyond the pinhole model and the
// family's printed-cell layout.
//
// tag_size is the side of the detection border square in meters; the printed
// pattern extends total_width / width_at_border times further.

inline constexpr std::uint8_t kBackgroundGray = 128;

struct RenderOptions {
  /// Codeword bits (layout index) printed inverted.
  std::vector<int> flipped_bits;
  /// Samples per pixel along each axis.
  int supersample = 4;
  std::uint64_t noise_seed = 0;
};

/// Tag-frame corners of the border square in the detection corner order
/// (bottom-left, bottom-right, top-right, top-left with +y pointing down).
std::array<Vec3, 4> tag_corner_points(double tag_size);

/// Renders one tag on a mid-gray background and adds Gaussian noise.
GrayImage render_tag(const TagFamily& family, int id, const Pose& tag_to_camera,
                     const CameraIntrinsics& k, double tag_size, double noise_sigma,
                     const RenderOptions& options = {});

/// Draws a tag into an existing image without noise. Pixels only partially
/// covered blend with what is already there.
void render_tag_into(GrayImage& img, const TagFamily& family, int id,
                     const Pose& tag_to_camera, const CameraIntrinsics& k,
                     double tag_size, const RenderOptions& options = {});

/// Adds zero-mean Gaussian noise, clamped to [0, 255]. Sigma 0 is a no-op.
void add_gaussian_noise(GrayImage& img, double sigma, std::uint64_t seed);

/// Antialiased filled convex or concave polygon (even-odd rule).
void fill_polygon(GrayImage& img, const std::vector<Vec2>& vertices,
                  std::uint8_t value, int supersample = 4);

}  // namespace skyanchor
