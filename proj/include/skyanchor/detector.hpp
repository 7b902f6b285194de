#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skyanchor/geometry.hpp"
#include "skyanchor/image.hpp"
#include "skyanchor/tag_family.hpp"

namespace skyanchor {

struct DetectorParams {
  int threshold_tile = 4;
  int min_contrast = 20;
  double quad_min_area = 64.0;
  double quad_max_cos = 0.95;
  int max_hamming = 2;
  bool refine_corners = true;

  /// Throws InvalidParams; the Hamming bound needs the family.
  void validate(const TagFamily& family) const;
};

/// Values in the thresholded map.
inline constexpr std::uint8_t kBinaryBlack = 0;
inline constexpr std::uint8_t kBinaryAmbiguous = 127;
inline constexpr std::uint8_t kBinaryWhite = 255;

struct QuadCandidate {
  /// Counter-clockwise as seen in the image (negative shoelace area with
  /// +y down). The starting corner is arbitrary until decoded.
  std::array<Vec2, 4> corners;
};

struct TagDetection {
  std::string family;
  int id = -1;
  /// Projections of the tag-frame corners (-s/2, s/2), (s/2, s/2),
  /// (s/2, -s/2), (-s/2, -s/2): bottom-left first, counter-clockwise.
  std::array<Vec2, 4> corners;
  Vec2 center = Vec2::Zero();
  /// Maps tag-unit coordinates (border square = [-1/2, 1/2]^2) to pixels.
  Mat3 homography = Mat3::Identity();
  int hamming = 0;
  double decision_margin = 0.0;
};

/// Canonical tag-unit corners in detection order.
const std::array<Vec2, 4>& canonical_corners();

/// Per-tile min/max threshold. Output pixels are kBinaryBlack, kBinaryWhite
/// or kBinaryAmbiguous (tile neighbourhood contrast below min_contrast).
GrayImage adaptive_threshold(const GrayImage& img, const DetectorParams& params);

/// Quads traced from connected components of the interior color: white for
/// reversed-border families, black otherwise.
std::vector<QuadCandidate> find_quads(const GrayImage& binary, const DetectorParams& params,
                                      bool white_interior = true);

/// Sub-pixel corners from gradient-weighted line fits along each edge.
/// Returns the input unchanged when an edge has no usable gradient.
QuadCandidate refine_quad(const GrayImage& img, const QuadCandidate& quad,
                          bool white_interior = true);

/// Maps canonical corners onto `corners` (normalized DLT). The result is
/// scaled so that H(2,2) = 1 whenever that entry is nonzero.
Mat3 homography_from_corners(const std::array<Vec2, 4>& corners);

/// Applies a homography to a 2D point.
Vec2 apply_homography(const Mat3& h, const Vec2& p);

std::optional<TagDetection> decode(const GrayImage& img, const QuadCandidate& quad,
                                   const TagFamily& family, const DetectorParams& params);

std::vector<TagDetection> detect(const GrayImage& img, const TagFamily& family,
                                 const DetectorParams& params = {});

}  // namespace skyanchor
