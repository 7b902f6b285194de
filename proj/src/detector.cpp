#include "skyanchor/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "skyanchor/error.hpp"

namespace skyanchor {

void DetectorParams::validate(const TagFamily& family) const {
  if (threshold_tile < 2) fail(ErrorCode::InvalidParams, "threshold_tile must be >= 2");
  if (min_contrast < 0 || min_contrast > 255)
    fail(ErrorCode::InvalidParams, "min_contrast must be within [0, 255]");
  if (!(quad_min_area >= 0.0)) fail(ErrorCode::InvalidParams, "quad_min_area must be >= 0");
  if (!(quad_max_cos > 0.0 && quad_max_cos <= 1.0))
    fail(ErrorCode::InvalidParams, "quad_max_cos must be within (0, 1]");
  if (max_hamming < 0 || max_hamming > (family.min_hamming() - 1) / 2)
    fail(ErrorCode::InvalidParams, "max_hamming exceeds the family's correction capacity");
}

const std::array<Vec2, 4>& canonical_corners() {
  static const std::array<Vec2, 4> corners = {Vec2(-0.5, 0.5), Vec2(0.5, 0.5),
                                              Vec2(0.5, -0.5), Vec2(-0.5, -0.5)};
  return corners;
}

// ---------------------------------------------------------------------------
// Thresholding

GrayImage adaptive_threshold(const GrayImage& img, const DetectorParams& params) {
  const int ts = params.threshold_tile;
  if (ts < 2) fail(ErrorCode::InvalidParams, "threshold_tile must be >= 2");
  if (img.width() < ts || img.height() < ts)
    fail(ErrorCode::ImageTooSmall, "image smaller than one threshold tile");

  const int tw = (img.width() + ts - 1) / ts;
  const int th = (img.height() + ts - 1) / ts;
  std::vector<std::uint8_t> tmin(static_cast<std::size_t>(tw * th), 255);
  std::vector<std::uint8_t> tmax(static_cast<std::size_t>(tw * th), 0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const std::size_t t = static_cast<std::size_t>((y / ts) * tw + x / ts);
      const std::uint8_t v = img.at(x, y);
      tmin[t] = std::min(tmin[t], v);
      tmax[t] = std::max(tmax[t], v);
    }
  }

  // Widen each tile's extrema over its 3x3 tile neighbourhood so that edges
  // falling on tile boundaries still see both sides.
  std::vector<std::uint8_t> nmin(tmin.size()), nmax(tmax.size());
  for (int ty = 0; ty < th; ++ty) {
    for (int tx = 0; tx < tw; ++tx) {
      std::uint8_t lo = 255, hi = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = tx + dx, ny = ty + dy;
          if (nx < 0 || ny < 0 || nx >= tw || ny >= th) continue;
          const std::size_t t = static_cast<std::size_t>(ny * tw + nx);
          lo = std::min(lo, tmin[t]);
          hi = std::max(hi, tmax[t]);
        }
      }
      nmin[static_cast<std::size_t>(ty * tw + tx)] = lo;
      nmax[static_cast<std::size_t>(ty * tw + tx)] = hi;
    }
  }

  GrayImage out(img.width(), img.height(), kBinaryAmbiguous);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const std::size_t t = static_cast<std::size_t>((y / ts) * tw + x / ts);
      const int lo = nmin[t], hi = nmax[t];
      if (hi - lo < params.min_contrast) continue;
      const int thresh = lo + (hi - lo) / 2;
      out.at(x, y) = img.at(x, y) > thresh ? kBinaryWhite : kBinaryBlack;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation and quad fitting

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
};

struct Component {
  int start_x = 0;
  int start_y = 0;
  int count = 0;
  bool touches_border = false;
};

// Moore-neighbour directions, clockwise on screen (+y down), starting west.
constexpr int kDx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};

int direction_of(int dx, int dy) {
  for (int d = 0; d < 8; ++d)
    if (kDx[d] == dx && kDy[d] == dy) return d;
  return 0;
}

template <typename Member>
std::vector<Vec2> trace_boundary(int sx, int sy, std::size_t max_steps, Member&& member) {
  std::vector<Vec2> boundary;
  boundary.emplace_back(sx, sy);
  // The start pixel is the first in raster order, so its west neighbour is
  // outside the component.
  int cx = sx, cy = sy;
  int back = 0;
  int first_move = -1;
  for (std::size_t step = 0; step < max_steps; ++step) {
    int next = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      if (member(cx + kDx[d], cy + kDy[d])) {
        next = d;
        break;
      }
    }
    if (next < 0) break;  // isolated pixel
    // Back at the start and about to repeat the first move: closed.
    if (cx == sx && cy == sy) {
      if (next == first_move) {
        boundary.pop_back();
        break;
      }
      if (first_move < 0) first_move = next;
    }
    const int prev = (next + 7) % 8;
    const int bx = cx + kDx[prev], by = cy + kDy[prev];
    cx += kDx[next];
    cy += kDy[next];
    back = direction_of(bx - cx, by - cy);
    boundary.emplace_back(cx, cy);
  }
  return boundary;
}

struct Line {
  Vec2 point;
  Vec2 direction;  // unit
};

std::optional<Line> fit_line(const std::vector<Vec2>& pts, const std::vector<double>* weights = nullptr) {
  double wsum = 0.0;
  Vec2 mean = Vec2::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    mean += w * pts[i];
    wsum += w;
  }
  if (pts.size() < 2 || wsum <= 0.0) return std::nullopt;
  mean /= wsum;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    const Vec2 d = pts[i] - mean;
    cov += w * d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  return Line{mean, eig.eigenvectors().col(1).normalized()};
}

std::optional<Vec2> intersect(const Line& a, const Line& b) {
  const double denom = a.direction.x() * b.direction.y() - a.direction.y() * b.direction.x();
  if (std::abs(denom) < 1e-6) return std::nullopt;
  const Vec2 d = b.point - a.point;
  const double t = (d.x() * b.direction.y() - d.y() * b.direction.x()) / denom;
  return a.point + t * a.direction;
}

double signed_area(const std::array<Vec2, 4>& c) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& p = c[i];
    const Vec2& q = c[(i + 1) % 4];
    s += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * s;
}

Vec2 centroid(const std::array<Vec2, 4>& c) {
  return 0.25 * (c[0] + c[1] + c[2] + c[3]);
}

bool quad_shape_ok(const std::array<Vec2, 4>& c, const DetectorParams& params) {
  if (std::abs(signed_area(c)) < params.quad_min_area) return false;
  double cross_sign = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2 a = c[(i + 3) % 4] - c[i];
    const Vec2 b = c[(i + 1) % 4] - c[i];
    const double na = a.norm(), nb = b.norm();
    if (na < 1e-9 || nb < 1e-9) return false;
    const double cosang = a.dot(b) / (na * nb);
    if (std::abs(cosang) > params.quad_max_cos) return false;
    const double cr = a.x() * b.y() - a.y() * b.x();
    if (cross_sign != 0.0 && (cr > 0.0) != (cross_sign > 0.0)) return false;  // non-convex
    cross_sign = cr;
  }
  return true;
}

// Corner hypothesis from extreme boundary points, then line fits on the four
// arcs between them. Pixel centres of the boundary sit half a pixel inside
// the true edge on average, so each line is pushed outward by 0.5 px.
std::optional<QuadCandidate> fit_quad(const std::vector<Vec2>& boundary, const DetectorParams& params) {
  const std::size_t n = boundary.size();
  if (n < 12) return std::nullopt;

  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : boundary) mean += p;
  mean /= static_cast<double>(n);

  const auto farthest_from = [&](const Vec2& q) {
    std::size_t best = 0;
    double bd = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (boundary[i] - q).squaredNorm();
      if (d > bd) {
        bd = d;
        best = i;
      }
    }
    return best;
  };
  // Distance of boundary point i from the chord a-b.
  const auto chord_dist = [&](std::size_t a, std::size_t b, std::size_t i) {
    const Vec2 d = boundary[b % n] - boundary[a % n];
    const double len = d.norm();
    if (len < 1e-9) return (boundary[i % n] - boundary[a % n]).norm();
    const Vec2 r = boundary[i % n] - boundary[a % n];
    return std::abs(d.x() * r.y() - d.y() * r.x()) / len;
  };
  // Index of the point strictly between a and b (walking forward) farthest
  // from their chord.
  const auto arc_peak = [&](std::size_t a, std::size_t b) {
    if (b <= a) b += n;
    std::size_t best = a;
    double bd = -1.0;
    for (std::size_t i = a + 1; i < b; ++i) {
      const double d = chord_dist(a, b, i);
      if (d > bd) {
        bd = d;
        best = i % n;
      }
    }
    return std::pair{best, bd};
  };

  const std::size_t i0 = farthest_from(mean);
  const std::size_t i2 = farthest_from(boundary[i0]);
  if (i0 == i2) return std::nullopt;
  // Two peaks, one on each side of i0-i2; if i0 and i2 are adjacent corners
  // one side is flat and the missing corner sits on the other side.
  std::vector<std::size_t> idx = {i0, i2};
  auto [p1, d1] = arc_peak(i0, i2);
  auto [p3, d3] = arc_peak(i2, i0);
  if (d1 >= 1.0) idx.push_back(p1);
  if (d3 >= 1.0) idx.push_back(p3);
  if (idx.size() < 3) return std::nullopt;
  std::sort(idx.begin(), idx.end());
  if (idx.size() == 3) {
    std::size_t best = 0;
    double bd = -1.0;
    for (int e = 0; e < 3; ++e) {
      auto [pk, dk] = arc_peak(idx[e], idx[(e + 1) % 3]);
      if (dk > bd) {
        bd = dk;
        best = pk;
      }
    }
    if (bd < 1.0) return std::nullopt;
    idx.push_back(best);
    std::sort(idx.begin(), idx.end());
  }
  // Each corner moves to the peak of the arc between its neighbours until
  // nothing changes.
  for (int iter = 0; iter < 8; ++iter) {
    bool moved = false;
    for (int e = 0; e < 4; ++e) {
      const std::size_t prev = idx[(e + 3) % 4], next = idx[(e + 1) % 4];
      const std::size_t peak = arc_peak(prev, next).first;
      if (peak != idx[e]) {
        idx[e] = peak;
        moved = true;
      }
    }
    if (!moved) break;
  }
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) return std::nullopt;

  Vec2 center = Vec2::Zero();
  for (std::size_t k : idx) center += boundary[k];
  center /= 4.0;

  std::array<Line, 4> lines;
  for (int e = 0; e < 4; ++e) {
    const std::size_t a = idx[e];
    const std::size_t b = (e == 3) ? idx[0] + n : idx[e + 1];
    const std::size_t len = b - a;
    const std::size_t trim = len / 6;
    std::vector<Vec2> arc;
    for (std::size_t i = a + trim; i <= b - trim; ++i) arc.push_back(boundary[i % n]);
    if (arc.size() < 3) return std::nullopt;
    auto line = fit_line(arc);
    if (!line) return std::nullopt;

    double sq = 0.0;
    const Vec2 nrm(-line->direction.y(), line->direction.x());
    for (const Vec2& p : arc) {
      const double d = nrm.dot(p - line->point);
      sq += d * d;
    }
    if (std::sqrt(sq / static_cast<double>(arc.size())) > 1.0) return std::nullopt;

    Vec2 outward = nrm;
    if (outward.dot(line->point - center) < 0.0) outward = -outward;
    line->point += 0.5 * outward;
    lines[e] = *line;
  }

  QuadCandidate quad;
  for (int e = 0; e < 4; ++e) {
    auto c = intersect(lines[(e + 3) % 4], lines[e]);
    if (!c) return std::nullopt;
    quad.corners[e] = *c;
  }
  if (signed_area(quad.corners) > 0.0) std::swap(quad.corners[1], quad.corners[3]);
  if (!quad_shape_ok(quad.corners, params)) return std::nullopt;
  return quad;
}

}  // namespace

std::vector<QuadCandidate> find_quads(const GrayImage& binary, const DetectorParams& params,
                                      bool white_interior) {
  const int w = binary.width(), h = binary.height();
  std::vector<QuadCandidate> quads;
  if (w == 0 || h == 0) return quads;
  const std::uint8_t target = white_interior ? kBinaryWhite : kBinaryBlack;

  DisjointSets sets(static_cast<std::size_t>(w) * h);
  const auto id = [w](int x, int y) { return static_cast<std::uint32_t>(y * w + x); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (binary.at(x, y) != target) continue;
      if (x > 0 && binary.at(x - 1, y) == target) sets.unite(id(x, y), id(x - 1, y));
      if (y > 0 && binary.at(x, y - 1) == target) sets.unite(id(x, y), id(x, y - 1));
    }
  }

  std::unordered_map<std::uint32_t, Component> components;
  std::vector<std::uint32_t> order;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (binary.at(x, y) != target) continue;
      const std::uint32_t root = sets.find(id(x, y));
      auto [it, inserted] = components.try_emplace(root);
      Component& c = it->second;
      if (inserted) {
        c.start_x = x;
        c.start_y = y;
        order.push_back(root);
      }
      ++c.count;
      if (x == 0 || y == 0 || x == w - 1 || y == h - 1) c.touches_border = true;
    }
  }

  for (std::uint32_t root : order) {
    const Component& c = components.at(root);
    if (c.touches_border || c.count < 16) continue;
    auto member = [&](int x, int y) {
      return x >= 0 && y >= 0 && x < w && y < h && binary.at(x, y) == target &&
             sets.find(id(x, y)) == root;
    };
    const auto boundary =
        trace_boundary(c.start_x, c.start_y, static_cast<std::size_t>(4 * c.count + 16), member);
    if (auto quad = fit_quad(boundary, params)) quads.push_back(*quad);
  }
  return quads;
}

QuadCandidate refine_quad(const GrayImage& img, const QuadCandidate& quad, bool white_interior) {
  const Vec2 center = centroid(quad.corners);
  const double polarity = white_interior ? 1.0 : -1.0;
  constexpr double kRange = 2.0;
  constexpr double kStep = 0.25;
  constexpr double kGradSpan = 1.0;

  std::array<Line, 4> lines;
  for (int e = 0; e < 4; ++e) {
    const Vec2& a = quad.corners[e];
    const Vec2& b = quad.corners[(e + 1) % 4];
    const double len = (b - a).norm();
    if (len < 4.0) return quad;
    const Vec2 dir = (b - a) / len;
    Vec2 outward(-dir.y(), dir.x());
    if (outward.dot(0.5 * (a + b) - center) < 0.0) outward = -outward;

    const int nsamples = std::max(8, static_cast<int>(len));
    std::vector<Vec2> pts;
    std::vector<double> weights;
    for (int s = 0; s < nsamples; ++s) {
      const double t = 0.1 + 0.8 * (s + 0.5) / nsamples;
      const Vec2 p0 = a + t * len * dir;
      double msum = 0.0, wsum = 0.0;
      for (double off = -kRange; off <= kRange + 1e-9; off += kStep) {
        const Vec2 inner = p0 + (off - kGradSpan) * outward;
        const Vec2 outer = p0 + (off + kGradSpan) * outward;
        const double g = polarity * (img.sample(inner.x(), inner.y()) - img.sample(outer.x(), outer.y()));
        if (g <= 0.0) continue;
        const double wgt = g * g;
        msum += wgt * off;
        wsum += wgt;
      }
      if (wsum <= 0.0) continue;
      pts.push_back(p0 + (msum / wsum) * outward);
      weights.push_back(wsum);
    }
    if (pts.size() < 4) return quad;
    auto line = fit_line(pts, &weights);
    if (!line) return quad;
    lines[e] = *line;
  }

  QuadCandidate refined;
  for (int e = 0; e < 4; ++e) {
    auto c = intersect(lines[(e + 3) % 4], lines[e]);
    if (!c || (*c - quad.corners[e]).norm() > 3.0) return quad;
    refined.corners[e] = *c;
  }
  return refined;
}

// ---------------------------------------------------------------------------
// Homography

Vec2 apply_homography(const Mat3& h, const Vec2& p) {
  const Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

Mat3 homography_from_corners(const std::array<Vec2, 4>& corners) {
  for (const Vec2& c : corners)
    if (!c.allFinite()) fail(ErrorCode::DegenerateCorners, "non-finite corner");

  // Hartley normalisation of the destination points; the canonical source
  // square maps to (+-1, +-1) with a factor of 2.
  Vec2 mean = Vec2::Zero();
  for (const Vec2& c : corners) mean += c;
  mean /= 4.0;
  double spread = 0.0;
  for (const Vec2& c : corners) spread += (c - mean).norm();
  spread /= 4.0;
  if (spread < 1e-12) fail(ErrorCode::DegenerateCorners, "corners coincide");
  const double scale = std::sqrt(2.0) / spread;
  Mat3 t_dst;
  t_dst << scale, 0.0, -scale * mean.x(),
           0.0, scale, -scale * mean.y(),
           0.0, 0.0, 1.0;
  const Mat3 t_src = Eigen::Vector3d(2.0, 2.0, 1.0).asDiagonal();

  Eigen::Matrix<double, 9, 9> a = Eigen::Matrix<double, 9, 9>::Zero();
  const auto& src = canonical_corners();
  for (int i = 0; i < 4; ++i) {
    const double x = 2.0 * src[i].x(), y = 2.0 * src[i].y();
    const double u = scale * (corners[i].x() - mean.x());
    const double v = scale * (corners[i].y() - mean.y());
    a.row(2 * i) << -x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 9, 9>> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(7) / sv(0) < 1e-10)
    fail(ErrorCode::DegenerateCorners, "corner configuration is rank-deficient");

  const Eigen::Matrix<double, 9, 1> hv = svd.matrixV().col(8);
  Mat3 hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  Eigen::JacobiSVD<Mat3> hsvd(hn);
  if (hsvd.singularValues()(2) / hsvd.singularValues()(0) < 1e-10)
    fail(ErrorCode::DegenerateCorners, "corners are collinear");

  Mat3 h = t_dst.inverse() * hn * t_src;
  if (std::abs(h(2, 2)) > 1e-12) h /= h(2, 2);
  return h;
}

// ---------------------------------------------------------------------------
// Decoding

namespace {

// Intensity model over the tag plane, I = c0 + c1 * u + c2 * v.
struct PlanarModel {
  Vec3 coeffs = Vec3::Zero();
  double mean = 0.0;

  double at(const Vec2& p) const { return coeffs(0) + coeffs(1) * p.x() + coeffs(2) * p.y(); }

  static PlanarModel fit(const std::vector<Vec2>& pts, const std::vector<double>& values) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), 3);
    Eigen::VectorXd b(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      a.row(static_cast<Eigen::Index>(i)) << 1.0, pts[i].x(), pts[i].y();
      b(static_cast<Eigen::Index>(i)) = values[i];
    }
    PlanarModel m;
    m.coeffs = a.colPivHouseholderQr().solve(b);
    m.mean = b.mean();
    return m;
  }
};

double sample_cell(const GrayImage& img, const Mat3& h, const TagLayout& layout, int cx, int cy) {
  const Vec2 c = layout.cell_center(cx, cy);
  const double q = 0.25 / layout.width_at_border;
  static constexpr double kOffsets[5][2] = {{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  double acc = 0.0;
  for (const auto& o : kOffsets) {
    const Vec2 px = apply_homography(h, c + Vec2(o[0] * q, o[1] * q));
    acc += img.sample(px.x(), px.y());
  }
  return acc / 5.0;
}

}  // namespace

std::optional<TagDetection> decode(const GrayImage& img, const QuadCandidate& quad,
                                   const TagFamily& family, const DetectorParams& params) {
  const TagLayout& layout = family.layout();
  const int wab = layout.width_at_border;

  std::array<std::array<Vec2, 4>, 4> rotated;
  std::array<Mat3, 4> homographies;
  for (int r = 0; r < 4; ++r) {
    for (int i = 0; i < 4; ++i) rotated[r][i] = quad.corners[(i + r) % 4];
    try {
      homographies[r] = homography_from_corners(rotated[r]);
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  // Black/white reference from the two rings either side of the detection
  // edge. The ring set is rotation invariant so one homography suffices.
  std::vector<Vec2> black_pts, white_pts;
  std::vector<double> black_vals, white_vals;
  for (int ring = -1; ring <= 0; ++ring) {
    const int lo = ring, hi = wab - 1 - ring;
    for (int cy = lo; cy <= hi; ++cy) {
      for (int cx = lo; cx <= hi; ++cx) {
        if (cx != lo && cx != hi && cy != lo && cy != hi) continue;
        const bool ring_white = (ring == 0) == layout.reversed_border;
        const double v = sample_cell(img, homographies[0], layout, cx, cy);
        const Vec2 pos = layout.cell_center(cx, cy);
        (ring_white ? white_pts : black_pts).push_back(pos);
        (ring_white ? white_vals : black_vals).push_back(v);
      }
    }
  }
  const PlanarModel black = PlanarModel::fit(black_pts, black_vals);
  const PlanarModel white = PlanarModel::fit(white_pts, white_vals);
  if (white.mean - black.mean < params.min_contrast) return std::nullopt;

  const int nbits = family.bits_per_tag();
  int best_distance = nbits + 1;
  int best_id = -1;
  int best_rotation = 0;
  double best_margin = 0.0;
  for (int r = 0; r < 4; ++r) {
    std::uint64_t observed = 0;
    double margin = 0.0;
    for (int i = 0; i < nbits; ++i) {
      const CellCoord cell = layout.bits[i];
      const Vec2 pos = layout.cell_center(cell.x, cell.y);
      const double threshold = 0.5 * (black.at(pos) + white.at(pos));
      const double v = sample_cell(img, homographies[r], layout, cell.x, cell.y) - threshold;
      observed = (observed << 1) | (v > 0.0 ? 1ULL : 0ULL);
      margin += std::abs(v);
    }
    const auto& codes = family.codes();
    for (std::size_t id = 0; id < codes.size(); ++id) {
      const int d = hamming_distance(observed, codes[id]);
      if (d < best_distance) {
        best_distance = d;
        best_id = static_cast<int>(id);
        best_rotation = r;
        best_margin = margin / nbits;
      }
    }
  }
  if (best_id < 0 || best_distance > params.max_hamming) return std::nullopt;

  TagDetection det;
  det.family = family.name();
  det.id = best_id;
  det.corners = rotated[best_rotation];
  det.homography = homographies[best_rotation];
  det.center = apply_homography(det.homography, Vec2::Zero());
  det.hamming = best_distance;
  det.decision_margin = best_margin;
  return det;
}

std::vector<TagDetection> detect(const GrayImage& img, const TagFamily& family,
                                 const DetectorParams& params) {
  params.validate(family);
  const bool white_interior = family.layout().reversed_border;
  const GrayImage binary = adaptive_threshold(img, params);
  std::vector<TagDetection> found;
  for (QuadCandidate quad : find_quads(binary, params, white_interior)) {
    if (params.refine_corners) quad = refine_quad(img, quad, white_interior);
    if (auto det = decode(img, quad, family, params)) found.push_back(std::move(*det));
  }

  // Keep the strongest of detections that share an id and a location.
  std::sort(found.begin(), found.end(), [](const TagDetection& a, const TagDetection& b) {
    return a.decision_margin > b.decision_margin;
  });
  std::vector<TagDetection> kept;
  for (auto& det : found) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const TagDetection& k) {
      return k.id == det.id && (k.center - det.center).norm() < 5.0;
    });
    if (!duplicate) kept.push_back(std::move(det));
  }
  std::stable_sort(kept.begin(), kept.end(), [](const TagDetection& a, const TagDetection& b) {
    if (a.id != b.id) return a.id < b.id;
    return a.decision_margin > b.decision_margin;
  });
  return kept;
}

}  // namespace skyanchor
