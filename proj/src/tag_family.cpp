#include "skyanchor/tag_family.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <fstream>
#include <regex>

#include "skyanchor/error.hpp"

namespace skyanchor {

Vec2 TagLayout::cell_center(int cx, int cy) const {
  const double w = width_at_border;
  return {(cx + 0.5) / w - 0.5, (cy + 0.5) / w - 0.5};
}

namespace {

// Bit positions of the tagStandard41h12 family as published by the AprilTag
// reference implementation (BSD-2, see data/families/LICENSE.apriltag.md).
TagLayout standard41h12_layout() {
  TagLayout layout;
  layout.width_at_border = 5;
  layout.total_width = 9;
  layout.reversed_border = true;
  layout.bits = {
      {-2, -2}, {-1, -2}, {0, -2}, {1, -2}, {2, -2}, {3, -2}, {4, -2}, {5, -2},
      {1, 1},   {2, 1},   {6, -2}, {6, -1}, {6, 0},  {6, 1},  {6, 2},  {6, 3},
      {6, 4},   {6, 5},   {3, 1},  {3, 2},  {6, 6},  {5, 6},  {4, 6},  {3, 6},
      {2, 6},   {1, 6},   {0, 6},  {-1, 6}, {3, 3},  {2, 3},  {-2, 6}, {-2, 5},
      {-2, 4},  {-2, 3},  {-2, 2}, {-2, 1}, {-2, 0}, {-2, -1}, {1, 3}, {1, 2},
      {2, 2},
  };
  return layout;
}

int parse_min_hamming(const std::string& name) {
  static const std::regex pattern(R"((\d+)h(\d+)$)");
  std::smatch m;
  if (!std::regex_search(name, m, pattern))
    fail(ErrorCode::InvalidFamily, "family name carries no <bits>h<hamming> suffix: " + name);
  return std::stoi(m[2].str());
}

}  // namespace

std::optional<TagLayout> builtin_layout(const std::string& family_name) {
  if (family_name == "tagStandard41h12") return standard41h12_layout();
  return std::nullopt;
}

TagFamily::TagFamily(std::string name, TagLayout layout, int min_hamming,
                     std::vector<std::uint64_t> codes)
    : name_(std::move(name)),
      layout_(std::move(layout)),
      min_hamming_(min_hamming),
      codes_(std::move(codes)) {
  const int nbits = bits_per_tag();
  if (nbits <= 0 || nbits > 64)
    fail(ErrorCode::InvalidFamily, "layout must define between 1 and 64 bits");
  if (codes_.empty()) fail(ErrorCode::InvalidFamily, "codebook is empty");
  const std::uint64_t mask = nbits == 64 ? ~0ULL : ((1ULL << nbits) - 1);
  for (std::uint64_t c : codes_)
    if ((c & ~mask) != 0)
      fail(ErrorCode::InvalidFamily, "codeword wider than the layout");

  // Rotating the printed grid by 90 degrees clockwise sends grid cell (x, y)
  // to (W-1-y, x); the rotated word reads bit i from the preimage cell.
  const int off = layout_.margin();
  const int w = layout_.total_width;
  rotation_perm_.assign(nbits, -1);
  for (int i = 0; i < nbits; ++i) {
    const int gx = layout_.bits[i].x + off;
    const int gy = layout_.bits[i].y + off;
    const CellCoord source{gy - off, (w - 1 - gx) - off};
    const auto it = std::find(layout_.bits.begin(), layout_.bits.end(), source);
    if (it == layout_.bits.end())
      fail(ErrorCode::InvalidFamily, "layout is not closed under rotation");
    rotation_perm_[i] = static_cast<int>(it - layout_.bits.begin());
  }
}

TagFamily TagFamily::load(const std::filesystem::path& path, const std::string& name) {
  std::string family_name = name;
  if (family_name.empty()) {
    family_name = path.stem().string();
    family_name = family_name.substr(0, family_name.find('_'));
  }
  auto layout = builtin_layout(family_name);
  if (!layout) fail(ErrorCode::InvalidFamily, "no bit layout known for family " + family_name);

  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open codebook " + path.string());
  std::vector<std::uint64_t> codes;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line.erase(std::remove_if(line.begin(), line.end(),
                              [](unsigned char c) { return std::isspace(c); }),
               line.end());
    if (line.empty()) {
      // only a trailing blank line is tolerated; ids must stay dense
      if (in.peek() == std::char_traits<char>::eof()) break;
      fail(ErrorCode::InvalidFamily, "blank line inside codebook at line " + std::to_string(lineno));
    }
    if (line.starts_with("0x") || line.starts_with("0X")) line = line.substr(2);
    std::size_t used = 0;
    std::uint64_t value = 0;
    try {
      value = std::stoull(line, &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != line.size() || line.empty())
      fail(ErrorCode::InvalidFamily, "bad hex codeword at line " + std::to_string(lineno));
    codes.push_back(value);
  }
  return TagFamily(family_name, std::move(*layout), parse_min_hamming(family_name),
                   std::move(codes));
}

std::uint64_t TagFamily::code(int id) const {
  if (id < 0 || id >= size())
    fail(ErrorCode::IdOutOfRange, "tag id " + std::to_string(id) + " outside family " + name_);
  return codes_[static_cast<std::size_t>(id)];
}

std::optional<bool> TagFamily::cell_is_white(std::uint64_t code, int cx, int cy) const {
  const int nbits = bits_per_tag();
  for (int i = 0; i < nbits; ++i) {
    if (layout_.bits[i].x == cx && layout_.bits[i].y == cy)
      return ((code >> (nbits - 1 - i)) & 1ULL) != 0;
  }
  const int off = layout_.margin();
  const int lo = -off;
  const int hi = layout_.width_at_border + off - 1;
  if (cx < lo || cx > hi || cy < lo || cy > hi) return std::nullopt;

  const int wab = layout_.width_at_border;
  const auto on_ring = [&](int r) {
    const int a = r, b = wab - 1 - r;
    return (cx == a || cx == b || cy == a || cy == b) && cx >= a && cx <= b &&
           cy >= a && cy <= b;
  };
  if (on_ring(-1)) return !layout_.reversed_border;
  if (on_ring(0)) return layout_.reversed_border;
  return true;
}

std::uint64_t TagFamily::rotate90(std::uint64_t code) const {
  const int nbits = bits_per_tag();
  std::uint64_t out = 0;
  for (int i = 0; i < nbits; ++i) {
    const int src = rotation_perm_[i];
    const std::uint64_t bit = (code >> (nbits - 1 - src)) & 1ULL;
    out |= bit << (nbits - 1 - i);
  }
  return out;
}

int hamming_distance(std::uint64_t a, std::uint64_t b) {
  return std::popcount(a ^ b);
}

}  // namespace skyanchor
