#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "skyanchor/geometry.hpp"

namespace skyanchor {

/// Cell position in layout units. The detection border square covers cells
/// [0, width_at_border) on both axes; data cells may lie outside it.
struct CellCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const CellCoord&, const CellCoord&) = default;
};

struct TagLayout {
  int width_at_border = 0;
  int total_width = 0;
  /// When set, the ring just inside the detection edge is white and the ring
  /// just outside it is black.
  bool reversed_border = false;
  /// Position of codeword bit i; bit 0 is the most significant bit.
  std::vector<CellCoord> bits;

  int margin() const { return (total_width - width_at_border) / 2; }

  /// Center of a cell in tag-unit coordinates (border square = [-1/2, 1/2]^2).
  Vec2 cell_center(int cx, int cy) const;
};

/// Built-in bit layouts, keyed by family name.
std::optional<TagLayout> builtin_layout(const std::string& family_name);

class TagFamily {
 public:
  TagFamily(std::string name, TagLayout layout, int min_hamming,
            std::vector<std::uint64_t> codes);

  /// Loads a codebook asset (one hex codeword per line, line number = id).
  /// The family name defaults to the file stem up to the first '_', so
  /// "tagStandard41h12_subset16.txt" resolves to tagStandard41h12.
  static TagFamily load(const std::filesystem::path& path,
                        const std::string& name = {});

  const std::string& name() const noexcept { return name_; }
  int bits_per_tag() const noexcept { return static_cast<int>(layout_.bits.size()); }
  int min_hamming() const noexcept { return min_hamming_; }
  const TagLayout& layout() const noexcept { return layout_; }
  int size() const noexcept { return static_cast<int>(codes_.size()); }
  std::uint64_t code(int id) const;
  const std::vector<std::uint64_t>& codes() const noexcept { return codes_; }

  /// Printed color of a layout cell for the given codeword: true = white,
  /// false = black, nullopt outside the printed pattern.
  std::optional<bool> cell_is_white(std::uint64_t code, int cx, int cy) const;

  /// Codeword of the tag image rotated by 90 degrees.
  std::uint64_t rotate90(std::uint64_t code) const;

 private:
  std::string name_;
  TagLayout layout_;
  int min_hamming_ = 0;
  std::vector<std::uint64_t> codes_;
  std::vector<int> rotation_perm_;  // bit i of the rotated word comes from bit perm[i]
};

int hamming_distance(std::uint64_t a, std::uint64_t b);

}  // namespace skyanchor
