#include "skyanchor/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "skyanchor/error.hpp"

namespace skyanchor {

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0)
    fail(ErrorCode::MalformedImage, "negative image size");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

double GrayImage::sample(double x, double y) const {
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
  const double bottom = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

namespace {

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  long next_number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      fail(ErrorCode::MalformedImage, "PGM header: expected a number");
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000)
        fail(ErrorCode::MalformedImage, "PGM header: value too large");
      ++pos_;
    }
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }
  bool at_space() const {
    return pos_ < bytes_.size() && std::isspace(bytes_[pos_]);
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    fail(ErrorCode::MalformedImage, "not a binary PGM (P5)");
  PgmHeaderReader reader(bytes);
  const long width = reader.next_number();
  const long height = reader.next_number();
  const long maxval = reader.next_number();
  if (width <= 0 || height <= 0)
    fail(ErrorCode::MalformedImage, "PGM has zero size");
  if (maxval != 255)
    fail(ErrorCode::MalformedImage, "only 8-bit PGM (maxval 255) is supported");
  if (!reader.at_space())
    fail(ErrorCode::MalformedImage, "PGM header not terminated by whitespace");
  reader.advance();

  const std::size_t needed = static_cast<std::size_t>(width) * height;
  if (bytes.size() - reader.pos() < needed)
    fail(ErrorCode::MalformedImage, "PGM pixel data truncated");

  GrayImage img(static_cast<int>(width), static_cast<int>(height));
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos()), needed,
              img.pixels().begin());
  return img;
}

GrayImage decode_pgm(const std::string& bytes) {
  return decode_pgm(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string encode_pgm(const GrayImage& img) {
  std::ostringstream out;
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::string data = out.str();
  data.append(reinterpret_cast<const char*>(img.pixels().data()),
              img.pixels().size());
  return data;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open image " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write image " + path.string());
  const std::string data = encode_pgm(img);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace skyanchor
