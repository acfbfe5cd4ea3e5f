#include "greyfeed/pgm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <vector>

#include "greyfeed/error.hpp"

namespace greyfeed {

namespace {

[[noreturn]] void fail(const std::string& name, std::streamoff off, const std::string& what) {
  throw ParseError(name + ": " + what + " (byte " + std::to_string(off) + ")");
}

// Reads one header token, skipping whitespace and '#' comments that run to end of line.
std::string next_token(std::istream& in, const std::string& name) {
  int c;
  for (;;) {
    c = in.get();
    if (c == EOF) fail(name, in.tellg(), "unexpected end of header");
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    if (!std::isspace(c)) break;
  }
  std::string tok;
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (c != EOF) in.unget();
  return tok;
}

long parse_number(std::istream& in, const std::string& name, const char* field) {
  std::streamoff off = in.tellg();
  std::string tok = next_token(in, name);
  long value = 0;
  if (tok.empty()) fail(name, off, std::string("missing ") + field);
  for (char ch : tok) {
    if (ch < '0' || ch > '9') fail(name, off, std::string("bad ") + field + " '" + tok + "'");
    value = value * 10 + (ch - '0');
    if (value > std::numeric_limits<int>::max()) fail(name, off, std::string(field) + " out of range");
  }
  return value;
}

}  // namespace

Image read_pgm(std::istream& in, const std::string& name) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') fail(name, 0, "not a P5 pgm file");

  long width = parse_number(in, name, "width");
  long height = parse_number(in, name, "height");
  long maxval = parse_number(in, name, "maxval");
  if (width <= 0 || height <= 0) fail(name, in.tellg(), "non-positive dimensions");
  if (maxval <= 0 || maxval > 255) fail(name, in.tellg(), "unsupported maxval " + std::to_string(maxval));

  int sep = in.get();
  if (sep == EOF || !std::isspace(sep)) fail(name, in.tellg(), "missing whitespace before raster");

  std::vector<std::uint8_t> raw(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  std::streamoff data_off = in.tellg();
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    fail(name, data_off + in.gcount(), "truncated raster data");

  Image img(height, width);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (long y = 0; y < height; ++y)
    for (long x = 0; x < width; ++x)
      img(y, x) = static_cast<double>(raw[static_cast<std::size_t>(y) * width + x]) * scale;
  return img;
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_pgm(in, path.string());
}

void write_pgm(std::ostream& out, const Image& img) {
  if (img.height() <= 0 || img.width() <= 0) throw DimensionError("write_pgm: empty image");
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.height()) * static_cast<std::size_t>(img.width()));
  for (Eigen::Index y = 0; y < img.height(); ++y) {
    for (Eigen::Index x = 0; x < img.width(); ++x) {
      double v = img(y, x);
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      raw[static_cast<std::size_t>(y) * img.width() + x] =
          static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write_pgm: stream write failed");
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_pgm(out, img);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace greyfeed
