#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "greyfeed/image.hpp"

namespace greyfeed {

// Binary PGM (P5), maxval up to 255. Pixels are dequantized to [0, 1] on read
// and quantized with round(v * 255) on write.
Image read_pgm(std::istream& in, const std::string& name = "<stream>");
Image read_pgm(const std::filesystem::path& path);

void write_pgm(std::ostream& out, const Image& img);
void write_pgm(const std::filesystem::path& path, const Image& img);

}  // namespace greyfeed
