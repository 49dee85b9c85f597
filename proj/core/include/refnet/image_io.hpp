#pragma once

#include <string>

#include "refnet/image.hpp"

namespace refnet {

/// Lossless on-disk formats: binary PPM (P6) for 3-channel images, binary
/// PGM (P5) for single-channel masks. 8-bit quantization for images,
/// {0,255} for binary masks, 16-bit PGM for soft masks.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

void write_pgm(const std::string& path, const BinaryMask& mask);
BinaryMask read_pgm_binary(const std::string& path);

void write_pgm16(const std::string& path, const SoftMask& mask);
SoftMask read_pgm16(const std::string& path);

} // namespace refnet
