#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hdrsplat/image.hpp"

namespace hdrsplat {

// round(clamp(v, 0, 1) · 255)
std::uint8_t quantize8(double v);
// Snaps every value onto the 8-bit grid, as a PPM round trip would.
LDRImage quantize_ldr(const LDRImage& image);

// Binary 8-bit PPM (P6). Reading maps each byte b to b / 255.
void write_ppm(const LDRImage& image, const std::filesystem::path& path);
LDRImage read_ppm(const std::filesystem::path& path);

// Binary 8-bit single-channel PGM (P5), used for masks.
void write_pgm(const std::vector<std::uint8_t>& mask, int width, int height,
               const std::filesystem::path& path);
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path,
                                   int* width, int* height);

// Little-endian RGB PFM (float32, bottom row first).
void write_pfm(const LinearHDRImage& image, const std::filesystem::path& path);
LinearHDRImage read_pfm(const std::filesystem::path& path);

}  // namespace hdrsplat
