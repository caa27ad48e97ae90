#include "hdrsplat/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "hdrsplat/errors.hpp"

namespace hdrsplat {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  return in;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  while (true) {
    int c = in.get();
    if (c == EOF) throw DataError("truncated image header: " + path.string());
    if (c == '#') {
      in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in, path);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad image header field '" + tok + "': " + path.string());
  }
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

std::uint8_t quantize8(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

LDRImage quantize_ldr(const LDRImage& image) {
  LDRImage out = image;
  for (auto& v : out.values()) v = quantize8(v) / 255.0;
  return out;
}

void write_ppm(const LDRImage& image, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<char> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    bytes[i] = static_cast<char>(quantize8(image[i]));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish_write(out, path);
}

LDRImage read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (header_token(in, path) != "P6") throw DataError("not a P6 PPM: " + path.string());
  const int w = header_int(in, path);
  const int h = header_int(in, path);
  const int maxval = header_int(in, path);
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw DataError("unsupported PPM geometry or depth: " + path.string());
  }
  LDRImage img(w, h);
  std::vector<unsigned char> bytes(img.size());
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!in) throw DataError("truncated PPM data: " + path.string());
  for (std::size_t i = 0; i < bytes.size(); ++i) img[i] = bytes[i] / 255.0;
  return img;
}

void write_pgm(const std::vector<std::uint8_t>& mask, int width, int height,
               const std::filesystem::path& path) {
  if (mask.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("write_pgm: mask size does not match dimensions");
  }
  auto out = open_out(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.data()),
            static_cast<std::streamsize>(mask.size()));
  finish_write(out, path);
}

std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int* width,
                                   int* height) {
  auto in = open_in(path);
  if (header_token(in, path) != "P5") throw DataError("not a P5 PGM: " + path.string());
  const int w = header_int(in, path);
  const int h = header_int(in, path);
  const int maxval = header_int(in, path);
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw DataError("unsupported PGM geometry or depth: " + path.string());
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(mask.data()),
          static_cast<std::streamsize>(mask.size()));
  if (!in) throw DataError("truncated PGM data: " + path.string());
  if (width) *width = w;
  if (height) *height = h;
  return mask;
}

void write_pfm(const LinearHDRImage& image, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "PF\n" << image.width() << ' ' << image.height() << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(image.width()) * 3);
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        row[3 * x + c] = static_cast<float>(image.at(x, y, c));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  finish_write(out, path);
}

LinearHDRImage read_pfm(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (header_token(in, path) != "PF") throw DataError("not an RGB PFM: " + path.string());
  const int w = header_int(in, path);
  const int h = header_int(in, path);
  const std::string scale_tok = header_token(in, path);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw DataError("bad PFM scale: " + path.string());
  }
  if (w <= 0 || h <= 0 || scale >= 0.0) {
    throw DataError("unsupported PFM (need little-endian RGB): " + path.string());
  }
  LinearHDRImage img(w, h);
  std::vector<float> row(static_cast<std::size_t>(w) * 3);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw DataError("truncated PFM data: " + path.string());
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = row[3 * x + c];
    }
  }
  return img;
}

}  // namespace hdrsplat
