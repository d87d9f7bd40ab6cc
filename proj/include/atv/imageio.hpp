// PFM (float maps) and binary PPM (8-bit RGB) readers and writers.
#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "atv/common.hpp"

namespace atv {

namespace detail {

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}

// Reads one whitespace-delimited header token, skipping '#' comments.
inline std::string header_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

inline int parse_dimension(const std::string& token, const std::string& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size() || v <= 0) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ParseError(0, path + ": bad image dimension '" + token + "'");
  }
}

}  // namespace detail

/// Writes a 1- or 3-channel float image as little-endian PFM (scale -1).
/// Rows are stored bottom-to-top as the format requires.
inline void write_pfm(const std::string& path, const Image<float>& image) {
  if (image.channels() != 1 && image.channels() != 3) throw InputError("PFM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << (image.channels() == 3 ? "PF" : "Pf") << "\n" << image.width() << " " << image.height() << "\n-1.0\n";
  std::vector<std::uint32_t> row(static_cast<std::size_t>(image.width()) * image.channels());
  for (int y = image.height() - 1; y >= 0; --y) {
    const auto src = image.row(y);
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(src[i]);
      if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap32(bits);
      row[i] = bits;
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw InputError("failed writing " + path);
}

inline void write_pfm(const std::string& path, const Image<double>& map) {
  Image<float> f(map.width(), map.height(), map.channels());
  for (std::size_t i = 0; i < map.data().size(); ++i) f.data()[i] = static_cast<float>(map.data()[i]);
  write_pfm(path, f);
}

inline Image<float> read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  const std::string magic = detail::header_token(in);
  int channels = 0;
  if (magic == "PF") {
    channels = 3;
  } else if (magic == "Pf") {
    channels = 1;
  } else {
    throw ParseError(1, path + ": not a PFM file");
  }
  const int width = detail::parse_dimension(detail::header_token(in), path);
  const int height = detail::parse_dimension(detail::header_token(in), path);
  const std::string scale_token = detail::header_token(in);
  double scale = 0.0;
  try {
    scale = std::stod(scale_token);
  } catch (const std::exception&) {
    throw ParseError(3, path + ": bad PFM scale '" + scale_token + "'");
  }
  if (scale == 0.0) throw ParseError(3, path + ": PFM scale must be nonzero");
  const bool little = scale < 0.0;

  Image<float> image(width, height, channels);
  std::vector<std::uint32_t> row(static_cast<std::size_t>(width) * channels);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    if (!in) throw ParseError(0, path + ": truncated PFM payload");
    auto dst = image.row(y);
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::uint32_t bits = row[i];
      if (little != (std::endian::native == std::endian::little)) bits = detail::byteswap32(bits);
      dst[i] = std::bit_cast<float>(bits);
    }
  }
  return image;
}

inline DepthMap read_pfm_depth(const std::string& path) {
  const Image<float> f = read_pfm(path);
  if (f.channels() != 1) throw ParseError(0, path + ": expected a single-channel PFM");
  DepthMap d(f.width(), f.height());
  for (std::size_t i = 0; i < f.data().size(); ++i) d.data()[i] = f.data()[i];
  return d;
}

/// Writes RGB in [0,1] as binary PPM, rounding to the nearest 8-bit level.
inline void write_ppm(const std::string& path, const ViewImage& image) {
  if (image.channels() != 3) throw InputError("PPM needs a 3-channel image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  std::vector<unsigned char> bytes(image.data().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const float v = std::clamp(image.data()[i], 0.0f, 1.0f);
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing " + path);
}

inline ViewImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  if (detail::header_token(in) != "P6") throw ParseError(1, path + ": not a binary PPM (P6)");
  const int width = detail::parse_dimension(detail::header_token(in), path);
  const int height = detail::parse_dimension(detail::header_token(in), path);
  const int maxval = detail::parse_dimension(detail::header_token(in), path);
  if (maxval > 255) throw ParseError(0, path + ": 16-bit PPM is not supported");
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw ParseError(0, path + ": truncated PPM payload");
  ViewImage image(width, height, 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) image.data()[i] = static_cast<float>(bytes[i]) / maxval;
  return image;
}

}  // namespace atv
