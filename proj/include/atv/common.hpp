// Core containers and error types shared by every stage of the pipeline.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace atv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Degenerate or inconsistent camera algebra.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Caller passed arguments that violate an operation's preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// The pipeline ran but could not produce a meaningful result.
class PipelineError : public Error {
 public:
  using Error::Error;
};

/// A statistic was requested over an empty population.
class StatisticsError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line), message_(what) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

/// Bad configuration document (unknown keys, wrong types, out-of-range values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Size {
  int width = 0;
  int height = 0;

  friend bool operator==(const Size&, const Size&) = default;
  std::size_t area() const noexcept { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

inline std::string to_string(Size s) { return std::to_string(s.width) + "x" + std::to_string(s.height); }

/// Dense H x W x C raster, channels interleaved per pixel.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) throw InputError("invalid image dimensions");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }
  Image(Size size, int channels = 1, T fill = T{}) : Image(size.width, size.height, channels, fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  Size size() const noexcept { return {width_, height_}; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  T& operator()(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  const T& operator()(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  std::span<T> pixel(int x, int y) noexcept { return {data_.data() + index(x, y), static_cast<std::size_t>(channels_)}; }
  std::span<const T> pixel(int x, int y) const noexcept {
    return {data_.data() + index(x, y), static_cast<std::size_t>(channels_)};
  }
  std::span<T> row(int y) noexcept {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_) * channels_};
  }
  std::span<const T> row(int y) const noexcept {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_) * channels_};
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using ViewImage = Image<float>;  // RGB in [0, 1]
using DepthMap = Image<double>;
using Mask = Image<std::uint8_t>;

/// D x H x W stack of per-pixel values (plane-major).
template <typename T>
class Volume {
 public:
  Volume() = default;
  Volume(int depth, int width, int height, T fill = T{}) : depth_(depth), width_(width), height_(height) {
    if (depth < 0 || width < 0 || height < 0) throw InputError("invalid volume dimensions");
    data_.assign(static_cast<std::size_t>(depth) * width * height, fill);
  }

  int depth() const noexcept { return depth_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Size size() const noexcept { return {width_, height_}; }
  std::size_t slice_size() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  std::size_t index(int j, int x, int y) const noexcept {
    return (static_cast<std::size_t>(j) * height_ + y) * width_ + x;
  }
  T& operator()(int j, int x, int y) noexcept { return data_[index(j, x, y)]; }
  const T& operator()(int j, int x, int y) const noexcept { return data_[index(j, x, y)]; }

  std::span<T> slice(int j) noexcept { return {data_.data() + index(j, 0, 0), slice_size()}; }
  std::span<const T> slice(int j) const noexcept { return {data_.data() + index(j, 0, 0), slice_size()}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  int depth_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace atv
