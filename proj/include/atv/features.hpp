// Deterministic multi-scale feature extraction.
//
// Each scale gets a handcrafted filter-bank descriptor per pixel (intensity,
// Gaussian-derivative responses, local mean/std, color) standardized per
// channel over the image. Scale 1 is quarter resolution, scale 2 half, and
// scale 3 full resolution.
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "atv/common.hpp"
#include "atv/parallel.hpp"

namespace atv {

struct FeatureConfig {
  std::array<int, 3> channels{32, 16, 8};
  std::vector<double> gaussian_radii{1.0, 2.0, 4.0};
  std::vector<int> window_radii{2, 4};

  void validate() const {
    for (int c : channels) {
      if (c < 1) throw InputError("feature channel counts must be >= 1");
    }
    if (gaussian_radii.empty() && window_radii.empty()) throw InputError("feature bank needs at least one radius");
    for (double r : gaussian_radii) {
      if (!(r > 0.0)) throw InputError("gaussian radii must be positive");
    }
    for (int r : window_radii) {
      if (r < 1) throw InputError("window radii must be >= 1");
    }
  }
};

struct FeatureMap {
  Image<float> values;
  int scale_index = 0;
  int source_view = 0;
};

using FeaturePyramid = std::array<FeatureMap, 3>;

/// Resolution of scale 1 (quarter), 2 (half) or 3 (full).
inline Size scale_size(Size full, int scale) {
  switch (scale) {
    case 1:
      return {ceil_div(full.width, 4), ceil_div(full.height, 4)};
    case 2:
      return {ceil_div(full.width, 2), ceil_div(full.height, 2)};
    case 3:
      return full;
    default:
      throw InputError("scale index must be 1, 2 or 3");
  }
}

/// Area-averaging downsample by an integer factor; the output has
/// ceil(W/f) x ceil(H/f) pixels and edge blocks average what they cover.
template <typename T>
Image<T> area_downsample(const Image<T>& image, int factor) {
  if (factor < 1) throw InputError("downsample factor must be >= 1");
  if (factor == 1) return image;
  const int w = ceil_div(image.width(), factor);
  const int h = ceil_div(image.height(), factor);
  const int ch = image.channels();
  Image<T> out(w, h, ch);
  parallel_for(0, h, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    std::vector<double> acc(static_cast<std::size_t>(ch));
    for (int x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const int y1 = std::min(image.height(), (y + 1) * factor);
      const int x1 = std::min(image.width(), (x + 1) * factor);
      int count = 0;
      for (int sy = y * factor; sy < y1; ++sy) {
        for (int sx = x * factor; sx < x1; ++sx) {
          const auto p = image.pixel(sx, sy);
          for (int c = 0; c < ch; ++c) acc[static_cast<std::size_t>(c)] += p[c];
          ++count;
        }
      }
      for (int c = 0; c < ch; ++c) out(x, y, c) = static_cast<T>(acc[static_cast<std::size_t>(c)] / count);
    }
  });
  return out;
}

namespace detail {

using Plane = Image<double>;

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

inline Plane gaussian_blur(const Plane& in, double sigma) {
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  double total = 0.0;
  for (int i = -half; i <= half; ++i) {
    kernel[static_cast<std::size_t>(i + half)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[static_cast<std::size_t>(i + half)];
  }
  for (double& k : kernel) k /= total;

  const int w = in.width();
  const int h = in.height();
  Plane tmp(w, h);
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -half; i <= half; ++i) s += kernel[static_cast<std::size_t>(i + half)] * in(clampi(x + i, 0, w - 1), y);
      tmp(x, y) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -half; i <= half; ++i) s += kernel[static_cast<std::size_t>(i + half)] * tmp(x, clampi(y + i, 0, h - 1));
      out(x, y) = s;
    }
  }
  return out;
}

enum class Filter { kGray, kRed, kGreen, kBlue, kGradX, kGradY, kGradXX, kGradYY, kGradXY, kSmooth, kLocalMean, kLocalStd };

struct FilterSpec {
  Filter filter;
  double radius;  // Gaussian sigma or window half-width, unused for raw channels
};

// Ordered channel bank. Round 0 uses the configured radii; each further
// round doubles every radius until `count` channels exist.
inline std::vector<FilterSpec> filter_bank(const FeatureConfig& config, int count) {
  std::vector<FilterSpec> bank;
  for (int round = 0; static_cast<int>(bank.size()) < count; ++round) {
    const double scale = std::ldexp(1.0, round);
    if (round == 0) bank.push_back({Filter::kGray, 0.0});
    for (double s : config.gaussian_radii) {
      bank.push_back({Filter::kGradX, s * scale});
      bank.push_back({Filter::kGradY, s * scale});
    }
    for (int r : config.window_radii) {
      bank.push_back({Filter::kLocalMean, r * scale});
      bank.push_back({Filter::kLocalStd, r * scale});
    }
    if (round == 0) {
      bank.push_back({Filter::kRed, 0.0});
      bank.push_back({Filter::kGreen, 0.0});
      bank.push_back({Filter::kBlue, 0.0});
    }
    for (double s : config.gaussian_radii) {
      bank.push_back({Filter::kGradXX, s * scale});
      bank.push_back({Filter::kGradYY, s * scale});
      bank.push_back({Filter::kGradXY, s * scale});
    }
    for (double s : config.gaussian_radii) bank.push_back({Filter::kSmooth, s * scale});
  }
  bank.resize(static_cast<std::size_t>(count));
  return bank;
}

inline Plane local_mean(const Plane& in, int r) {
  const int w = in.width();
  const int h = in.height();
  Plane out(w, h);
  const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) s += in(clampi(x + dx, 0, w - 1), clampi(y + dy, 0, h - 1));
      }
      out(x, y) = s / n;
    }
  }
  return out;
}

// Two-pass window deviation: exactly zero on constant neighborhoods.
inline Plane local_std(const Plane& in, const Plane& mean, int r) {
  const int w = in.width();
  const int h = in.height();
  Plane out(w, h);
  const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = mean(x, y);
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double d = in(clampi(x + dx, 0, w - 1), clampi(y + dy, 0, h - 1)) - m;
          s += d * d;
        }
      }
      out(x, y) = std::sqrt(s / n);
    }
  }
  return out;
}

inline Plane apply_filter(const FilterSpec& spec, const Plane& gray, const Image<double>& rgb) {
  const int w = gray.width();
  const int h = gray.height();
  auto channel = [&](int c) {
    Plane out(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out(x, y) = rgb(x, y, c);
    }
    return out;
  };
  switch (spec.filter) {
    case Filter::kGray:
      return gray;
    case Filter::kRed:
      return channel(0);
    case Filter::kGreen:
      return channel(1);
    case Filter::kBlue:
      return channel(2);
    case Filter::kLocalMean:
      return local_mean(gray, static_cast<int>(spec.radius));
    case Filter::kLocalStd:
      return local_std(gray, local_mean(gray, static_cast<int>(spec.radius)), static_cast<int>(spec.radius));
    default:
      break;
  }
  const Plane s = gaussian_blur(gray, spec.radius);
  if (spec.filter == Filter::kSmooth) return s;
  Plane out(w, h);
  auto at = [&](int x, int y) { return s(clampi(x, 0, w - 1), clampi(y, 0, h - 1)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      switch (spec.filter) {
        case Filter::kGradX:
          out(x, y) = 0.5 * (at(x + 1, y) - at(x - 1, y));
          break;
        case Filter::kGradY:
          out(x, y) = 0.5 * (at(x, y + 1) - at(x, y - 1));
          break;
        case Filter::kGradXX:
          out(x, y) = at(x + 1, y) - 2.0 * at(x, y) + at(x - 1, y);
          break;
        case Filter::kGradYY:
          out(x, y) = at(x, y + 1) - 2.0 * at(x, y) + at(x, y - 1);
          break;
        default:
          out(x, y) = 0.25 * (at(x + 1, y + 1) - at(x + 1, y - 1) - at(x - 1, y + 1) + at(x - 1, y - 1));
          break;
      }
    }
  }
  return out;
}

// Zero mean, unit variance over the image; constant channels become zero.
inline void standardize(Plane& plane) {
  const auto values = plane.data();
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  const double sd = std::sqrt(var);
  if (sd <= 1e-10) {
    std::fill(values.begin(), values.end(), 0.0);
    return;
  }
  for (double& v : values) v = (v - mean) / sd;
}

}  // namespace detail

/// Filter-bank features of one image at one scale.
inline FeatureMap extract_features(const ViewImage& image, int scale, int channels, const FeatureConfig& config,
                                   int source_view = 0) {
  if (image.channels() != 3) throw InputError("feature extraction expects an RGB image");
  const int factor = scale == 1 ? 4 : (scale == 2 ? 2 : 1);
  if (scale < 1 || scale > 3) throw InputError("scale index must be 1, 2 or 3");

  Image<double> rgb(image.width(), image.height(), 3);
  for (std::size_t i = 0; i < image.data().size(); ++i) rgb.data()[i] = image.data()[i];
  rgb = area_downsample(rgb, factor);
  detail::Plane gray(rgb.width(), rgb.height());
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) gray(x, y) = 0.299 * rgb(x, y, 0) + 0.587 * rgb(x, y, 1) + 0.114 * rgb(x, y, 2);
  }

  const auto bank = detail::filter_bank(config, channels);
  FeatureMap out;
  out.values = Image<float>(rgb.width(), rgb.height(), channels);
  out.scale_index = scale;
  out.source_view = source_view;
  parallel_for(0, channels, [&](std::ptrdiff_t c) {
    detail::Plane plane = detail::apply_filter(bank[static_cast<std::size_t>(c)], gray, rgb);
    detail::standardize(plane);
    for (int y = 0; y < plane.height(); ++y) {
      for (int x = 0; x < plane.width(); ++x) out.values(x, y, static_cast<int>(c)) = static_cast<float>(plane(x, y));
    }
  });
  return out;
}

inline FeaturePyramid build_feature_pyramid(const ViewImage& image, const FeatureConfig& config,
                                            int source_view = 0) {
  config.validate();
  if (image.width() < 8 || image.height() < 8) throw InputError("feature extraction needs an image of at least 8x8");
  FeaturePyramid pyramid;
  for (int s = 1; s <= 3; ++s) {
    pyramid[static_cast<std::size_t>(s - 1)] =
        extract_features(image, s, config.channels[static_cast<std::size_t>(s - 1)], config, source_view);
  }
  return pyramid;
}

}  // namespace atv
