#pragma once

/// @file
/// Keys cubic convolution (a = -0.5), pointwise sampling and resizing.
/// Every bicubic operation in the toolkit goes through this header so that
/// data generation, initialization, flow upsampling and warping agree on one
/// kernel and one coordinate convention.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mmcsr/core.hpp"

namespace mmcsr {

inline constexpr double kKeysA = -0.5;

/// Keys cubic convolution kernel.
inline double keys_kernel(double x) {
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((kKeysA + 2.0) * ax - (kKeysA + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((kKeysA * ax - 5.0 * kKeysA) * ax + 8.0 * kKeysA) * ax - 4.0 * kKeysA;
  return 0.0;
}

/// Weights for taps at offsets {-1, 0, 1, 2} relative to floor(x), t = x - floor(x).
inline std::array<double, 4> bicubic_weights(double t) {
  return {keys_kernel(t + 1.0), keys_kernel(t), keys_kernel(1.0 - t), keys_kernel(2.0 - t)};
}

/// Bicubic value at real position (x, y); the position and the stencil are
/// clamped to the image domain.
inline double sample_bicubic(const Image& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const double fx = std::floor(x), fy = std::floor(y);
  const auto wx = bicubic_weights(x - fx);
  const auto wy = bicubic_weights(y - fy);
  const auto ix = static_cast<std::ptrdiff_t>(fx);
  const auto iy = static_cast<std::ptrdiff_t>(fy);
  double acc = 0.0;
  for (int j = 0; j < 4; ++j) {
    if (wy[j] == 0.0) continue;
    double row = 0.0;
    for (int i = 0; i < 4; ++i) {
      if (wx[i] == 0.0) continue;
      row += wx[i] * img.at_clamped(ix + i - 1, iy + j - 1);
    }
    acc += wy[j] * row;
  }
  return acc;
}

namespace detail {

struct Taps {
  std::vector<std::size_t> index;
  std::vector<double> weight;
};

// Area-anchored 1-D resampling taps: output i reads input at (i+0.5)/scale-0.5.
// With antialiasing, downscaling stretches the kernel by 1/scale and
// renormalizes.
inline std::vector<Taps> resize_taps(std::size_t in, std::size_t out, bool antialias) {
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const double stretch = antialias && scale < 1.0 ? 1.0 / scale : 1.0;
  const double support = 2.0 * stretch;
  std::vector<Taps> taps(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double c = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const auto lo = static_cast<std::ptrdiff_t>(std::floor(c - support));
    const auto hi = static_cast<std::ptrdiff_t>(std::ceil(c + support));
    double sum = 0.0;
    std::vector<std::pair<std::size_t, double>> acc;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const double w = keys_kernel((c - static_cast<double>(j)) / stretch);
      if (w == 0.0) continue;
      const auto jj = static_cast<std::size_t>(
          std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(in) - 1));
      sum += w;
      bool merged = false;
      for (auto& [k, v] : acc) {
        if (k == jj) {
          v += w;
          merged = true;
          break;
        }
      }
      if (!merged) acc.emplace_back(jj, w);
    }
    for (auto& [k, v] : acc) {
      taps[i].index.push_back(k);
      taps[i].weight.push_back(stretch > 1.0 ? v / sum : v);
    }
  }
  return taps;
}

}  // namespace detail

/// Separable bicubic resize to (width, height). Output pixel i samples the
/// input at (i + 0.5) / scale - 0.5. When shrinking with `antialias`, the
/// kernel is widened by the inverse scale.
inline Image resize_bicubic(const Image& img, std::size_t width, std::size_t height,
                            bool antialias = true) {
  if (width == 0 || height == 0) throw std::invalid_argument("resize_bicubic: empty target");
  const auto tx = detail::resize_taps(img.width(), width, antialias);
  const auto ty = detail::resize_taps(img.height(), height, antialias);
  Image tmp(width, img.height());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < tx[x].index.size(); ++k) acc += tx[x].weight[k] * img(tx[x].index[k], y);
      tmp(x, y) = acc;
    }
  }
  Image out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < ty[y].index.size(); ++k) acc += ty[y].weight[k] * tmp(x, ty[y].index[k]);
      out(x, y) = acc;
    }
  }
  return out;
}

inline FrameSequence resize_bicubic(const FrameSequence& seq, std::size_t width, std::size_t height,
                                    bool antialias = true) {
  std::vector<Image> frames;
  frames.reserve(seq.size());
  for (const auto& f : seq) frames.push_back(resize_bicubic(f, width, height, antialias));
  return FrameSequence(std::move(frames));
}

}  // namespace mmcsr
