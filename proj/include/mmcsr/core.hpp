#pragma once

/// @file
/// Domain types shared across the toolkit: single-channel images, frame
/// sequences, flow fields and the parameter records for flow estimation and
/// joint super-resolution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mmcsr {

/// Raised when an iteration produces NaN/Inf values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Single-channel floating-point raster, row-major (index = y * width + x).
class Image {
 public:
  Image() = default;

  Image(std::size_t width, std::size_t height, double value = 0.0)
      : width_(width), height_(height), data_(width * height, value) {
    if (width == 0 || height == 0) {
      throw std::invalid_argument("Image: dimensions must be positive");
    }
  }

  Image(std::size_t width, std::size_t height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width == 0 || height == 0) {
      throw std::invalid_argument("Image: dimensions must be positive");
    }
    if (data_.size() != width * height) {
      throw std::invalid_argument("Image: data length " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(width) + "x" +
                                  std::to_string(height));
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  double operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }

  /// Replicate-border access.
  double at_clamped(std::ptrdiff_t x, std::ptrdiff_t y) const {
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(width_) - 1);
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(height_) - 1);
    return data_[static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x)];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool same_dims(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

/// Ordered list of equally sized frames.
class FrameSequence {
 public:
  FrameSequence() = default;

  explicit FrameSequence(std::vector<Image> frames) : frames_(std::move(frames)) {
    if (frames_.empty()) {
      throw std::invalid_argument("FrameSequence: at least one frame required");
    }
    for (const auto& f : frames_) {
      if (!f.same_dims(frames_.front())) {
        throw std::invalid_argument("FrameSequence: frames differ in dimensions");
      }
    }
  }

  std::size_t size() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }
  std::size_t width() const { return frames_.at(0).width(); }
  std::size_t height() const { return frames_.at(0).height(); }
  std::size_t pixels_per_frame() const { return width() * height(); }
  std::size_t total_pixels() const { return size() * pixels_per_frame(); }

  const Image& operator[](std::size_t i) const { return frames_[i]; }
  Image& operator[](std::size_t i) { return frames_[i]; }
  const std::vector<Image>& frames() const noexcept { return frames_; }

  auto begin() const { return frames_.begin(); }
  auto end() const { return frames_.end(); }

  /// Concatenates all frames into one vector (frame-major, then row-major).
  std::vector<double> stacked() const {
    std::vector<double> out;
    out.reserve(total_pixels());
    for (const auto& f : frames_) out.insert(out.end(), f.values().begin(), f.values().end());
    return out;
  }

  static FrameSequence from_stacked(std::span<const double> v, std::size_t width,
                                    std::size_t height, std::size_t count) {
    if (v.size() != width * height * count) {
      throw std::invalid_argument("FrameSequence::from_stacked: length mismatch");
    }
    std::vector<Image> frames;
    frames.reserve(count);
    const std::size_t ppf = width * height;
    for (std::size_t k = 0; k < count; ++k) {
      frames.emplace_back(width, height,
                          std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(k * ppf),
                                              v.begin() + static_cast<std::ptrdiff_t>((k + 1) * ppf)));
    }
    return FrameSequence(std::move(frames));
  }

 private:
  std::vector<Image> frames_;
};

/// Per-pixel displacement, in pixels of the grid it lives on.
struct FlowField {
  Image vx;
  Image vy;

  FlowField() = default;
  FlowField(Image x, Image y) : vx(std::move(x)), vy(std::move(y)) {
    if (!vx.same_dims(vy)) throw std::invalid_argument("FlowField: component dims differ");
    for (std::size_t i = 0; i < vx.size(); ++i) {
      if (!std::isfinite(vx.data()[i]) || !std::isfinite(vy.data()[i])) {
        throw std::invalid_argument("FlowField: non-finite displacement");
      }
    }
  }

  static FlowField zero(std::size_t width, std::size_t height) {
    return FlowField(Image(width, height), Image(width, height));
  }
  static FlowField constant(std::size_t width, std::size_t height, double dx, double dy) {
    return FlowField(Image(width, height, dx), Image(width, height, dy));
  }

  std::size_t width() const noexcept { return vx.width(); }
  std::size_t height() const noexcept { return vx.height(); }
};

/// Which frame of pair (k, k+1) hosts the flow.
///
/// backward: the flow lives on frame k and points into frame k+1, so the
///           warp resamples frame k+1 onto frame k.
/// forward:  the flow lives on frame k+1 and points into frame k.
enum class FlowDirection { backward, forward };

/// Placement convention for the alternating directions.
///
/// matrix:  pair 1 is backward (block row 1 = [I, -W]), then alternating.
/// formula: pair 1 is forward, then alternating.
enum class Parity { matrix, formula };

inline FlowDirection direction_for_pair(std::size_t pair_index0, Parity parity) {
  const bool even0 = pair_index0 % 2 == 0;
  const bool backward = parity == Parity::matrix ? even0 : !even0;
  return backward ? FlowDirection::backward : FlowDirection::forward;
}

inline const char* to_string(FlowDirection d) {
  return d == FlowDirection::backward ? "backward" : "forward";
}

/// n-1 flows for an n-frame sequence with strictly alternating direction.
struct FlowSet {
  std::vector<FlowField> flows;
  std::vector<FlowDirection> directions;

  FlowSet() = default;
  FlowSet(std::vector<FlowField> f, std::vector<FlowDirection> d)
      : flows(std::move(f)), directions(std::move(d)) {
    if (flows.size() != directions.size()) {
      throw std::invalid_argument("FlowSet: flows and directions differ in length");
    }
    for (std::size_t k = 1; k < directions.size(); ++k) {
      if (directions[k] == directions[k - 1]) {
        throw std::invalid_argument("FlowSet: directions must alternate");
      }
    }
    for (std::size_t k = 1; k < flows.size(); ++k) {
      if (!flows[k].vx.same_dims(flows[0].vx)) {
        throw std::invalid_argument("FlowSet: flows differ in dimensions");
      }
    }
  }

  /// Zero flows with directions following `parity`.
  static FlowSet zero(std::size_t frames, std::size_t width, std::size_t height,
                      Parity parity = Parity::matrix) {
    std::vector<FlowField> f;
    std::vector<FlowDirection> d;
    for (std::size_t k = 0; k + 1 < frames; ++k) {
      f.push_back(FlowField::zero(width, height));
      d.push_back(direction_for_pair(k, parity));
    }
    return FlowSet(std::move(f), std::move(d));
  }

  std::size_t size() const noexcept { return flows.size(); }
};

/// Parameters of the joint super-resolution energy.
struct SuperResConfig {
  double alpha = 0.01;
  double beta = 0.1;
  double kappa = 0.5;
  double factor = 4.0;
  /// Gaussian blur std-dev on the high-res grid; unset means 1.2 * factor / 4.
  std::optional<double> sigma;
  /// Temporal step; unset means estimated from the bicubic initialization.
  std::optional<double> h;
  int maxIterations = 500;
  double tolerance = 1e-4;
  Parity parity = Parity::matrix;

  double blur_sigma() const { return sigma ? *sigma : 1.2 * factor / 4.0; }

  void validate() const {
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in (0,1)");
    if (!(factor > 1.0)) throw std::invalid_argument("factor must exceed 1");
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be nonnegative");
    if (!(blur_sigma() > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (h && !(*h > 0.0)) throw std::invalid_argument("h must be positive");
    if (maxIterations <= 0) throw std::invalid_argument("maxIterations must be positive");
    if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be nonnegative");
  }
};

/// Parameters of the coarse-to-fine flow estimator.
struct FlowConfig {
  double beta = 0.1;
  double huberEpsilon = 0.01;
  double pyramidScale = 0.5;
  std::size_t minLevelSize = 16;
  double presmoothSigma = 0.8;
  int warpsPerLevel = 3;
  int innerIterations = 50;
  int medianRadius = 2;
  Parity parity = Parity::matrix;

  void validate() const {
    if (!(pyramidScale > 0.0 && pyramidScale < 1.0)) {
      throw std::invalid_argument("pyramidScale must lie in (0,1)");
    }
    if (minLevelSize < 8) throw std::invalid_argument("minLevelSize must be at least 8");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    if (!(huberEpsilon >= 0.0)) throw std::invalid_argument("huberEpsilon must be nonnegative");
    if (warpsPerLevel <= 0 || innerIterations <= 0) {
      throw std::invalid_argument("warpsPerLevel and innerIterations must be positive");
    }
    if (medianRadius < 0) throw std::invalid_argument("medianRadius must be nonnegative");
  }
};

/// High-res extent for a low-res extent: the smallest size whose
/// decimation (floor(size / factor)) gives back `lo`.
inline std::size_t upscaled_size(std::size_t lo, double factor) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(lo) * factor - 1e-9));
}

inline Image clip_image(const Image& img, double lo = 0.0, double hi = 1.0) {
  if (!(lo < hi)) throw std::invalid_argument("clip_image: lo must be below hi");
  Image out = img;
  for (double& v : out.data()) v = std::min(hi, std::max(lo, v));
  return out;
}

inline FrameSequence clip_sequence(const FrameSequence& seq, double lo = 0.0, double hi = 1.0) {
  std::vector<Image> frames;
  frames.reserve(seq.size());
  for (const auto& f : seq) frames.push_back(clip_image(f, lo, hi));
  return FrameSequence(std::move(frames));
}

struct YCbCr {
  Image y, cb, cr;
};

struct RGB {
  Image r, g, b;
};

// Full-range BT.601, chroma centered at 0.5.
inline YCbCr to_ycbcr(const Image& r, const Image& g, const Image& b) {
  if (!r.same_dims(g) || !r.same_dims(b)) {
    throw std::invalid_argument("to_ycbcr: channel dimensions differ");
  }
  YCbCr out{Image(r.width(), r.height()), Image(r.width(), r.height()),
            Image(r.width(), r.height())};
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double R = r.data()[i], G = g.data()[i], B = b.data()[i];
    const double Y = 0.299 * R + 0.587 * G + 0.114 * B;
    out.y.data()[i] = Y;
    out.cb.data()[i] = 0.5 + (B - Y) / 1.772;
    out.cr.data()[i] = 0.5 + (R - Y) / 1.402;
  }
  return out;
}

inline RGB from_ycbcr(const Image& y, const Image& cb, const Image& cr) {
  if (!y.same_dims(cb) || !y.same_dims(cr)) {
    throw std::invalid_argument("from_ycbcr: channel dimensions differ");
  }
  RGB out{Image(y.width(), y.height()), Image(y.width(), y.height()),
          Image(y.width(), y.height())};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double Y = y.data()[i];
    const double Cb = cb.data()[i] - 0.5, Cr = cr.data()[i] - 0.5;
    const double R = Y + 1.402 * Cr;
    const double B = Y + 1.772 * Cb;
    const double G = (Y - 0.299 * R - 0.114 * B) / 0.587;
    out.r.data()[i] = R;
    out.g.data()[i] = G;
    out.b.data()[i] = B;
  }
  return out;
}

}  // namespace mmcsr
