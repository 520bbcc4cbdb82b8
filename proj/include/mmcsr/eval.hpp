#pragma once

/// @file
/// Quality metrics, degradation of ground-truth sequences and synthetic test
/// scenes with known motion.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcsr/bicubic.hpp"
#include "mmcsr/core.hpp"

namespace mmcsr {

struct EvalResult {
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t frameIndex = 0;
  std::size_t cropMargin = 0;
};

inline double mean_squared_error(const Image& a, const Image& b) {
  if (!a.same_dims(b)) throw std::invalid_argument("mean_squared_error: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

/// Peak value 1. Identical images give +infinity.
inline double psnr(const Image& a, const Image& b) {
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

/// Mean SSIM over all 11x11 Gaussian windows (sigma 1.5) fully inside the
/// image, C1 = 0.01^2, C2 = 0.03^2. Images narrower than 11 pixels use the
/// largest odd window that fits.
inline double ssim(const Image& a, const Image& b) {
  if (!a.same_dims(b)) throw std::invalid_argument("ssim: dimension mismatch");
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  auto odd_fit = [](std::size_t n) { return std::min<std::size_t>(11, n % 2 == 1 ? n : n - 1); };
  const std::size_t wx = odd_fit(a.width()), wy = odd_fit(a.height());

  auto window_1d = [](std::size_t size) {
    std::vector<double> k(size);
    const double c = static_cast<double>(size / 2);
    double sum = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      const double d = static_cast<double>(i) - c;
      k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
  };
  const auto kx = window_1d(wx), ky = window_1d(wy);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + wy <= a.height(); ++y0) {
    for (std::size_t x0 = 0; x0 + wx <= a.width(); ++x0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t j = 0; j < wy; ++j) {
        for (std::size_t i = 0; i < wx; ++i) {
          const double wgt = ky[j] * kx[i];
          const double va = a(x0 + i, y0 + j), vb = b(x0 + i, y0 + j);
          ma += wgt * va;
          mb += wgt * vb;
          saa += wgt * va * va;
          sbb += wgt * vb * vb;
          sab += wgt * va * vb;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

inline Image crop_image(const Image& img, std::size_t margin) {
  if (2 * margin >= img.width() || 2 * margin >= img.height()) {
    throw std::invalid_argument("crop_image: margin " + std::to_string(margin) + " too large for " +
                                std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  Image out(img.width() - 2 * margin, img.height() - 2 * margin);
  for (std::size_t y = 0; y < out.height(); ++y) {
    for (std::size_t x = 0; x < out.width(); ++x) out(x, y) = img(x + margin, y + margin);
  }
  return out;
}

/// PSNR/SSIM of frame floor(n/2) after removing `crop` pixels on each side.
inline EvalResult evaluate_central(const FrameSequence& result, const FrameSequence& truth, std::size_t crop = 20) {
  if (result.size() != truth.size()) throw std::invalid_argument("evaluate_central: frame counts differ");
  if (result.width() != truth.width() || result.height() != truth.height()) {
    throw std::invalid_argument("evaluate_central: frame dims differ");
  }
  const std::size_t idx = result.size() / 2;
  const Image a = crop_image(result[idx], crop);
  const Image b = crop_image(truth[idx], crop);
  return EvalResult{psnr(a, b), ssim(a, b), idx, crop};
}

/// Bicubic downsampling to floor(dims / factor), clipped to [0,1].
inline FrameSequence generate_lowres(const FrameSequence& truth, double factor) {
  if (!(factor > 1.0)) throw std::invalid_argument("generate_lowres: factor must exceed 1");
  const auto w = static_cast<std::size_t>(std::floor(static_cast<double>(truth.width()) / factor + 1e-9));
  const auto h = static_cast<std::size_t>(std::floor(static_cast<double>(truth.height()) / factor + 1e-9));
  if (w < 8 || h < 8) throw std::invalid_argument("generate_lowres: output dims below 8");
  return clip_sequence(resize_bicubic(truth, w, h));
}

/// Frame k samples `base` at offset k * shift inside a fixed window, so
/// frame_{k+1}(x) = frame_k(x + shift).
inline FrameSequence synth_translation_sequence(const Image& base, std::size_t n, double shift_x, double shift_y) {
  if (n == 0) throw std::invalid_argument("synth_translation_sequence: n must be positive");
  const double span_x = std::abs(shift_x) * static_cast<double>(n - 1);
  const double span_y = std::abs(shift_y) * static_cast<double>(n - 1);
  const auto reach_x = static_cast<std::ptrdiff_t>(std::ceil(span_x));
  const auto reach_y = static_cast<std::ptrdiff_t>(std::ceil(span_y));
  const std::ptrdiff_t out_w = static_cast<std::ptrdiff_t>(base.width()) - 4 - reach_x;
  const std::ptrdiff_t out_h = static_cast<std::ptrdiff_t>(base.height()) - 4 - reach_y;
  if (out_w < 1 || out_h < 1) throw std::invalid_argument("synth_translation_sequence: window exits base");
  const double x0 = 2.0 + (shift_x < 0 ? static_cast<double>(reach_x) : 0.0);
  const double y0 = 2.0 + (shift_y < 0 ? static_cast<double>(reach_y) : 0.0);
  std::vector<Image> frames;
  for (std::size_t k = 0; k < n; ++k) {
    Image f(static_cast<std::size_t>(out_w), static_cast<std::size_t>(out_h));
    const double ox = x0 + static_cast<double>(k) * shift_x, oy = y0 + static_cast<double>(k) * shift_y;
    for (std::size_t y = 0; y < f.height(); ++y) {
      for (std::size_t x = 0; x < f.width(); ++x) {
        f(x, y) = sample_bicubic(base, ox + static_cast<double>(x), oy + static_cast<double>(y));
      }
    }
    frames.push_back(std::move(f));
  }
  return FrameSequence(std::move(frames));
}

/// Deterministic text-like test pattern: dark glyph strokes on a light page,
/// laid out in rows of fixed-size cells.
inline Image synth_text_image(std::size_t width, std::size_t height, std::uint32_t seed = 7,
                              std::size_t cell = 8) {
  Image img(width, height, 0.92);
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> gap(0, 7);
  const std::size_t stroke = std::max<std::size_t>(1, cell / 5);
  for (std::size_t cy = 1; cy + cell + 1 < height; cy += cell + cell / 2) {
    for (std::size_t cx = 1; cx + cell < width; cx += cell) {
      if (gap(rng) == 0) continue;  // word break
      // Each glyph is a subset of 3 horizontal and 3 vertical bars.
      for (int bar = 0; bar < 6; ++bar) {
        if (coin(rng) == 0) continue;
        const bool horizontal = bar < 3;
        const std::size_t pos = static_cast<std::size_t>(bar % 3) * (cell - 1 - stroke) / 2;
        for (std::size_t a = 0; a + 2 < cell; ++a) {
          for (std::size_t s = 0; s < stroke; ++s) {
            const std::size_t x = cx + (horizontal ? a : pos + s);
            const std::size_t y = cy + (horizontal ? pos + s : a);
            if (x < width && y < height) img(x, y) = 0.08;
          }
        }
      }
    }
  }
  return img;
}

/// Smooth random texture (sum of random sinusoids), values in [0.1, 0.9].
inline Image synth_texture_image(std::size_t width, std::size_t height, std::uint32_t seed = 3, int waves = 24) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> freq(0.08, 0.6), phase(0.0, 6.283185307179586), dir(0.0, 3.141592653589793);
  std::vector<double> fx, fy, ph;
  for (int i = 0; i < waves; ++i) {
    const double f = freq(rng), d = dir(rng);
    fx.push_back(f * std::cos(d));
    fy.push_back(f * std::sin(d));
    ph.push_back(phase(rng));
  }
  Image img(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double v = 0.0;
      for (int i = 0; i < waves; ++i) {
        v += std::sin(fx[static_cast<std::size_t>(i)] * static_cast<double>(x) +
                      fy[static_cast<std::size_t>(i)] * static_cast<double>(y) + ph[static_cast<std::size_t>(i)]);
      }
      img(x, y) = 0.5 + 0.4 * v / std::sqrt(2.0 * waves);
    }
  }
  return clip_image(img, 0.1, 0.9);
}

/// One CSV row: "sequence,method,frame,psnr,ssim". PSNR infinity prints "inf".
inline void write_metrics_row(std::ostream& os, const std::string& sequence, const std::string& method,
                              const EvalResult& r) {
  char psnr_buf[48], ssim_buf[48];
  if (std::isinf(r.psnr)) {
    std::snprintf(psnr_buf, sizeof psnr_buf, "inf");
  } else {
    std::snprintf(psnr_buf, sizeof psnr_buf, "%.6f", r.psnr);
  }
  std::snprintf(ssim_buf, sizeof ssim_buf, "%.6f", r.ssim);
  os << sequence << ',' << method << ',' << r.frameIndex << ',' << psnr_buf << ',' << ssim_buf << '\n';
}

inline void write_metrics_header(std::ostream& os) { os << "sequence,method,frame,psnr,ssim\n"; }

}  // namespace mmcsr
