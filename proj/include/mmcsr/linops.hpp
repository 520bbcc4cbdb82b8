#pragma once

/// @file
/// Sparse linear operators of the joint super-resolution model: image
/// gradients, Gaussian blur, decimation, bicubic warping and the block
/// motion-corrected time derivative. Each operator is an explicit sparse
/// matrix, so the adjoint is the exact transpose and the absolute row/column
/// sums needed for preconditioning are available directly.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcsr/bicubic.hpp"
#include "mmcsr/core.hpp"

namespace mmcsr {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;
using Index = Eigen::Index;

class LinearOperator {
 public:
  LinearOperator() = default;

  explicit LinearOperator(SparseMatrix m) : m_(std::move(m)) {
    m_.prune(0.0);
    m_.makeCompressed();
  }

  static LinearOperator from_triplets(Index rows, Index cols, const std::vector<Triplet>& t) {
    SparseMatrix m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return LinearOperator(std::move(m));
  }

  static LinearOperator zero(Index rows, Index cols) { return LinearOperator(SparseMatrix(rows, cols)); }

  static LinearOperator identity(Index n) {
    SparseMatrix m(n, n);
    m.setIdentity();
    return LinearOperator(std::move(m));
  }

  Index input_dim() const noexcept { return m_.cols(); }
  Index output_dim() const noexcept { return m_.rows(); }
  Index nonzeros() const noexcept { return m_.nonZeros(); }
  const SparseMatrix& matrix() const noexcept { return m_; }

  Vector apply(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != input_dim()) throw std::invalid_argument(dim_message("apply", x.size(), input_dim()));
    return m_ * x;
  }

  Vector apply_adjoint(const Eigen::Ref<const Vector>& y) const {
    if (y.size() != output_dim()) {
      throw std::invalid_argument(dim_message("apply_adjoint", y.size(), output_dim()));
    }
    return m_.transpose() * y;
  }

  Vector row_abs_sums() const {
    Vector s = Vector::Zero(output_dim());
    for (Index r = 0; r < m_.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m_, r); it; ++it) s[r] += std::abs(it.value());
    }
    return s;
  }

  Vector col_abs_sums() const {
    Vector s = Vector::Zero(input_dim());
    for (Index r = 0; r < m_.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m_, r); it; ++it) s[it.col()] += std::abs(it.value());
    }
    return s;
  }

  Eigen::MatrixXd to_dense() const { return Eigen::MatrixXd(m_); }

  LinearOperator scaled(double s) const { return LinearOperator(SparseMatrix(s * m_)); }

  /// Debug dump: "row col value" per nonzero, sorted by (row, col).
  void write_coordinate_list(std::ostream& os) const {
    char buf[96];
    for (Index r = 0; r < m_.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m_, r); it; ++it) {
        std::snprintf(buf, sizeof buf, "%lld %lld %.17g\n", static_cast<long long>(it.row()),
                      static_cast<long long>(it.col()), it.value());
        os << buf;
      }
    }
  }

 private:
  static std::string dim_message(const char* what, Index got, Index want) {
    return std::string("LinearOperator::") + what + ": got length " + std::to_string(got) +
           ", expected " + std::to_string(want);
  }

  SparseMatrix m_;
};

/// outer ∘ inner.
inline LinearOperator compose(const LinearOperator& outer, const LinearOperator& inner) {
  if (outer.input_dim() != inner.output_dim()) {
    throw std::invalid_argument("compose: inner output " + std::to_string(inner.output_dim()) +
                                " does not match outer input " + std::to_string(outer.input_dim()));
  }
  return LinearOperator(SparseMatrix(outer.matrix() * inner.matrix()));
}

inline LinearOperator operator+(const LinearOperator& a, const LinearOperator& b) {
  if (a.input_dim() != b.input_dim() || a.output_dim() != b.output_dim()) {
    throw std::invalid_argument("operator sum: dimension mismatch");
  }
  return LinearOperator(SparseMatrix(a.matrix() + b.matrix()));
}

inline LinearOperator operator-(const LinearOperator& a, const LinearOperator& b) {
  return a + b.scaled(-1.0);
}

inline LinearOperator operator*(double s, const LinearOperator& a) { return a.scaled(s); }

/// Stacks operators sharing an input space on top of each other.
inline LinearOperator vstack(const std::vector<LinearOperator>& ops) {
  if (ops.empty()) throw std::invalid_argument("vstack: no operators");
  const Index cols = ops.front().input_dim();
  Index rows = 0;
  std::vector<Triplet> t;
  for (const auto& op : ops) {
    if (op.input_dim() != cols) throw std::invalid_argument("vstack: input dimensions differ");
    const auto& m = op.matrix();
    for (Index r = 0; r < m.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) t.emplace_back(rows + r, it.col(), it.value());
    }
    rows += op.output_dim();
  }
  return LinearOperator::from_triplets(rows, cols, t);
}

/// Places operators sharing an output space side by side.
inline LinearOperator hstack(const std::vector<LinearOperator>& ops) {
  if (ops.empty()) throw std::invalid_argument("hstack: no operators");
  const Index rows = ops.front().output_dim();
  Index cols = 0;
  std::vector<Triplet> t;
  for (const auto& op : ops) {
    if (op.output_dim() != rows) throw std::invalid_argument("hstack: output dimensions differ");
    const auto& m = op.matrix();
    for (Index r = 0; r < m.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) t.emplace_back(r, cols + it.col(), it.value());
    }
    cols += op.input_dim();
  }
  return LinearOperator::from_triplets(rows, cols, t);
}

inline LinearOperator block_diag(const LinearOperator& op, std::size_t count) {
  if (count == 0) throw std::invalid_argument("block_diag: count must be positive");
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(op.nonzeros()) * count);
  const auto& m = op.matrix();
  for (std::size_t b = 0; b < count; ++b) {
    const Index r0 = static_cast<Index>(b) * op.output_dim();
    const Index c0 = static_cast<Index>(b) * op.input_dim();
    for (Index r = 0; r < m.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) t.emplace_back(r0 + r, c0 + it.col(), it.value());
    }
  }
  const auto n = static_cast<Index>(count);
  return LinearOperator::from_triplets(n * op.output_dim(), n * op.input_dim(), t);
}

// ---------------------------------------------------------------------------
// Gradients

namespace detail {

inline void gradient_triplets(std::size_t width, std::size_t height, Index col0, Index row_x0,
                              Index row_y0, std::vector<Triplet>& t) {
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const Index p = static_cast<Index>(y * width + x);
      if (x + 1 < width) {
        t.emplace_back(row_x0 + p, col0 + p, -1.0);
        t.emplace_back(row_x0 + p, col0 + p + 1, 1.0);
      }
      if (y + 1 < height) {
        t.emplace_back(row_y0 + p, col0 + p, -1.0);
        t.emplace_back(row_y0 + p, col0 + p + static_cast<Index>(width), 1.0);
      }
    }
  }
}

inline void check_gradient_dims(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0 || width * height < 2) {
    throw std::invalid_argument("gradient: degenerate dimensions " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
}

}  // namespace detail

/// Forward differences with a zero last row/column; output is the x-plane
/// followed by the y-plane.
inline LinearOperator gradient(std::size_t width, std::size_t height) {
  detail::check_gradient_dims(width, height);
  const auto p = static_cast<Index>(width * height);
  std::vector<Triplet> t;
  t.reserve(4 * static_cast<std::size_t>(p));
  detail::gradient_triplets(width, height, 0, 0, p, t);
  return LinearOperator::from_triplets(2 * p, p, t);
}

/// Frame-wise gradient of a stacked sequence; output is all x-planes (frame
/// order) followed by all y-planes, so entry p of each half refers to the
/// same stacked pixel p.
inline LinearOperator sequence_gradient(std::size_t width, std::size_t height, std::size_t frames) {
  detail::check_gradient_dims(width, height);
  const auto ppf = static_cast<Index>(width * height);
  const auto total = ppf * static_cast<Index>(frames);
  std::vector<Triplet> t;
  t.reserve(4 * static_cast<std::size_t>(total));
  for (std::size_t k = 0; k < frames; ++k) {
    const Index off = static_cast<Index>(k) * ppf;
    detail::gradient_triplets(width, height, off, off, total + off, t);
  }
  return LinearOperator::from_triplets(2 * total, total, t);
}

// ---------------------------------------------------------------------------
// Blur

/// Normalized sampled Gaussian on offsets -r..r, r = ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  const auto radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * static_cast<std::size_t>(radius) + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Half-sample symmetric reflection into [0, n).
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - 1 - i;
  return static_cast<std::size_t>(i);
}

namespace detail {

// 1-D convolution along one axis of a width x height image.
inline LinearOperator blur_axis(const std::vector<double>& kernel, std::size_t width,
                                std::size_t height, bool along_x) {
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const std::size_t len = along_x ? width : height;
  std::vector<Triplet> t;
  t.reserve(width * height * kernel.size());
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const Index row = static_cast<Index>(y * width + x);
      const auto c = static_cast<std::ptrdiff_t>(along_x ? x : y);
      for (std::ptrdiff_t o = -radius; o <= radius; ++o) {
        const std::size_t j = reflect_index(c + o, len);
        const std::size_t col = along_x ? y * width + j : j * width + x;
        t.emplace_back(row, static_cast<Index>(col), kernel[static_cast<std::size_t>(o + radius)]);
      }
    }
  }
  const auto p = static_cast<Index>(width * height);
  return LinearOperator::from_triplets(p, p, t);
}

}  // namespace detail

/// Separable Gaussian convolution with symmetric boundary reflection.
inline LinearOperator gaussian_blur(double sigma, std::size_t width, std::size_t height) {
  const auto k = gaussian_kernel(sigma);
  return compose(detail::blur_axis(k, width, height, false), detail::blur_axis(k, width, height, true));
}

// ---------------------------------------------------------------------------
// Decimation

inline std::size_t decimated_size(std::size_t hi, double factor) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(hi) / factor + 1e-9));
}

namespace detail {

// Point sample at integer positions, linear interpolation otherwise.
inline std::vector<std::pair<std::size_t, double>> sample_taps(double pos, std::size_t n) {
  pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
  const double r = std::round(pos);
  if (std::abs(pos - r) < 1e-9) return {{static_cast<std::size_t>(r), 1.0}};
  const double f = std::floor(pos);
  const double t = pos - f;
  const auto i0 = static_cast<std::size_t>(f);
  const std::size_t i1 = std::min(i0 + 1, n - 1);
  if (i1 == i0) return {{i0, 1.0}};
  return {{i0, 1.0 - t}, {i1, t}};
}

}  // namespace detail

/// Samples the high-res grid at positions factor*i + phase along both axes.
/// Integer positions are point samples; fractional ones are bilinear.
inline LinearOperator decimate(double factor, std::size_t hi_width, std::size_t hi_height,
                               double phase = 0.0) {
  if (!(factor >= 1.0)) throw std::invalid_argument("decimate: factor must be at least 1");
  const std::size_t lw = decimated_size(hi_width, factor);
  const std::size_t lh = decimated_size(hi_height, factor);
  if (lw < 1 || lh < 1) throw std::invalid_argument("decimate: output dimensions below 1");
  std::vector<Triplet> t;
  t.reserve(lw * lh * 4);
  for (std::size_t j = 0; j < lh; ++j) {
    const auto ty = detail::sample_taps(factor * static_cast<double>(j) + phase, hi_height);
    for (std::size_t i = 0; i < lw; ++i) {
      const auto tx = detail::sample_taps(factor * static_cast<double>(i) + phase, hi_width);
      const auto row = static_cast<Index>(j * lw + i);
      for (const auto& [yy, wy] : ty) {
        for (const auto& [xx, wx] : tx) t.emplace_back(row, static_cast<Index>(yy * hi_width + xx), wy * wx);
      }
    }
  }
  return LinearOperator::from_triplets(static_cast<Index>(lw * lh),
                                       static_cast<Index>(hi_width * hi_height), t);
}

/// diag(D B, ..., D B) over `frames` stacked frames.
inline LinearOperator block_diag_data_operator(const LinearOperator& blur, const LinearOperator& dec,
                                               std::size_t frames) {
  return block_diag(compose(dec, blur), frames);
}

// ---------------------------------------------------------------------------
// Warping

/// Bicubic interpolation matrix W with (W u)(x) ~ u(x + v(x)); sample
/// coordinates are clamped to the image domain.
inline LinearOperator warp_matrix(const FlowField& flow) {
  const std::size_t w = flow.width(), h = flow.height();
  std::vector<Triplet> t;
  t.reserve(w * h * 16);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = flow.vx(x, y), dy = flow.vy(x, y);
      if (!std::isfinite(dx) || !std::isfinite(dy)) {
        throw std::invalid_argument("warp_matrix: non-finite flow value");
      }
      const double px = std::clamp(static_cast<double>(x) + dx, 0.0, static_cast<double>(w - 1));
      const double py = std::clamp(static_cast<double>(y) + dy, 0.0, static_cast<double>(h - 1));
      const double fx = std::floor(px), fy = std::floor(py);
      const auto wx = bicubic_weights(px - fx);
      const auto wy = bicubic_weights(py - fy);
      const auto row = static_cast<Index>(y * w + x);
      for (int j = 0; j < 4; ++j) {
        if (wy[j] == 0.0) continue;
        const auto yy = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(fy) + j - 1, 0,
                                                   static_cast<std::ptrdiff_t>(h) - 1);
        for (int i = 0; i < 4; ++i) {
          if (wx[i] == 0.0) continue;
          const auto xx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(fx) + i - 1, 0,
                                                     static_cast<std::ptrdiff_t>(w) - 1);
          t.emplace_back(row, static_cast<Index>(yy) * static_cast<Index>(w) + xx, wy[j] * wx[i]);
        }
      }
    }
  }
  const auto p = static_cast<Index>(w * h);
  return LinearOperator::from_triplets(p, p, t);
}

/// Block motion-corrected time derivative over a stacked sequence of
/// `frames` frames. Block row k (0-based, k < frames-1) is
///   backward flow: (u_k - W_k u_{k+1}) / h
///   forward flow:  (W_k u_k - u_{k+1}) / h
/// and the last block row is zero.
inline LinearOperator motion_time_derivative(const FlowSet& flows, std::size_t frames,
                                             std::size_t width, std::size_t height, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("motion_time_derivative: h must be positive");
  if (frames == 0 || flows.size() + 1 != frames) {
    throw std::invalid_argument("motion_time_derivative: expected " + std::to_string(frames ? frames - 1 : 0) +
                                " flows, got " + std::to_string(flows.size()));
  }
  const auto ppf = static_cast<Index>(width * height);
  const double s = 1.0 / h;
  std::vector<Triplet> t;
  for (std::size_t k = 0; k + 1 < frames; ++k) {
    const auto& f = flows.flows[k];
    if (f.width() != width || f.height() != height) {
      throw std::invalid_argument("motion_time_derivative: flow " + std::to_string(k) +
                                  " does not match frame dimensions");
    }
    const LinearOperator warp = warp_matrix(f);
    const bool backward = flows.directions[k] == FlowDirection::backward;
    const Index row0 = static_cast<Index>(k) * ppf;
    const Index ident_col0 = backward ? row0 : row0 + ppf;
    const Index warp_col0 = backward ? row0 + ppf : row0;
    const double ident_sign = backward ? s : -s;
    const double warp_sign = backward ? -s : s;
    for (Index p = 0; p < ppf; ++p) t.emplace_back(row0 + p, ident_col0 + p, ident_sign);
    const auto& m = warp.matrix();
    for (Index r = 0; r < m.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
        t.emplace_back(row0 + r, warp_col0 + it.col(), warp_sign * it.value());
      }
    }
  }
  const Index total = ppf * static_cast<Index>(frames);
  return LinearOperator::from_triplets(total, total, t);
}

}  // namespace mmcsr
