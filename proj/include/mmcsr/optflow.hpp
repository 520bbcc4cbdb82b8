#pragma once

/// @file
/// Coarse-to-fine optical flow with L1 brightness and gradient constancy and
/// a Huber-regularized flow gradient. Each warp linearizes the data terms
/// around the current flow and solves the resulting convex problem with the
/// primal-dual solver.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "mmcsr/bicubic.hpp"
#include "mmcsr/core.hpp"
#include "mmcsr/linops.hpp"
#include "mmcsr/pdsolve.hpp"
#include "mmcsr/prox.hpp"

namespace mmcsr {

/// Central differences with replicate borders.
inline std::pair<Image, Image> central_gradient(const Image& img) {
  Image gx(img.width(), img.height()), gy(img.width(), img.height());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const auto xi = static_cast<std::ptrdiff_t>(x), yi = static_cast<std::ptrdiff_t>(y);
      gx(x, y) = 0.5 * (img.at_clamped(xi + 1, yi) - img.at_clamped(xi - 1, yi));
      gy(x, y) = 0.5 * (img.at_clamped(xi, yi + 1) - img.at_clamped(xi, yi - 1));
    }
  }
  return {std::move(gx), std::move(gy)};
}

/// img(x + v(x)) by bicubic sampling.
inline Image warp_image(const Image& img, const FlowField& flow) {
  if (!img.same_dims(flow.vx)) throw std::invalid_argument("warp_image: flow dims differ from image");
  Image out(img.width(), img.height());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      out(x, y) = sample_bicubic(img, static_cast<double>(x) + flow.vx(x, y),
                                 static_cast<double>(y) + flow.vy(x, y));
    }
  }
  return out;
}

inline Image gaussian_smooth(const Image& img, double sigma) {
  const auto op = gaussian_blur(sigma, img.width(), img.height());
  const Vector out = op.apply(Eigen::Map<const Vector>(img.data().data(), static_cast<Index>(img.size())));
  return Image(img.width(), img.height(), std::vector<double>(out.data(), out.data() + out.size()));
}

struct Pyramid {
  /// (fixed, moving) per level; level 0 is the finest.
  std::vector<std::pair<Image, Image>> levels;
  /// Cumulative scale of each level relative to level 0.
  std::vector<double> scales;
};

inline Pyramid build_pyramid(const Image& fixed, const Image& moving, const FlowConfig& cfg) {
  cfg.validate();
  if (!fixed.same_dims(moving)) throw std::invalid_argument("build_pyramid: image dims differ");
  Pyramid p;
  p.levels.emplace_back(fixed, moving);
  p.scales.push_back(1.0);
  for (;;) {
    const auto& [f, m] = p.levels.back();
    const auto w = static_cast<std::size_t>(std::ceil(static_cast<double>(f.width()) * cfg.pyramidScale));
    const auto h = static_cast<std::size_t>(std::ceil(static_cast<double>(f.height()) * cfg.pyramidScale));
    if (std::min(w, h) < cfg.minLevelSize) break;
    Image fs = resize_bicubic(gaussian_smooth(f, cfg.presmoothSigma), w, h, false);
    Image ms = resize_bicubic(gaussian_smooth(m, cfg.presmoothSigma), w, h, false);
    p.levels.emplace_back(std::move(fs), std::move(ms));
    p.scales.push_back(static_cast<double>(w) / static_cast<double>(fixed.width()));
  }
  return p;
}

/// Componentwise median over (2r+1)^2 windows with replicate borders.
inline FlowField median_filter_flow(const FlowField& flow, int radius) {
  if (radius < 1) throw std::invalid_argument("median_filter_flow: radius must be at least 1");
  auto filter = [radius](const Image& img) {
    Image out(img.width(), img.height());
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
    for (std::size_t y = 0; y < img.height(); ++y) {
      for (std::size_t x = 0; x < img.width(); ++x) {
        window.clear();
        for (int dy = -radius; dy <= radius; ++dy) {
          for (int dx = -radius; dx <= radius; ++dx) {
            window.push_back(img.at_clamped(static_cast<std::ptrdiff_t>(x) + dx, static_cast<std::ptrdiff_t>(y) + dy));
          }
        }
        const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
        std::nth_element(window.begin(), mid, window.end());
        out(x, y) = *mid;
      }
    }
    return out;
  };
  return FlowField(filter(flow.vx), filter(flow.vy));
}

/// Bicubic resize of each component to (width, height), displacements scaled
/// by the per-axis grid ratio.
inline FlowField resize_flow(const FlowField& flow, std::size_t width, std::size_t height) {
  const double sx = static_cast<double>(width) / static_cast<double>(flow.width());
  const double sy = static_cast<double>(height) / static_cast<double>(flow.height());
  Image vx = resize_bicubic(flow.vx, width, height);
  Image vy = resize_bicubic(flow.vy, width, height);
  for (double& v : vx.data()) v *= sx;
  for (double& v : vy.data()) v *= sy;
  return FlowField(std::move(vx), std::move(vy));
}

/// Flow on the grid magnified by `factor` (extent upscaled_size(., factor)).
inline FlowField upsample_flow(const FlowField& flow, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("upsample_flow: factor must be positive");
  return resize_flow(flow, upscaled_size(flow.width(), factor), upscaled_size(flow.height(), factor));
}

inline FlowSet upsample_flows(const FlowSet& flows, double factor) {
  std::vector<FlowField> out;
  out.reserve(flows.size());
  for (const auto& f : flows.flows) out.push_back(upsample_flow(f, factor));
  return FlowSet(std::move(out), flows.directions);
}

namespace detail {

inline Eigen::Map<const Vector> as_vector(const Image& img) {
  return {img.data().data(), static_cast<Index>(img.size())};
}

// Diagonal block [diag(a) diag(b)] over the stacked (dvx, dvy) unknown.
inline void append_pair_rows(const Image& a, const Image& b, Index row0, std::vector<Triplet>& t) {
  const auto p = static_cast<Index>(a.size());
  for (Index i = 0; i < p; ++i) {
    const double va = a.data()[static_cast<std::size_t>(i)];
    const double vb = b.data()[static_cast<std::size_t>(i)];
    if (va != 0.0) t.emplace_back(row0 + i, i, va);
    if (vb != 0.0) t.emplace_back(row0 + i, p + i, vb);
  }
}

}  // namespace detail

/// One linearization: solves
///   min_dv sum |rho_b + g_b.dv| + |rho_gx + g_gx.dv| + |rho_gy + g_gy.dv|
///          + beta sum_j ||grad(vTilde_j + dv_j)||_H
/// and returns vTilde + dv.
inline FlowField linearized_flow_step(const Image& fixed, const Image& moving, const FlowField& vTilde,
                                      const FlowConfig& cfg) {
  if (!fixed.same_dims(moving) || !fixed.same_dims(vTilde.vx)) {
    throw std::invalid_argument("linearized_flow_step: dimension mismatch");
  }
  const std::size_t w = fixed.width(), h = fixed.height();
  const auto p = static_cast<Index>(w * h);

  const auto [fgx, fgy] = central_gradient(fixed);
  const auto [mgx, mgy] = central_gradient(moving);
  const auto [mgxx, mgxy] = central_gradient(mgx);
  const auto [mgyx, mgyy] = central_gradient(mgy);

  const Image iw = warp_image(moving, vTilde);
  const Image ix = warp_image(mgx, vTilde), iy = warp_image(mgy, vTilde);
  const Image ixx = warp_image(mgxx, vTilde), ixy = warp_image(mgxy, vTilde);
  const Image iyx = warp_image(mgyx, vTilde), iyy = warp_image(mgyy, vTilde);

  // Offsets c with data term |K dv - c|, c = -rho.
  Vector offset(3 * p);
  for (Index i = 0; i < p; ++i) {
    const auto s = static_cast<std::size_t>(i);
    offset[i] = -(iw.data()[s] - fixed.data()[s]);
    offset[p + i] = -(ix.data()[s] - fgx.data()[s]);
    offset[2 * p + i] = -(iy.data()[s] - fgy.data()[s]);
  }
  std::vector<Triplet> t;
  t.reserve(6 * static_cast<std::size_t>(p));
  detail::append_pair_rows(ix, iy, 0, t);
  detail::append_pair_rows(ixx, ixy, p, t);
  detail::append_pair_rows(iyx, iyy, 2 * p, t);
  auto data_op = LinearOperator::from_triplets(3 * p, 2 * p, t);

  const LinearOperator grad = gradient(w, h);
  const LinearOperator zero = LinearOperator::zero(grad.output_dim(), p);
  const Vector grad_vx = grad.apply(detail::as_vector(vTilde.vx));
  const Vector grad_vy = grad.apply(detail::as_vector(vTilde.vy));

  SaddlePointProblem problem;
  problem.primalBlocks.push_back({"dv", 2 * p, {}, {}});
  problem.dualBlocks.push_back(
      {"constancy", std::move(data_op), 1,
       [offset](Eigen::Ref<Vector> y, const Eigen::Ref<const Vector>& sigma) { prox_l1_translated(y, sigma, offset); },
       [offset](const Eigen::Ref<const Vector>& kx) { return (kx - offset).lpNorm<1>(); }});
  const double beta = cfg.beta, eps = cfg.huberEpsilon;
  for (int j = 0; j < 2; ++j) {
    const Vector& base = j == 0 ? grad_vx : grad_vy;
    LinearOperator op = j == 0 ? hstack({grad, zero}) : hstack({zero, grad});
    problem.dualBlocks.push_back(
        {j == 0 ? "smooth_x" : "smooth_y", std::move(op), 2,
         [base, beta, eps](Eigen::Ref<Vector> y, const Eigen::Ref<const Vector>& sigma) {
           y += sigma.cwiseProduct(base);
           prox_huber_dual(y, sigma, 2, beta, eps);
         },
         [base, beta, eps](const Eigen::Ref<const Vector>& kx) { return beta * huber_norm(kx + base, 2, eps); }});
  }

  SolverOptions opts;
  opts.maxIterations = cfg.innerIterations;
  opts.tolerance = 0.0;
  opts.traceInterval = 0;
  const auto res = solve(problem, opts);

  Image vx = vTilde.vx, vy = vTilde.vy;
  for (Index i = 0; i < p; ++i) {
    vx.data()[static_cast<std::size_t>(i)] += res.primal[i];
    vy.data()[static_cast<std::size_t>(i)] += res.primal[p + i];
  }
  return FlowField(std::move(vx), std::move(vy));
}

/// Flow v with moving(x + v(x)) ~ fixed(x).
inline FlowField estimate_pair_flow(const Image& fixed, const Image& moving, const FlowConfig& cfg) {
  cfg.validate();
  if (!fixed.same_dims(moving)) throw std::invalid_argument("estimate_pair_flow: image dims differ");
  const Pyramid pyr = build_pyramid(fixed, moving, cfg);
  FlowField v;
  for (std::size_t l = pyr.levels.size(); l-- > 0;) {
    const auto& [f, m] = pyr.levels[l];
    if (l + 1 == pyr.levels.size()) {
      v = FlowField::zero(f.width(), f.height());
    } else {
      v = resize_flow(v, f.width(), f.height());
    }
    for (int k = 0; k < cfg.warpsPerLevel; ++k) v = linearized_flow_step(f, m, v, cfg);
    if (cfg.medianRadius > 0) v = median_filter_flow(v, cfg.medianRadius);
  }
  return v;
}

/// The n-1 pairwise flows with alternating direction. Pair k uses frame k as
/// the fixed image for backward flows and frame k+1 for forward flows. Pairs
/// are independent and run on up to `workers` threads (0: hardware count).
inline FlowSet estimate_sequence_flows(const FrameSequence& frames, const FlowConfig& cfg, unsigned workers = 0) {
  cfg.validate();
  if (frames.size() < 2) throw std::invalid_argument("estimate_sequence_flows: need at least 2 frames");
  const std::size_t pairs = frames.size() - 1;
  std::vector<FlowField> flows(pairs);
  std::vector<FlowDirection> dirs(pairs);
  std::vector<std::exception_ptr> errors(pairs);
  for (std::size_t k = 0; k < pairs; ++k) dirs[k] = direction_for_pair(k, cfg.parity);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < pairs; k = next++) {
      try {
        const bool backward = dirs[k] == FlowDirection::backward;
        const Image& fixed = backward ? frames[k] : frames[k + 1];
        const Image& moving = backward ? frames[k + 1] : frames[k];
        flows[k] = estimate_pair_flow(fixed, moving, cfg);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, pairs));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return FlowSet(std::move(flows), std::move(dirs));
}

}  // namespace mmcsr
