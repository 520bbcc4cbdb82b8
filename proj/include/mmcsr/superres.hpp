#pragma once

/// @file
/// Joint multi-frame super-resolution with spatio-temporal infimal
/// convolution:
///
///   min_{u,w} ||A u - f||_1 + alpha ||(grad w ; kappa Wt w)||_{2,1}
///                           + alpha ||(kappa grad (u-w) ; Wt (u-w))||_{2,1}
///
/// where A = diag(D B, ..., D B) blurs and decimates every frame and Wt is the
/// motion-corrected time derivative coupling consecutive high-res frames.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmcsr/bicubic.hpp"
#include "mmcsr/core.hpp"
#include "mmcsr/linops.hpp"
#include "mmcsr/optflow.hpp"
#include "mmcsr/pdsolve.hpp"
#include "mmcsr/prox.hpp"

namespace mmcsr {

struct SuperResProblem {
  LinearOperator dataOp;     // A: stacked high-res -> stacked low-res
  LinearOperator grad;       // [all x-planes ; all y-planes]
  LinearOperator timeDeriv;  // Wt, already scaled by 1/h
  FrameSequence lowRes;
  SuperResConfig config;
  double h = 1.0;
  std::size_t hiWidth = 0;
  std::size_t hiHeight = 0;

  std::size_t frames() const { return lowRes.size(); }
  Index hi_pixels() const { return static_cast<Index>(hiWidth * hiHeight * frames()); }
  Vector observations() const {
    const auto v = lowRes.stacked();
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  }
};

struct SuperResSolution {
  FrameSequence u;  // clipped to [0,1]
  FrameSequence w;  // part regularized by (grad ; kappa Wt)
  FrameSequence z;  // u - w
  SolveReport report;
};

struct SuperResSolveOptions {
  int traceInterval = 1;
  double stepRatio = 1.0;
  double preconditionExponent = 2.0;
  /// Attach the (grad ; kappa Wt) term to u - w instead of w.
  bool swapInfconvRoles = false;
};

namespace detail {

inline Vector stacked_vector(const FrameSequence& seq) {
  const auto v = seq.stacked();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline FrameSequence to_sequence(const Eigen::Ref<const Vector>& v, std::size_t width, std::size_t height,
                                 std::size_t frames) {
  return FrameSequence::from_stacked(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())),
                                     width, height, frames);
}

}  // namespace detail

/// Bicubic upsampling of every frame to the magnified grid.
inline FrameSequence bicubic_upsample(const FrameSequence& lowRes, double factor) {
  return resize_bicubic(lowRes, upscaled_size(lowRes.width(), factor), upscaled_size(lowRes.height(), factor));
}

/// h = ||Wt_1 u0||_1 / (||d_x u0||_1 + ||d_y u0||_1), with Wt_1 built for h = 1.
/// Returns 1 when either norm is below 1e-12.
inline double estimate_temporal_stepsize(const FrameSequence& u0, const FlowSet& flows) {
  const auto wt = motion_time_derivative(flows, u0.size(), u0.width(), u0.height(), 1.0);
  const auto grad = sequence_gradient(u0.width(), u0.height(), u0.size());
  const Vector x = detail::stacked_vector(u0);
  const double num = wt.apply(x).lpNorm<1>();
  const double den = grad.apply(x).lpNorm<1>();
  if (num < 1e-12 || den < 1e-12) return 1.0;
  return num / den;
}

/// Builds A, the sequence gradient and Wt. `flows` live on the high-res grid.
inline SuperResProblem assemble(const FrameSequence& lowRes, const FlowSet& flows, const SuperResConfig& cfg) {
  cfg.validate();
  const std::size_t n = lowRes.size();
  if (flows.size() + 1 != n) {
    throw std::invalid_argument("assemble: " + std::to_string(n) + " frames need " + std::to_string(n - 1) +
                                " flows, got " + std::to_string(flows.size()));
  }
  SuperResProblem prob;
  prob.lowRes = lowRes;
  prob.config = cfg;
  prob.hiWidth = upscaled_size(lowRes.width(), cfg.factor);
  prob.hiHeight = upscaled_size(lowRes.height(), cfg.factor);
  for (const auto& f : flows.flows) {
    if (f.width() != prob.hiWidth || f.height() != prob.hiHeight) {
      throw std::invalid_argument("assemble: flow dims " + std::to_string(f.width()) + "x" +
                                  std::to_string(f.height()) + " inconsistent with factor " +
                                  std::to_string(cfg.factor));
    }
  }
  // Sampling phase (factor-1)/2 puts low-res pixel i at the center of its
  // footprint, the same anchoring bicubic resizing uses.
  const auto blur = gaussian_blur(cfg.blur_sigma(), prob.hiWidth, prob.hiHeight);
  const auto dec = decimate(cfg.factor, prob.hiWidth, prob.hiHeight, 0.5 * (cfg.factor - 1.0));
  if (static_cast<std::size_t>(dec.output_dim()) != lowRes.pixels_per_frame()) {
    throw std::invalid_argument("assemble: decimated dims inconsistent with the low-res frames");
  }
  prob.dataOp = block_diag_data_operator(blur, dec, n);
  prob.grad = sequence_gradient(prob.hiWidth, prob.hiHeight, n);
  if (cfg.h) {
    prob.h = *cfg.h;
  } else if (n > 1) {
    prob.h = estimate_temporal_stepsize(bicubic_upsample(lowRes, cfg.factor), flows);
  }
  prob.timeDeriv = motion_time_derivative(flows, n, prob.hiWidth, prob.hiHeight, prob.h);
  return prob;
}

namespace detail {

// Channel-planar 3-vector per pixel: (weight_grad * grad ; weight_time * Wt).
inline LinearOperator infconv_rows(const SuperResProblem& p, double weight_grad, double weight_time) {
  return vstack({p.grad.scaled(weight_grad), p.timeDeriv.scaled(weight_time)});
}

}  // namespace detail

/// Direct evaluation of the objective at (u, w).
inline double energy_value(const SuperResProblem& problem, const FrameSequence& u, const FrameSequence& w) {
  if (u.size() != problem.frames() || w.size() != problem.frames() || u.width() != problem.hiWidth ||
      u.height() != problem.hiHeight || w.width() != problem.hiWidth || w.height() != problem.hiHeight) {
    throw std::invalid_argument("energy_value: dims do not match the problem");
  }
  const double alpha = problem.config.alpha, kappa = problem.config.kappa;
  const Vector uv = detail::stacked_vector(u), wv = detail::stacked_vector(w);
  const Vector zv = uv - wv;
  const double data = (problem.dataOp.apply(uv) - problem.observations()).lpNorm<1>();
  const double spat = l21_norm(detail::infconv_rows(problem, 1.0, kappa).apply(wv), 3);
  const double temp = l21_norm(detail::infconv_rows(problem, kappa, 1.0).apply(zv), 3);
  return data + alpha * spat + alpha * temp;
}

/// Solves the joint problem from u = bicubic(f), w = u / 2, zero duals.
inline SuperResSolution solve_superres(const SuperResProblem& problem, const SuperResSolveOptions& options = {}) {
  const Index np = problem.hi_pixels();
  const double alpha = problem.config.alpha, kappa = problem.config.kappa;
  const Vector f = problem.observations();

  const auto spatial = detail::infconv_rows(problem, 1.0, kappa);
  const auto temporal = detail::infconv_rows(problem, kappa, 1.0);
  const auto zeros_3 = LinearOperator::zero(spatial.output_dim(), np);
  // Over (u, w): w -> [0, R], u - w -> [R, -R].
  auto on_w = [&](const LinearOperator& r) { return hstack({zeros_3, r}); };
  auto on_z = [&](const LinearOperator& r) { return hstack({r, r.scaled(-1.0)}); };

  auto l21_prox = [alpha](Eigen::Ref<Vector> y, const Eigen::Ref<const Vector>&) { prox_l21_dual(y, 3, alpha); };
  auto l21_value = [alpha](const Eigen::Ref<const Vector>& kx) { return alpha * l21_norm(kx, 3); };

  SaddlePointProblem sp;
  sp.primalBlocks.push_back({"u", np, {}, {}});
  sp.primalBlocks.push_back({"w", np, {}, {}});
  sp.dualBlocks.push_back(
      {"data", hstack({problem.dataOp, LinearOperator::zero(problem.dataOp.output_dim(), np)}), 1,
       [f](Eigen::Ref<Vector> y, const Eigen::Ref<const Vector>& sigma) { prox_l1_translated(y, sigma, f); },
       [f](const Eigen::Ref<const Vector>& kx) { return (kx - f).lpNorm<1>(); }});
  if (!options.swapInfconvRoles) {
    sp.dualBlocks.push_back({"infconv_spatial", on_w(spatial), 3, l21_prox, l21_value});
    sp.dualBlocks.push_back({"infconv_temporal", on_z(temporal), 3, l21_prox, l21_value});
  } else {
    sp.dualBlocks.push_back({"infconv_spatial", on_z(spatial), 3, l21_prox, l21_value});
    sp.dualBlocks.push_back({"infconv_temporal", on_w(temporal), 3, l21_prox, l21_value});
  }

  const FrameSequence u0 = bicubic_upsample(problem.lowRes, problem.config.factor);
  Vector x0(2 * np);
  x0.head(np) = detail::stacked_vector(u0);
  x0.tail(np) = 0.5 * x0.head(np);

  SolverOptions opts;
  opts.maxIterations = problem.config.maxIterations;
  opts.tolerance = problem.config.tolerance;
  opts.traceInterval = options.traceInterval;
  opts.stepRatio = options.stepRatio;
  opts.preconditionExponent = options.preconditionExponent;
  auto res = solve(sp, opts, x0);

  const std::size_t w = problem.hiWidth, h = problem.hiHeight, n = problem.frames();
  Vector u = res.primal.head(np).cwiseMax(0.0).cwiseMin(1.0);
  Vector wpart = res.primal.tail(np);
  if (options.swapInfconvRoles) wpart = res.primal.head(np) - wpart;
  const Vector z = u - wpart;
  return SuperResSolution{detail::to_sequence(u, w, h, n), detail::to_sequence(wpart, w, h, n),
                          detail::to_sequence(z, w, h, n), std::move(res.report)};
}

/// Everything produced by one grayscale run.
struct SuperResRun {
  FlowSet lowResFlows;
  FlowSet flows;  // on the high-res grid
  SuperResProblem problem;
  SuperResSolution solution;
};

/// Flow on the low-res frames, flow upsampling, assembly and joint solve.
/// The flow estimator takes beta and parity from `cfg`.
inline SuperResRun superresolve(const FrameSequence& lowRes, const SuperResConfig& cfg, FlowConfig flowCfg = {},
                                const SuperResSolveOptions& options = {}) {
  cfg.validate();
  flowCfg.parity = cfg.parity;
  flowCfg.beta = cfg.beta;
  SuperResRun run;
  if (lowRes.size() >= 2) {
    run.lowResFlows = estimate_sequence_flows(lowRes, flowCfg);
    run.flows = upsample_flows(run.lowResFlows, cfg.factor);
  }
  run.problem = assemble(lowRes, run.flows, cfg);
  run.solution = solve_superres(run.problem, options);
  return run;
}

struct ColorSuperResRun {
  std::vector<RGB> frames;
  SuperResRun luminance;
};

/// Super-resolves Y only; Cb and Cr are bicubically upsampled.
inline ColorSuperResRun superresolve_color(const std::vector<RGB>& lowRes, const SuperResConfig& cfg,
                                           const FlowConfig& flowCfg = {}, const SuperResSolveOptions& options = {}) {
  if (lowRes.empty()) throw std::invalid_argument("superresolve_color: no frames");
  std::vector<Image> ys, cbs, crs;
  for (const auto& f : lowRes) {
    auto ycc = to_ycbcr(f.r, f.g, f.b);
    ys.push_back(std::move(ycc.y));
    cbs.push_back(std::move(ycc.cb));
    crs.push_back(std::move(ycc.cr));
  }
  ColorSuperResRun out;
  out.luminance = superresolve(FrameSequence(std::move(ys)), cfg, flowCfg, options);
  const auto& y = out.luminance.solution.u;
  for (std::size_t k = 0; k < lowRes.size(); ++k) {
    const Image cb = resize_bicubic(cbs[k], y.width(), y.height());
    const Image cr = resize_bicubic(crs[k], y.width(), y.height());
    RGB rgb = from_ycbcr(y[k], cb, cr);
    out.frames.push_back({clip_image(rgb.r), clip_image(rgb.g), clip_image(rgb.b)});
  }
  return out;
}

}  // namespace mmcsr
