#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

using namespace mmcsr;

namespace {

FrameSequence texture_truth(std::size_t size, std::size_t frames, double sx, double sy) {
  const auto seq = synth_translation_sequence(synth_texture_image(size + 24, size + 24, 5), frames, sx, sy);
  return support::crop_sequence(seq, size, size);
}

double max_frame_spread(const FrameSequence& s) {
  double m = 0.0;
  for (std::size_t k = 1; k < s.size(); ++k) {
    for (std::size_t i = 0; i < s[0].size(); ++i) m = std::max(m, std::abs(s[k].data()[i] - s[0].data()[i]));
  }
  return m;
}

}  // namespace

TEST(TemporalStepsize, MatchesPixelwiseEvaluationOnFixture) {
  const auto fx = support::load_h_fixture();
  const double h = estimate_temporal_stepsize(fx.u0, fx.flows);
  EXPECT_NEAR(h, support::direct_h(fx.u0, fx.flows.flows[0]), 1e-12);
  EXPECT_GT(h, 0.0);
}

TEST(TemporalStepsize, GuardedCasesReturnOne) {
  // Constant frames: zero gradient.
  FrameSequence flat({Image(8, 8, 0.4), Image(8, 8, 0.4)});
  EXPECT_EQ(estimate_temporal_stepsize(flat, FlowSet::zero(2, 8, 8)), 1.0);
  // Identical textured frames under zero flow: zero warp residual.
  std::mt19937 rng(60);
  const Image img = support::random_image(8, 8, rng);
  EXPECT_EQ(estimate_temporal_stepsize(FrameSequence({img, img}), FlowSet::zero(2, 8, 8)), 1.0);
}

TEST(Assemble, OperatorShapesAndBlurScaling) {
  std::mt19937 rng(61);
  const auto lr = support::random_sequence(6, 5, 3, rng);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  const auto p = assemble(lr, FlowSet::zero(3, 12, 10), cfg);
  EXPECT_EQ(p.hiWidth, 12u);
  EXPECT_EQ(p.hiHeight, 10u);
  EXPECT_EQ(p.dataOp.output_dim(), 90);
  EXPECT_EQ(p.dataOp.input_dim(), 360);
  EXPECT_EQ(p.grad.output_dim(), 720);
  EXPECT_EQ(p.timeDeriv.output_dim(), 360);
  EXPECT_DOUBLE_EQ(p.config.blur_sigma(), 0.6);
  EXPECT_DOUBLE_EQ(p.h, estimate_temporal_stepsize(bicubic_upsample(lr, 2.0), FlowSet::zero(3, 12, 10)));
  EXPECT_THROW(assemble(lr, FlowSet::zero(2, 12, 10), cfg), std::invalid_argument);
  EXPECT_THROW(assemble(lr, FlowSet::zero(3, 11, 10), cfg), std::invalid_argument);
}

TEST(Assemble, ExplicitStepsizeAndSingleFrame) {
  std::mt19937 rng(62);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  cfg.h = 0.25;
  const auto lr = support::random_sequence(6, 6, 2, rng);
  const auto p = assemble(lr, support::random_flowset(12, 12, 2, rng), cfg);
  EXPECT_EQ(p.h, 0.25);
  const auto one = assemble(support::random_sequence(6, 6, 1, rng), FlowSet::zero(1, 12, 12), SuperResConfig{});
  EXPECT_EQ(one.frames(), 1u);
  EXPECT_EQ(one.timeDeriv.nonzeros(), 0);
}

TEST(EnergyValue, MatchesDenseEvaluation) {
  std::mt19937 rng(63);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  cfg.alpha = 0.3;
  cfg.kappa = 0.7;
  const auto lr = support::random_sequence(4, 4, 3, rng);
  const auto p = assemble(lr, support::random_flowset(8, 8, 3, rng), cfg);
  const auto u = support::random_sequence(8, 8, 3, rng), w = support::random_sequence(8, 8, 3, rng);

  const Eigen::MatrixXd A = p.dataOp.to_dense(), G = p.grad.to_dense(), T = p.timeDeriv.to_dense();
  const Vector uv = support::stacked(u), wv = support::stacked(w), zv = uv - wv;
  const Vector gw = G * wv, tw = T * wv, gz = G * zv, tz = T * zv;
  const Index n = uv.size();
  double reg = 0.0;
  for (Index i = 0; i < n; ++i) {
    reg += std::sqrt(gw[i] * gw[i] + gw[n + i] * gw[n + i] + cfg.kappa * cfg.kappa * tw[i] * tw[i]);
    reg += std::sqrt(cfg.kappa * cfg.kappa * (gz[i] * gz[i] + gz[n + i] * gz[n + i]) + tz[i] * tz[i]);
  }
  const double expect = (A * uv - p.observations()).lpNorm<1>() + cfg.alpha * reg;
  EXPECT_NEAR(energy_value(p, u, w), expect, 1e-12 * expect);
}

TEST(EnergyValue, ZeroForConsistentConstantScene) {
  SuperResConfig cfg;
  cfg.factor = 2.0;
  FrameSequence lr({Image(5, 5, 0.3), Image(5, 5, 0.3)});
  const auto p = assemble(lr, FlowSet::zero(2, 10, 10), cfg);
  FrameSequence u({Image(10, 10, 0.3), Image(10, 10, 0.3)});
  FrameSequence w({Image(10, 10, 0.1), Image(10, 10, 0.1)});
  EXPECT_NEAR(energy_value(p, u, w), 0.0, 1e-13);
}

TEST(SolveSuperres, EnergyDropsBelowInitialization) {
  const auto truth = texture_truth(24, 3, 0.5, 0.25);
  const auto lr = generate_lowres(truth, 2.0);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  cfg.maxIterations = 200;
  const auto p = assemble(lr, support::translation_flows(24, 24, 3, 0.5, 0.25), cfg);
  const auto sol = solve_superres(p);
  const auto u0 = bicubic_upsample(lr, 2.0);
  FrameSequence w0 = u0;
  for (std::size_t k = 0; k < w0.size(); ++k) {
    for (double& v : w0[k].data()) v *= 0.5;
  }
  EXPECT_LT(sol.report.finalEnergy, energy_value(p, u0, w0));
  for (std::size_t k = 0; k < sol.u.size(); ++k) {
    for (double v : sol.u[k].values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(sol.u.width(), 24u);
  EXPECT_EQ(sol.u.size(), 3u);
}

TEST(SolveSuperres, SplitSumsToSolution) {
  const auto lr = generate_lowres(texture_truth(16, 2, 0.5, 0.0), 2.0);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  cfg.maxIterations = 50;
  const auto sol = solve_superres(assemble(lr, support::translation_flows(16, 16, 2, 0.5, 0.0), cfg));
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < sol.u[k].size(); ++i) {
      EXPECT_NEAR(sol.w[k].data()[i] + sol.z[k].data()[i], sol.u[k].data()[i], 1e-12);
    }
  }
}

TEST(SolveSuperres, ZeroRegularizationFitsTheData) {
  const auto lr = generate_lowres(texture_truth(16, 2, 0.5, 0.0), 2.0);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  cfg.alpha = 0.0;
  cfg.maxIterations = 3000;
  cfg.tolerance = 1e-8;
  const auto p = assemble(lr, FlowSet::zero(2, 16, 16), cfg);
  const auto sol = solve_superres(p);
  const Vector residual = p.dataOp.apply(support::stacked(sol.u)) - p.observations();
  EXPECT_LT(residual.lpNorm<1>() / static_cast<double>(residual.size()), 1e-3);
}

TEST(SolveSuperres, StaticSceneGivesEqualFrames) {
  const Image frame = texture_truth(32, 1, 0.0, 0.0)[0];
  const auto lr = generate_lowres(FrameSequence({frame, frame, frame}), 2.0);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  const auto p = assemble(lr, FlowSet::zero(3, 32, 32), cfg);
  const auto sol = solve_superres(p);
  EXPECT_LE(max_frame_spread(sol.u), 1e-3);
}

TEST(SolveSuperres, SwappedRolesMirrorTheSplit) {
  const auto lr = generate_lowres(texture_truth(16, 3, 0.5, 0.0), 2.0);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  cfg.maxIterations = 10000;
  cfg.tolerance = 1e-9;
  const auto p = assemble(lr, support::translation_flows(16, 16, 3, 0.5, 0.0), cfg);
  const auto a = solve_superres(p);
  SuperResSolveOptions swapped;
  swapped.swapInfconvRoles = true;
  const auto b = solve_superres(p, swapped);
  // Same objective, so the energies agree and u is (nearly) the same.
  EXPECT_NEAR(a.report.finalEnergy, b.report.finalEnergy, 1e-4 * a.report.finalEnergy);
  const Vector ua = support::stacked(a.u), ub = support::stacked(b.u);
  EXPECT_LT((ua - ub).norm() / ua.norm(), 1e-2);
}

TEST(Superresolve, PipelineEstimatesFlowsAndMagnifies) {
  const auto lr = generate_lowres(texture_truth(48, 3, 1.0, 0.0), 2.0);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  cfg.maxIterations = 30;
  const auto run = superresolve(lr, cfg);
  ASSERT_EQ(run.lowResFlows.size(), 2u);
  EXPECT_EQ(run.lowResFlows.flows[0].width(), 24u);
  EXPECT_EQ(run.flows.flows[0].width(), 48u);
  EXPECT_EQ(run.solution.u.width(), 48u);
  EXPECT_GT(run.problem.h, 0.0);
}

TEST(Superresolve, ColorPathKeepsGrayAndMatchesLuminance) {
  const auto lr = generate_lowres(texture_truth(32, 2, 0.5, 0.0), 2.0);
  std::vector<RGB> rgb;
  for (std::size_t k = 0; k < lr.size(); ++k) rgb.push_back({lr[k], lr[k], lr[k]});
  SuperResConfig cfg;
  cfg.factor = 2.0;
  cfg.maxIterations = 40;
  const auto color = superresolve_color(rgb, cfg);
  const auto gray = superresolve(lr, cfg);
  ASSERT_EQ(color.frames.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < color.frames[k].r.size(); ++i) {
      EXPECT_NEAR(color.frames[k].r.data()[i], color.frames[k].g.data()[i], 1e-9);
      EXPECT_NEAR(color.frames[k].b.data()[i], color.frames[k].g.data()[i], 1e-9);
      EXPECT_NEAR(color.luminance.solution.u[k].data()[i], gray.solution.u[k].data()[i], 1e-9);
    }
  }
}

TEST(Superresolve, ConstantColorIsPreserved) {
  std::vector<RGB> rgb(2, RGB{Image(10, 10, 0.8), Image(10, 10, 0.4), Image(10, 10, 0.2)});
  SuperResConfig cfg;
  cfg.factor = 2.0;
  cfg.maxIterations = 20;
  const auto out = superresolve_color(rgb, cfg);
  for (const auto& f : out.frames) {
    for (double v : f.r.values()) EXPECT_NEAR(v, 0.8, 1e-6);
    for (double v : f.g.values()) EXPECT_NEAR(v, 0.4, 1e-6);
    for (double v : f.b.values()) EXPECT_NEAR(v, 0.2, 1e-6);
  }
}
