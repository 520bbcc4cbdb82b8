// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "test_util.hpp"

using namespace mmcsr;

namespace {

// Tolerances and limits.
constexpr double kAdjointTol = 1e-8;
constexpr int kAdjointTrials = 100;
constexpr double kAdjointSeconds = 10.0;
constexpr double kProxTol = 1e-8;
constexpr int kProxInputs = 1000;
constexpr double kProxSeconds = 5.0;
constexpr double kDescentSeconds = 120.0;
constexpr double kMovingAverageSlack = 1e-12;  // relative, for roundoff only
constexpr double kEpeInteger = 0.25;
constexpr double kEpeSubpixel = 0.2;
constexpr double kFlowSeconds = 30.0;
constexpr double kGainDb = 1.0;
constexpr double kGainSeconds = 300.0;
constexpr double kStaticTol = 1e-3;
constexpr double kStaticFlowTol = 1e-3;
constexpr double kStepsizeTol = 1e-12;
constexpr double kKappaLimit = 1.0 - 1e-6;
constexpr double kKappaToleranceMultiple = 2.0;
constexpr double kPsnrTol = 1e-9;
constexpr double kSsimTol = 1e-12;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void note(Outcome& o, bool ok, const std::string& what) {
  o.pass = o.pass && ok;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += what + (ok ? "" : " [fail]");
}

// ------------------------------------------------------------ 1. adjoints

Outcome adjoint_tests() {
  Outcome out;
  std::mt19937 rng(1);
  std::uniform_int_distribution<std::size_t> side(2, 12), frames(1, 4), lo(1, 3);
  std::uniform_real_distribution<double> sigma(0.3, 2.0);
  std::uniform_int_distribution<int> factor(2, 4), parity(0, 1);
  const auto t0 = Clock::now();

  const std::vector<std::pair<std::string, std::function<LinearOperator()>>> makers = {
      {"gradient", [&] { return gradient(side(rng), side(rng)); }},
      {"sequence gradient", [&] { return sequence_gradient(side(rng), side(rng), frames(rng)); }},
      {"blur", [&] { return gaussian_blur(sigma(rng), side(rng), side(rng)); }},
      {"decimate",
       [&] {
         const double f = factor(rng);
         return decimate(f, upscaled_size(lo(rng), f), upscaled_size(lo(rng), f), 0.5 * (f - 1.0));
       }},
      {"warp", [&] { return warp_matrix(support::random_flow(side(rng), side(rng), rng, 3.0)); }},
      {"time derivative",
       [&] {
         const std::size_t w = side(rng), h = side(rng), n = 1 + frames(rng) % 4;
         const auto p = parity(rng) ? Parity::formula : Parity::matrix;
         return motion_time_derivative(support::random_flowset(w, h, n, rng, p), n, w, h, 0.1 + sigma(rng));
       }},
      {"data operator",
       [&] {
         const double f = factor(rng);
         const std::size_t w = upscaled_size(lo(rng), f), h = upscaled_size(lo(rng), f);
         return block_diag_data_operator(gaussian_blur(1.2 * f / 4.0, w, h), decimate(f, w, h, 0.5 * (f - 1.0)),
                                         frames(rng));
       }},
  };
  for (const auto& [name, make] : makers) {
    double worst = 0.0;
    for (int t = 0; t < kAdjointTrials; ++t) worst = std::max(worst, support::adjoint_mismatch(make(), rng));
    note(out, worst < kAdjointTol, name + " " + fmt("%.1e", worst));
  }
  const double secs = seconds_since(t0);
  note(out, secs < kAdjointSeconds, fmt("%.2f s", secs));
  return out;
}

// ------------------------------------------------------------ 2. proxes

// Root of a nondecreasing function on [a, b].
double bisect_root(const std::function<double(double)>& g, double a, double b) {
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    (g(m) < 0.0 ? a : b) = m;
  }
  return 0.5 * (a + b);
}

Outcome prox_tests() {
  Outcome out;
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> pos(0.05, 3.0);
  const auto t0 = Clock::now();

  // prox_{sigma F*} via Moreau: y - sigma prox_{F/sigma}(y / sigma).
  double l1 = 0.0, l21 = 0.0, hub = 0.0;
  for (int i = 0; i < kProxInputs; ++i) {
    const Index n = 6;
    const Vector y0 = support::random_vector(n, rng, 2.0), f = support::random_vector(n, rng);
    const double s = pos(rng);
    Vector y = y0;
    prox_l1_translated(y, Vector::Constant(n, s), f);
    for (Index j = 0; j < n; ++j) {
      const double v = y0[j] / s - f[j], t = 1.0 / s;
      const double shrunk = v > t ? v - t : (v < -t ? v + t : 0.0);
      l1 = std::max(l1, std::abs(y[j] - (y0[j] - s * (f[j] + shrunk))));
    }
  }
  for (int i = 0; i < kProxInputs; ++i) {
    const double alpha = pos(rng), s = pos(rng);
    const Vector y0 = support::random_vector(3, rng, 2.0);
    Vector y = y0;
    prox_l21_dual(y, 3, alpha);
    const Vector v = y0 / s;
    const double r = v.norm();
    const Vector primal = r > 0 ? Vector(v * std::max(0.0, 1.0 - alpha / s / r)) : v;
    l21 = std::max(l21, (y - (y0 - s * primal)).cwiseAbs().maxCoeff());
  }
  for (int i = 0; i < kProxInputs; ++i) {
    const double alpha = pos(rng), s = pos(rng), eps = 0.3 * pos(rng);
    const Vector y0 = support::random_vector(2, rng, 1.5);
    Vector y = y0;
    prox_huber_dual(y, Vector::Constant(2, s), 2, alpha, eps);
    const Vector v = y0 / s;
    const double r = v.norm();
    Vector primal = v;
    if (r > 0) {
      const double t = bisect_root([&](double t) { return alpha / s * std::min(t / eps, 1.0) + t - r; }, 0, r);
      primal = v * (t / r);
    }
    hub = std::max(hub, (y - (y0 - s * primal)).cwiseAbs().maxCoeff());
  }
  note(out, l1 < kProxTol, "l1 " + fmt("%.1e", l1));
  note(out, l21 < kProxTol, "l21 " + fmt("%.1e", l21));
  note(out, hub < kProxTol, "huber " + fmt("%.1e", hub));
  const double secs = seconds_since(t0);
  note(out, secs < kProxSeconds, fmt("%.2f s", secs));
  return out;
}

// ------------------------------------------------------------ 3. descent

Outcome energy_descent() {
  Outcome out;
  const auto t0 = Clock::now();
  const auto seq = synth_translation_sequence(synth_text_image(48, 48, 7, 12), 5, 1.5, 0.75);
  const auto truth = support::crop_sequence(seq, 32, 32);
  const auto lr = generate_lowres(truth, 4.0);
  SuperResConfig cfg;
  const auto run = superresolve(lr, cfg);

  const auto u0 = bicubic_upsample(lr, cfg.factor);
  FrameSequence w0 = u0;
  for (std::size_t k = 0; k < w0.size(); ++k) {
    for (double& v : w0[k].data()) v *= 0.5;
  }
  const double e0 = energy_value(run.problem, u0, w0);
  const double e1 = run.solution.report.finalEnergy;
  note(out, e1 < e0, "energy " + fmt("%.6g", e0) + " -> " + fmt("%.6g", e1));

  const auto& it = run.solution.report.traceIterations;
  const auto& tr = run.solution.report.energyTrace;
  int violations = 0;
  double prev = 0.0;
  for (std::size_t i = 9; i < tr.size(); ++i) {
    double avg = 0.0;
    for (std::size_t j = i - 9; j <= i; ++j) avg += tr[j];
    avg /= 10.0;
    if (i > 9 && it[i] > 20 && avg > prev + kMovingAverageSlack * std::abs(prev)) ++violations;
    prev = avg;
  }
  note(out, violations == 0, std::to_string(violations) + " moving-average increases over " +
                                 std::to_string(run.solution.report.iterations) + " iterations");
  const double secs = seconds_since(t0);
  note(out, secs < kDescentSeconds, fmt("%.1f s", secs));
  return out;
}

// ------------------------------------------------------------ 4. flow

Outcome flow_accuracy() {
  Outcome out;
  for (const auto& [shift, bound] : {std::pair{2.0, kEpeInteger}, std::pair{0.5, kEpeSubpixel}}) {
    const auto t0 = Clock::now();
    const auto seq = synth_translation_sequence(synth_texture_image(80, 80, 3), 2, shift, 0.0);
    const auto pair = support::crop_sequence(seq, 64, 64);
    const auto v = estimate_pair_flow(pair[0], pair[1], FlowConfig{});
    // frame_1(x) = frame_0(x + shift), so registering frame 1 onto frame 0 gives v = -shift.
    double epe = 0.0;
    int count = 0;
    for (std::size_t y = 8; y < 56; ++y) {
      for (std::size_t x = 8; x < 56; ++x) {
        epe += std::hypot(v.vx(x, y) + shift, v.vy(x, y));
        ++count;
      }
    }
    epe /= count;
    const double secs = seconds_since(t0);
    note(out, epe <= bound && secs < kFlowSeconds,
         "shift " + fmt("%.1f", shift) + " EPE " + fmt("%.4f", epe) + " (" + fmt("%.1f", secs) + " s)");
  }
  return out;
}

// ------------------------------------------------------------ 5. gain

Outcome superres_gain() {
  Outcome out;
  const auto t0 = Clock::now();
  const auto seq = synth_translation_sequence(synth_text_image(142, 142, 7, 24), 5, 1.5, 0.75);
  const auto lr0 = generate_lowres(seq, 4.0);
  const auto truth = support::crop_sequence(seq, 4 * lr0.width(), 4 * lr0.height());
  const auto lr = generate_lowres(truth, 4.0);
  SuperResConfig cfg;
  const auto run = superresolve(lr, cfg);
  const auto bic = clip_sequence(bicubic_upsample(lr, cfg.factor));
  const auto eb = evaluate_central(bic, truth, 20), es = evaluate_central(run.solution.u, truth, 20);
  const double gain = es.psnr - eb.psnr;
  note(out, gain >= kGainDb,
       "PSNR " + fmt("%.2f", eb.psnr) + " -> " + fmt("%.2f", es.psnr) + " dB, gain " + fmt("%.2f", gain));
  const double secs = seconds_since(t0);
  note(out, secs < kGainSeconds, fmt("%.1f s", secs));
  return out;
}

// ------------------------------------------------------------ 6. static

double frame_spread(const FrameSequence& u) {
  double spread = 0.0;
  for (std::size_t k = 1; k < u.size(); ++k) {
    for (std::size_t i = 0; i < u[0].size(); ++i) spread = std::max(spread, std::abs(u[k].data()[i] - u[0].data()[i]));
  }
  return spread;
}

Outcome static_scene() {
  Outcome out;
  const Image frame = synth_texture_image(64, 64);
  const auto lr = generate_lowres(FrameSequence(std::vector<Image>(5, frame)), 2.0);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  const auto run = superresolve(lr, cfg);
  double flow = 0.0;
  for (const auto& f : run.lowResFlows.flows) {
    for (std::size_t i = 0; i < f.vx.size(); ++i) {
      flow = std::max({flow, std::abs(f.vx.data()[i]), std::abs(f.vy.data()[i])});
    }
  }
  note(out, flow <= kStaticFlowTol, "max |flow| " + fmt("%.1e", flow));
  note(out, frame_spread(run.solution.u) <= kStaticTol,
       "max frame difference " + fmt("%.2e", frame_spread(run.solution.u)));

  // Reported only: text scene at factor 4 under the same budget.
  const auto lr4 = generate_lowres(FrameSequence(std::vector<Image>(4, synth_text_image(64, 64, 11, 12))), 4.0);
  const auto run4 = superresolve(lr4, SuperResConfig{});
  out.detail += "; factor-4 text scene " + fmt("%.2e", frame_spread(run4.solution.u)) + " (info)";
  return out;
}

// ------------------------------------------------------------ 7. h

Outcome stepsize() {
  Outcome out;
  const auto fx = support::load_h_fixture();
  const double h = estimate_temporal_stepsize(fx.u0, fx.flows);
  const double ref = support::direct_h(fx.u0, fx.flows.flows[0]);
  note(out, std::abs(h - ref) <= kStepsizeTol, "h " + fmt("%.15g", h) + " vs " + fmt("%.15g", ref));
  const FrameSequence flat({Image(8, 8, 0.5), Image(8, 8, 0.5)});
  const FrameSequence same({fx.u0[0], fx.u0[0]});
  const bool guarded = estimate_temporal_stepsize(flat, FlowSet::zero(2, 8, 8)) == 1.0 &&
                       estimate_temporal_stepsize(same, FlowSet::zero(2, 8, 8)) == 1.0;
  note(out, guarded, "guarded cases return 1");
  return out;
}

// ------------------------------------------------------------ 8. kappa limit

Outcome kappa_limit() {
  Outcome out;
  const auto seq = synth_translation_sequence(synth_texture_image(40, 40, 5), 3, 0.5, 0.25);
  const auto truth = support::crop_sequence(seq, 16, 16);
  const auto lr = generate_lowres(truth, 2.0);
  SuperResConfig cfg;
  cfg.factor = 2.0;
  cfg.kappa = kKappaLimit;
  cfg.maxIterations = 100000;  // stop on tolerance only
  const auto prob = assemble(lr, support::translation_flows(16, 16, 3, 0.5, 0.25), cfg);
  const auto sol = solve_superres(prob);
  const Vector ui = support::stacked(sol.u);
  const Vector us = support::solve_single_term(prob);
  const double rel = (ui - us).norm() / us.norm();
  const double bound = kKappaToleranceMultiple * cfg.tolerance;
  note(out, rel <= bound, "relative L2 " + fmt("%.2e", rel) + " vs bound " + fmt("%.1e", bound) + " (" +
                              std::to_string(sol.report.iterations) + " iterations)");
  return out;
}

// ------------------------------------------------------------ 9. metrics

Outcome metrics() {
  Outcome out;
  std::mt19937 rng(9);
  const Image a = support::random_image(64, 64, rng, 0.0, 0.9);
  Image b = a;
  for (double& v : b.data()) v += 0.1;
  const double p = psnr(a, b);
  note(out, std::abs(p - 20.0) <= kPsnrTol, "PSNR " + fmt("%.12f", p));
  const double s = ssim(a, a);
  note(out, std::abs(s - 1.0) <= kSsimTol, "SSIM self " + fmt("%.12f", s));

  bool central = true;
  for (std::size_t n : {1, 4, 5, 13}) {
    std::vector<Image> res(n, Image(48, 48, 0.5)), tru(n, Image(48, 48, 0.5));
    res[n / 2] = Image(48, 48, 0.6);
    const auto r = evaluate_central(FrameSequence(res), FrameSequence(tru));
    central = central && r.frameIndex == n / 2 && r.cropMargin == 20 && std::abs(r.psnr - 20.0) <= kPsnrTol;
  }
  Image marked(48, 48, 0.5), ref(48, 48, 0.5);
  marked(19, 24) = 0.0;  // inside the 20-px border only
  central = central && std::isinf(evaluate_central(FrameSequence({marked}), FrameSequence({ref})).psnr);
  note(out, central, "central frame floor(n/2), 20-px crop");
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"operator adjoints", adjoint_tests}, {"proximal maps", prox_tests},
      {"energy descent", energy_descent},   {"flow accuracy", flow_accuracy},
      {"super-resolution gain", superres_gain}, {"static scene", static_scene},
      {"temporal step size", stepsize},     {"kappa limit", kappa_limit},
      {"metrics", metrics},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu: %s %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
