#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "cli.hpp"

namespace {

// CLI11 fills plain values; these adapters turn "was the flag given" into
// the optionals the settings layer expects.
template <class T>
void bind_option(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

void bind_switch(CLI::App* app, const std::string& name, std::optional<bool>& target, const std::string& help) {
  app->add_flag_function(name, [&target](std::int64_t) { target = true; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace mmcsr::cli;
  CLI::App app{"Multi-frame motion-coupled video super-resolution"};
  app.require_subcommand(1);

  SynthOptions synth;
  std::string synthBase, synthOut;
  std::optional<double> synthFactor;
  auto* s = app.add_subcommand("synth", "Render a translating test sequence with known motion");
  s->add_option("--base", synthBase, "Base PNG image (default: built-in pattern)");
  s->add_option("--pattern", synth.pattern, "Built-in pattern: text or texture")->capture_default_str();
  s->add_option("--width", synth.width, "Built-in pattern width")->capture_default_str();
  s->add_option("--height", synth.height, "Built-in pattern height")->capture_default_str();
  s->add_option("--cell", synth.cell, "Glyph cell size of the text pattern")->capture_default_str();
  s->add_option("--seed", synth.seed, "Pattern seed")->capture_default_str();
  s->add_option("-n,--frames", synth.frames, "Number of frames")->capture_default_str();
  s->add_option("--shift-x", synth.shiftX, "Per-frame shift in x (pixels)")->capture_default_str();
  s->add_option("--shift-y", synth.shiftY, "Per-frame shift in y (pixels)")->capture_default_str();
  bind_option(s, "--factor", synthFactor, "Also write bicubic-degraded frames to <output>/lowres");
  s->add_option("-o,--output", synthOut, "Output directory")->required();
  s->add_flag("--png16", synth.png16, "Write 16-bit PNGs");

  RunOptions run;
  std::string runConfig, runTruth;
  auto* r = app.add_subcommand("run", "Super-resolve a low-resolution frame sequence");
  r->set_help_flag("--help", "Print this help message and exit");  // frees --h for the step size
  r->add_option("-i,--input", run.input, "Frame directory or wildcard pattern (e.g. dir/frame_*.png)")->required();
  r->add_option("-o,--output", run.output, "Output directory")->required();
  r->add_option("--config", runConfig, "key=value config file; flags take precedence");
  r->add_option("--truth", runTruth, "Ground-truth frames; enables metrics.csv");
  bind_option(r, "--factor", run.flags.factor, "Magnification factor (default 4)");
  bind_option(r, "--alpha", run.flags.alpha, "Regularization weight (default 0.01)");
  bind_option(r, "--beta", run.flags.beta, "Flow regularization weight (default 0.1)");
  bind_option(r, "--kappa", run.flags.kappa, "Infimal-convolution cross weight in (0,1) (default 0.5)");
  bind_option(r, "--sigma", run.flags.sigma, "Blur std-dev on the high-res grid (default 1.2 * factor / 4)");
  bind_option(r, "--h", run.flags.h, "Temporal step size, or 'auto' (default)");
  bind_option(r, "--iterations", run.flags.iterations, "Maximum solver iterations (default 500)");
  bind_option(r, "--tolerance", run.flags.tolerance, "Solver stopping tolerance (default 1e-4)");
  bind_option(r, "--parity", run.flags.parity, "Warp placement convention: matrix (default) or formula");
  bind_option(r, "--crop", run.flags.crop, "Border crop for metrics (default 20)");
  bind_option(r, "--name", run.flags.name, "Sequence name in metrics.csv");
  bind_switch(r, "--grayscale", run.flags.grayscale, "Treat RGB input as luminance only");
  bind_switch(r, "--save-flows", run.flags.saveFlows, "Write estimated flows as .flo files");
  bind_switch(r, "--save-split", run.flags.saveSplit, "Write rescaled w and z images");
  bind_switch(r, "--save-energy-trace", run.flags.saveEnergyTrace, "Write energy.csv");
  bind_switch(r, "--png16", run.flags.png16, "Write 16-bit PNGs");

  EvalOptions eval;
  std::string evalOut;
  auto* e = app.add_subcommand("eval", "Central-frame PSNR/SSIM of a result set against ground truth");
  e->add_option("-r,--result", eval.result, "Result frames (directory or pattern)")->required();
  e->add_option("-t,--truth", eval.truth, "Ground-truth frames (directory or pattern)")->required();
  e->add_option("--crop", eval.crop, "Border crop in pixels")->capture_default_str();
  e->add_option("--name", eval.name, "Sequence name")->capture_default_str();
  e->add_option("--method", eval.method, "Method name")->capture_default_str();
  e->add_option("-o,--output", evalOut, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kUsage;
  }

  if (s->parsed()) {
    if (!synthBase.empty()) synth.base = synthBase;
    synth.factor = synthFactor;
    synth.output = synthOut;
    return cmd_synth(synth, std::cout, std::cerr);
  }
  if (r->parsed()) {
    if (!runConfig.empty()) run.config = runConfig;
    if (!runTruth.empty()) run.truth = runTruth;
    return cmd_run(run, std::cout, std::cerr);
  }
  if (!evalOut.empty()) eval.output = evalOut;
  return cmd_eval(eval, std::cout, std::cerr);
}
