#pragma once

// Subcommand implementations for the mmcsr tool. Argument parsing lives in
// main.cpp; everything here takes plain structs so tests can drive it.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcsr/io.hpp"
#include "mmcsr/mmcsr.hpp"

namespace mmcsr::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNumerical = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- settings

/// Every `run` setting that may come from a config file or a flag. Unset
/// fields fall through to the next layer: flags, then file, then defaults.
struct RunOverrides {
  std::optional<double> factor, alpha, beta, kappa, sigma, tolerance;
  std::optional<std::string> h;  // number or "auto"
  std::optional<int> iterations, crop;
  std::optional<std::string> parity, name;
  std::optional<bool> grayscale, saveFlows, saveSplit, saveEnergyTrace, png16;
};

struct RunSettings {
  SuperResConfig config;
  int crop = 20;
  std::string name;
  bool grayscale = false;
  bool saveFlows = false;
  bool saveSplit = false;
  bool saveEnergyTrace = false;
  bool png16 = false;
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("invalid number for '" + key + "': '" + v + "'");
  }
}

inline int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long n = std::stol(v, &used);
    if (used != v.size() || n < INT32_MIN || n > INT32_MAX) throw std::invalid_argument(v);
    return static_cast<int>(n);
  } catch (const std::exception&) {
    throw UsageError("invalid integer for '" + key + "': '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw UsageError("invalid boolean for '" + key + "': '" + v + "'");
}

template <class T>
void take(std::optional<T>& dst, const std::optional<T>& src) {
  if (src) dst = src;
}

}  // namespace detail

/// Config-file keys: factor alpha beta kappa sigma h iterations tolerance
/// parity crop name grayscale save_flows save_split save_energy_trace png16.
inline RunOverrides overrides_from_key_values(const KeyValues& kv) {
  using namespace detail;
  RunOverrides o;
  for (const auto& [key, value] : kv) {
    if (key == "factor") o.factor = parse_double(key, value);
    else if (key == "alpha") o.alpha = parse_double(key, value);
    else if (key == "beta") o.beta = parse_double(key, value);
    else if (key == "kappa") o.kappa = parse_double(key, value);
    else if (key == "sigma") o.sigma = parse_double(key, value);
    else if (key == "tolerance") o.tolerance = parse_double(key, value);
    else if (key == "h") o.h = value;
    else if (key == "iterations") o.iterations = parse_int(key, value);
    else if (key == "crop") o.crop = parse_int(key, value);
    else if (key == "parity") o.parity = value;
    else if (key == "name") o.name = value;
    else if (key == "grayscale") o.grayscale = parse_bool(key, value);
    else if (key == "save_flows") o.saveFlows = parse_bool(key, value);
    else if (key == "save_split") o.saveSplit = parse_bool(key, value);
    else if (key == "save_energy_trace") o.saveEnergyTrace = parse_bool(key, value);
    else if (key == "png16") o.png16 = parse_bool(key, value);
    else throw UsageError("unknown config key '" + key + "'");
  }
  return o;
}

/// Layers `flags` over `file` over the defaults and validates the result.
inline RunSettings resolve_settings(const RunOverrides& file, const RunOverrides& flags) {
  RunOverrides m = file;
  detail::take(m.factor, flags.factor);
  detail::take(m.alpha, flags.alpha);
  detail::take(m.beta, flags.beta);
  detail::take(m.kappa, flags.kappa);
  detail::take(m.sigma, flags.sigma);
  detail::take(m.tolerance, flags.tolerance);
  detail::take(m.h, flags.h);
  detail::take(m.iterations, flags.iterations);
  detail::take(m.crop, flags.crop);
  detail::take(m.parity, flags.parity);
  detail::take(m.name, flags.name);
  detail::take(m.grayscale, flags.grayscale);
  detail::take(m.saveFlows, flags.saveFlows);
  detail::take(m.saveSplit, flags.saveSplit);
  detail::take(m.saveEnergyTrace, flags.saveEnergyTrace);
  detail::take(m.png16, flags.png16);

  RunSettings s;
  auto& c = s.config;
  if (m.factor) c.factor = *m.factor;
  if (m.alpha) c.alpha = *m.alpha;
  if (m.beta) c.beta = *m.beta;
  if (m.kappa) c.kappa = *m.kappa;
  if (m.sigma) c.sigma = *m.sigma;
  if (m.tolerance) c.tolerance = *m.tolerance;
  if (m.iterations) c.maxIterations = *m.iterations;
  if (m.h && *m.h != "auto") c.h = detail::parse_double("h", *m.h);
  if (m.parity) {
    if (*m.parity == "matrix") c.parity = Parity::matrix;
    else if (*m.parity == "formula") c.parity = Parity::formula;
    else throw UsageError("parity must be 'matrix' or 'formula', got '" + *m.parity + "'");
  }
  if (m.crop) {
    if (*m.crop < 0) throw UsageError("crop must be nonnegative");
    s.crop = *m.crop;
  }
  if (m.name) s.name = *m.name;
  s.grayscale = m.grayscale.value_or(false);
  s.saveFlows = m.saveFlows.value_or(false);
  s.saveSplit = m.saveSplit.value_or(false);
  s.saveEnergyTrace = m.saveEnergyTrace.value_or(false);
  s.png16 = m.png16.value_or(false);
  if (!(c.beta > 0.0)) throw UsageError("beta must be positive");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return s;
}

// ---------------------------------------------------------------- loading

/// Frames of one set, all with the same dims and channel count.
struct LoadedFrames {
  std::vector<fs::path> paths;
  std::vector<PngImage> images;

  bool gray() const { return images.front().is_gray(); }
  std::size_t width() const { return images.front().width(); }
  std::size_t height() const { return images.front().height(); }

  /// Gray planes as-is; RGB reduced to luminance.
  FrameSequence luminance() const {
    std::vector<Image> out;
    for (const auto& im : images) {
      out.push_back(im.is_gray() ? im.planes[0] : to_ycbcr(im.planes[0], im.planes[1], im.planes[2]).y);
    }
    return FrameSequence(std::move(out));
  }
};

inline LoadedFrames load_frames(const fs::path& input) {
  LoadedFrames f;
  f.paths = list_frames(input);
  if (f.paths.empty()) throw IoError("no PNG frames found at '" + input.string() + "'");
  for (const auto& p : f.paths) {
    f.images.push_back(read_png(p));
    const auto& a = f.images.front();
    const auto& b = f.images.back();
    if (b.width() != a.width() || b.height() != a.height() || b.planes.size() != a.planes.size()) {
      throw IoError("'" + p.string() + "' differs in size or channels from '" + f.paths.front().string() + "'");
    }
  }
  return f;
}

inline std::vector<Image> min_max_rescaled(const Image& img) {
  const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
  Image out = img;
  const double span = *hi - *lo;
  for (double& v : out.data()) v = span > 0.0 ? (v - *lo) / span : 0.0;
  return {out};
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::optional<fs::path> base;  // unset: built-in pattern
  std::string pattern = "text";  // text | texture
  std::size_t width = 160, height = 160;
  std::size_t cell = 24;
  unsigned seed = 7;
  std::size_t frames = 5;
  double shiftX = 1.5, shiftY = 0.75;
  std::optional<double> factor;  // also write degraded frames to <output>/lowres
  fs::path output;
  bool png16 = false;
};

inline int cmd_synth(const SynthOptions& o, std::ostream& log, std::ostream& err) {
  try {
    if (o.frames == 0) throw UsageError("frames must be positive");
    if (o.factor && !(*o.factor > 1.0)) throw UsageError("factor must exceed 1");
    if (!o.base && o.pattern != "text" && o.pattern != "texture") {
      throw UsageError("pattern must be 'text' or 'texture'");
    }

    std::vector<Image> basePlanes;
    if (o.base) {
      basePlanes = read_png(*o.base).planes;
    } else {
      basePlanes.push_back(o.pattern == "text" ? synth_text_image(o.width, o.height, o.seed, o.cell)
                                               : synth_texture_image(o.width, o.height, o.seed));
    }
    std::vector<FrameSequence> channels;
    try {
      for (const auto& p : basePlanes) {
        channels.push_back(synth_translation_sequence(p, o.frames, o.shiftX, o.shiftY));
      }
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    std::optional<std::vector<FrameSequence>> low;
    if (o.factor) {
      low.emplace();
      try {
        for (const auto& c : channels) low->push_back(generate_lowres(c, *o.factor));
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }

    std::error_code ec;
    fs::create_directories(o.output, ec);
    if (ec) throw IoError("cannot create '" + o.output.string() + "': " + ec.message());
    if (low) {
      fs::create_directories(o.output / "lowres", ec);
      if (ec) throw IoError("cannot create '" + (o.output / "lowres").string() + "': " + ec.message());
    }
    const int depth = o.png16 ? 16 : 8;
    for (std::size_t k = 0; k < o.frames; ++k) {
      std::vector<Image> planes, lowPlanes;
      for (std::size_t c = 0; c < channels.size(); ++c) {
        planes.push_back(channels[c][k]);
        if (low) lowPlanes.push_back((*low)[c][k]);
      }
      write_png(o.output / frame_name(k), planes, depth);
      if (low) write_png(o.output / "lowres" / frame_name(k), lowPlanes, depth);
    }

    KeyValues manifest;
    auto num = [](double v) {
      std::ostringstream s;
      s.precision(17);
      s << v;
      return s.str();
    };
    manifest["frames"] = std::to_string(o.frames);
    manifest["shift_x"] = num(o.shiftX);
    manifest["shift_y"] = num(o.shiftY);
    manifest["width"] = std::to_string(channels.front().width());
    manifest["height"] = std::to_string(channels.front().height());
    manifest["channels"] = std::to_string(channels.size());
    manifest["source"] = o.base ? o.base->string() : o.pattern;
    manifest["motion"] = "frame_{k+1}(x) = frame_k(x + shift)";
    if (low) {
      manifest["factor"] = num(*o.factor);
      manifest["lowres_width"] = std::to_string(low->front().width());
      manifest["lowres_height"] = std::to_string(low->front().height());
    }
    std::ofstream mf(o.output / "manifest.txt");
    if (!mf) throw IoError("cannot write '" + (o.output / "manifest.txt").string() + "'");
    write_key_values(mf, manifest);
    if (!mf) throw IoError("cannot write '" + (o.output / "manifest.txt").string() + "'");
    log << "synth: wrote " << o.frames << " frames (" << channels.front().width() << "x"
        << channels.front().height() << ") to " << o.output.string() << "\n";
    return kOk;
  } catch (const UsageError& e) {
    err << "synth: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "synth: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "synth: " << e.what() << "\n";
    return kIo;
  }
}

// ---------------------------------------------------------------- run

struct RunOptions {
  std::string input;
  fs::path output;
  std::optional<fs::path> truth;
  std::optional<fs::path> config;
  RunOverrides flags;
};

inline int cmd_run(const RunOptions& o, std::ostream& log, std::ostream& err) {
  try {
    RunOverrides file;
    if (o.config) {
      try {
        file = overrides_from_key_values(read_key_values(*o.config));
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }
    const RunSettings s = resolve_settings(file, o.flags);
    const auto& cfg = s.config;

    const LoadedFrames input = load_frames(o.input);
    const bool color = !input.gray() && !s.grayscale;
    const std::size_t hiW = upscaled_size(input.width(), cfg.factor);
    const std::size_t hiH = upscaled_size(input.height(), cfg.factor);
    if (std::min(input.width(), input.height()) < 2) throw UsageError("input frames must be at least 2x2");

    std::optional<FrameSequence> truth;
    if (o.truth) {
      const LoadedFrames t = load_frames(*o.truth);
      if (t.images.size() != input.images.size()) {
        throw UsageError("truth has " + std::to_string(t.images.size()) + " frames, input has " +
                         std::to_string(input.images.size()));
      }
      if (t.width() < hiW || t.height() < hiH) {
        throw UsageError("truth frames are smaller than the " + std::to_string(hiW) + "x" + std::to_string(hiH) +
                         " output");
      }
      if (2 * static_cast<std::size_t>(s.crop) >= std::min(hiW, hiH)) {
        throw UsageError("crop " + std::to_string(s.crop) + " too large for the output size");
      }
      std::vector<Image> cropped;
      for (const auto& f : t.luminance()) {
        Image c(hiW, hiH);
        for (std::size_t y = 0; y < hiH; ++y) {
          for (std::size_t x = 0; x < hiW; ++x) c(x, y) = f(x, y);
        }
        cropped.push_back(std::move(c));
      }
      truth.emplace(std::move(cropped));
    }

    std::error_code ec;
    fs::create_directories(o.output, ec);
    if (ec) throw IoError("cannot create '" + o.output.string() + "': " + ec.message());

    if (cfg.h) log << "run: h = " << *cfg.h << " (override, estimation skipped)\n";
    log << "run: " << input.images.size() << " frames " << input.width() << "x" << input.height() << " -> " << hiW
        << "x" << hiH << (color ? " (color, Y channel)" : " (grayscale)") << "\n";

    const FrameSequence lowY = input.luminance();
    SuperResRun run;
    std::vector<std::vector<Image>> outFrames;
    if (color) {
      std::vector<RGB> rgb;
      for (const auto& im : input.images) rgb.push_back({im.planes[0], im.planes[1], im.planes[2]});
      auto c = superresolve_color(rgb, cfg);
      for (auto& f : c.frames) outFrames.push_back({std::move(f.r), std::move(f.g), std::move(f.b)});
      run = std::move(c.luminance);
    } else {
      run = superresolve(lowY, cfg);
      for (const auto& f : run.solution.u) outFrames.push_back({f});
    }
    if (!cfg.h) log << "run: h = " << run.problem.h << " (estimated)\n";
    const auto& rep = run.solution.report;
    log << "run: " << rep.iterations << " iterations, stopped on " << to_string(rep.stoppingReason)
        << ", energy " << rep.finalEnergy << "\n";

    const int depth = s.png16 ? 16 : 8;
    for (std::size_t k = 0; k < outFrames.size(); ++k) write_png(o.output / frame_name(k), outFrames[k], depth);
    if (s.saveSplit) {
      fs::create_directories(o.output / "split", ec);
      if (ec) throw IoError("cannot create '" + (o.output / "split").string() + "': " + ec.message());
      for (std::size_t k = 0; k < run.solution.w.size(); ++k) {
        write_png(o.output / "split" / frame_name(k, "w_"), min_max_rescaled(run.solution.w[k]), depth);
        write_png(o.output / "split" / frame_name(k, "z_"), min_max_rescaled(run.solution.z[k]), depth);
      }
    }
    if (s.saveFlows) {
      fs::create_directories(o.output / "flows", ec);
      if (ec) throw IoError("cannot create '" + (o.output / "flows").string() + "': " + ec.message());
      for (std::size_t k = 0; k < run.lowResFlows.size(); ++k) {
        write_flo(o.output / "flows" / frame_name(k, "flow_", ".flo"), run.lowResFlows.flows[k]);
      }
    }
    if (s.saveEnergyTrace) {
      std::ofstream os(o.output / "energy.csv");
      rep.write_energy_csv(os);
      if (!os) throw IoError("cannot write '" + (o.output / "energy.csv").string() + "'");
    }
    if (truth) {
      const std::string name = s.name.empty() ? fs::path(o.input).filename().string() : s.name;
      const FrameSequence bic = clip_sequence(bicubic_upsample(lowY, cfg.factor));
      const auto crop = static_cast<std::size_t>(s.crop);
      const EvalResult eb = evaluate_central(bic, *truth, crop);
      const EvalResult es = evaluate_central(run.solution.u, *truth, crop);
      std::ofstream os(o.output / "metrics.csv");
      write_metrics_header(os);
      write_metrics_row(os, name, "bicubic", eb);
      write_metrics_row(os, name, "mmc", es);
      if (!os) throw IoError("cannot write '" + (o.output / "metrics.csv").string() + "'");
      log << "run: central frame " << es.frameIndex << " PSNR " << es.psnr << " dB (bicubic " << eb.psnr
          << "), SSIM " << es.ssim << " (bicubic " << eb.ssim << ")\n";
    }
    return kOk;
  } catch (const UsageError& e) {
    err << "run: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "run: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    err << "run: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    err << "run: numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string result;
  std::string truth;
  int crop = 20;
  std::string name = "sequence";
  std::string method = "result";
  std::optional<fs::path> output;  // unset: CSV to the log stream
};

inline int cmd_eval(const EvalOptions& o, std::ostream& log, std::ostream& err) {
  try {
    if (o.crop < 0) throw UsageError("crop must be nonnegative");
    const LoadedFrames r = load_frames(o.result);
    const LoadedFrames t = load_frames(o.truth);
    std::vector<std::string> problems;
    const std::size_t n = std::max(r.paths.size(), t.paths.size());
    for (std::size_t k = 0; k < n; ++k) {
      if (k >= r.paths.size()) {
        problems.push_back(t.paths[k].filename().string() + ": missing from result set");
      } else if (k >= t.paths.size()) {
        problems.push_back(r.paths[k].filename().string() + ": missing from truth set");
      } else if (r.images[k].width() != t.images[k].width() || r.images[k].height() != t.images[k].height()) {
        problems.push_back(r.paths[k].filename().string() + ": dimensions differ");
      }
    }
    if (!problems.empty()) {
      std::string msg = "frame sets do not match:";
      for (const auto& p : problems) msg += "\n  " + p;
      throw UsageError(msg);
    }
    if (2 * static_cast<std::size_t>(o.crop) >= std::min(r.width(), r.height())) {
      throw UsageError("crop " + std::to_string(o.crop) + " too large for " + std::to_string(r.width()) + "x" +
                       std::to_string(r.height()) + " frames");
    }
    const EvalResult res = evaluate_central(r.luminance(), t.luminance(), static_cast<std::size_t>(o.crop));
    std::ostringstream csv;
    write_metrics_header(csv);
    write_metrics_row(csv, o.name, o.method, res);
    if (o.output) {
      std::ofstream os(*o.output);
      os << csv.str();
      if (!os) throw IoError("cannot write '" + o.output->string() + "'");
    } else {
      log << csv.str();
    }
    return kOk;
  } catch (const UsageError& e) {
    err << "eval: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "eval: " << e.what() << "\n";
    return kIo;
  }
}

}  // namespace mmcsr::cli
