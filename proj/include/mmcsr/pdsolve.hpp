#pragma once

/// @file
/// Diagonally preconditioned first-order primal-dual solver for
///
///   min_x max_y  <K x, y> + g(x) - f*(y)
///
/// with x split into primal blocks and y into dual blocks. Each dual block
/// carries its own rows of K over the full primal vector and the proximal
/// map of its conjugate term.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcsr/core.hpp"
#include "mmcsr/linops.hpp"

namespace mmcsr {

/// In-place proximal map; `step` holds the per-entry step size.
using ProxFn = std::function<void(Eigen::Ref<Vector> v, const Eigen::Ref<const Vector>& step)>;
/// Function value used for energy reporting.
using ValueFn = std::function<double(const Eigen::Ref<const Vector>& v)>;

struct PrimalBlock {
  std::string name;
  Index dim = 0;
  ProxFn prox;    // empty: g = 0 on this block
  ValueFn value;  // empty: contributes 0
};

struct DualBlock {
  std::string name;
  LinearOperator op;         // output_dim rows over the full primal vector
  std::size_t channels = 1;  // entries c*G+p (c < channels) form one group
  ProxFn prox;               // prox of step * f*
  ValueFn value;             // f evaluated at K x
};

struct SaddlePointProblem {
  std::vector<PrimalBlock> primalBlocks;
  std::vector<DualBlock> dualBlocks;

  Index primal_dim() const {
    Index n = 0;
    for (const auto& b : primalBlocks) n += b.dim;
    return n;
  }
  Index dual_dim() const {
    Index n = 0;
    for (const auto& b : dualBlocks) n += b.op.output_dim();
    return n;
  }

  void validate() const {
    const Index n = primal_dim();
    if (n <= 0) throw std::invalid_argument("SaddlePointProblem: empty primal space");
    for (const auto& b : primalBlocks) {
      if (b.dim <= 0) throw std::invalid_argument("SaddlePointProblem: primal block '" + b.name + "' is empty");
    }
    for (const auto& b : dualBlocks) {
      if (b.op.input_dim() != n) {
        throw std::invalid_argument("SaddlePointProblem: dual block '" + b.name + "' has " +
                                    std::to_string(b.op.input_dim()) + " columns, primal space has " +
                                    std::to_string(n));
      }
      if (!b.prox) throw std::invalid_argument("SaddlePointProblem: dual block '" + b.name + "' has no prox");
      if (b.channels == 0 || b.op.output_dim() % static_cast<Index>(b.channels) != 0) {
        throw std::invalid_argument("SaddlePointProblem: dual block '" + b.name +
                                    "' rows do not tile its channel groups");
      }
    }
  }

  /// g(x) + sum_b f_b(K_b x).
  double energy(const Vector& x) const {
    Vector kx(dual_dim());
    Index off = 0;
    for (const auto& b : dualBlocks) {
      kx.segment(off, b.op.output_dim()) = b.op.apply(x);
      off += b.op.output_dim();
    }
    return energy(x, kx);
  }

  /// Same, with K x already stacked over the dual blocks.
  double energy(const Vector& x, const Vector& kx) const {
    double e = 0.0;
    Index off = 0;
    for (const auto& b : primalBlocks) {
      if (b.value) e += b.value(x.segment(off, b.dim));
      off += b.dim;
    }
    off = 0;
    for (const auto& b : dualBlocks) {
      if (b.value) e += b.value(kx.segment(off, b.op.output_dim()));
      off += b.op.output_dim();
    }
    return e;
  }
};

enum class StoppingReason { tolerance, maxIterations };

inline const char* to_string(StoppingReason r) {
  return r == StoppingReason::tolerance ? "tolerance" : "maxIterations";
}

struct SolveReport {
  int iterations = 0;
  double finalEnergy = 0.0;
  std::vector<int> traceIterations;
  std::vector<double> energyTrace;
  bool converged = false;
  StoppingReason stoppingReason = StoppingReason::maxIterations;

  /// CSV with header "iter,energy".
  void write_energy_csv(std::ostream& os) const {
    os << "iter,energy\n";
    char buf[64];
    for (std::size_t i = 0; i < energyTrace.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", energyTrace[i]);
      os << traceIterations[i] << ',' << buf << '\n';
    }
  }
};

struct SolverOptions {
  int maxIterations = 500;
  double tolerance = 1e-4;
  /// Energy is recorded every `traceInterval` iterations; 0 disables the trace
  /// (the final energy is still computed).
  int traceInterval = 1;
  /// Window for the relative-change stopping rule.
  int window = 10;
  /// Primal/dual balance: T is multiplied and S divided by this factor.
  double stepRatio = 1.0;
  /// Exponent a in [0, 2] of the diagonal preconditioner:
  /// T_j = 1 / sum_i |K_ij|^(2-a), S_i = 1 / sum_j |K_ij|^a.
  double preconditionExponent = 2.0;
};

struct SolveResult {
  Vector primal;
  Vector dual;
  SolveReport report;
};

/// Diagonal step sizes from powered absolute row/column sums; entries with
/// zero sums get step 1. Dual steps are made uniform within each group by
/// taking the group minimum.
struct Preconditioner {
  Vector tau;
  Vector sigma;

  static Preconditioner build(const SaddlePointProblem& problem, double exponent = 2.0) {
    if (!(exponent >= 0.0 && exponent <= 2.0)) {
      throw std::invalid_argument("Preconditioner: exponent must lie in [0, 2]");
    }
    const Index n = problem.primal_dim();
    Vector col = Vector::Zero(n);
    Preconditioner pc;
    pc.sigma.resize(problem.dual_dim());
    Index off = 0;
    for (const auto& b : problem.dualBlocks) {
      const SparseMatrix mag = b.op.matrix().cwiseAbs();
      const SparseMatrix cp = mag.unaryExpr([exponent](double v) { return std::pow(v, 2.0 - exponent); });
      const SparseMatrix rp = mag.unaryExpr([exponent](double v) { return std::pow(v, exponent); });
      col += (Vector::Ones(cp.rows()).transpose() * cp).transpose();
      const Vector rows = rp * Vector::Ones(rp.cols());
      Vector s = rows.unaryExpr([](double v) { return v > 0.0 ? 1.0 / v : 1.0; });
      const auto channels = static_cast<Index>(b.channels);
      if (channels > 1) {
        const Index groups = s.size() / channels;
        for (Index p = 0; p < groups; ++p) {
          double m = s[p];
          for (Index c = 1; c < channels; ++c) m = std::min(m, s[c * groups + p]);
          for (Index c = 0; c < channels; ++c) s[c * groups + p] = m;
        }
      }
      pc.sigma.segment(off, s.size()) = s;
      off += s.size();
    }
    pc.tau = col.unaryExpr([](double v) { return v > 0.0 ? 1.0 / v : 1.0; });
    return pc;
  }
};

/// Runs x+ = prox_{T g}(x - T K^T y), y+ = prox_{S f*}(y + S K (2 x+ - x)).
///
/// Stops when ||x_k - x_{k-window}|| / max(1, ||x_k||) < tolerance, when the
/// iterate pair is an exact fixed point (tolerance > 0 only), or after
/// maxIterations. Throws NumericalError on non-finite iterates.
inline SolveResult solve(const SaddlePointProblem& problem, const SolverOptions& options,
                         const std::optional<Vector>& x0 = std::nullopt,
                         const std::optional<Vector>& y0 = std::nullopt) {
  problem.validate();
  if (options.maxIterations <= 0) throw std::invalid_argument("solve: maxIterations must be positive");
  if (options.window <= 0) throw std::invalid_argument("solve: window must be positive");
  const Index n = problem.primal_dim();
  const Index m = problem.dual_dim();
  if (!(options.stepRatio > 0.0)) throw std::invalid_argument("solve: stepRatio must be positive");
  auto pc = Preconditioner::build(problem, options.preconditionExponent);
  pc.tau *= options.stepRatio;
  pc.sigma /= options.stepRatio;

  Vector x = x0 ? *x0 : Vector::Zero(n);
  Vector y = y0 ? *y0 : Vector::Zero(m);
  if (x.size() != n || y.size() != m) throw std::invalid_argument("solve: initial point has wrong size");

  auto apply_k = [&](const Vector& v) {
    Vector out(m);
    Index off = 0;
    for (const auto& b : problem.dualBlocks) {
      out.segment(off, b.op.output_dim()) = b.op.matrix() * v;
      off += b.op.output_dim();
    }
    return out;
  };
  auto apply_kt = [&](const Vector& v) {
    Vector out = Vector::Zero(n);
    Index off = 0;
    for (const auto& b : problem.dualBlocks) {
      out.noalias() += b.op.matrix().transpose() * v.segment(off, b.op.output_dim());
      off += b.op.output_dim();
    }
    return out;
  };

  SolveResult result;
  auto& report = result.report;
  std::deque<Vector> history;
  history.push_back(x);

  Vector kx = apply_k(x);
  Vector kty = apply_kt(y);
  int k = 0;
  while (k < options.maxIterations) {
    ++k;
    const Vector& tau = pc.tau;
    const Vector& sigma = pc.sigma;
    Vector xn = x - tau.cwiseProduct(kty);
    {
      Index off = 0;
      for (const auto& b : problem.primalBlocks) {
        if (b.prox) b.prox(xn.segment(off, b.dim), tau.segment(off, b.dim));
        off += b.dim;
      }
    }
    Vector kxn = apply_k(xn);
    Vector yn = y + sigma.cwiseProduct(2.0 * kxn - kx);
    {
      Index off = 0;
      for (const auto& b : problem.dualBlocks) {
        const Index len = b.op.output_dim();
        b.prox(yn.segment(off, len), sigma.segment(off, len));
        off += len;
      }
    }
    if (!xn.allFinite() || !yn.allFinite()) {
      throw NumericalError("primal-dual solver: non-finite iterate at iteration " + std::to_string(k));
    }
    Vector ktyn = apply_kt(yn);

    const bool fixed_point = options.tolerance > 0.0 && xn == x && yn == y;
    x = std::move(xn);
    y = std::move(yn);
    kx = std::move(kxn);
    kty = std::move(ktyn);

    if (options.traceInterval > 0 && k % options.traceInterval == 0) {
      report.traceIterations.push_back(k);
      report.energyTrace.push_back(problem.energy(x, kx));
    }

    history.push_back(x);
    if (static_cast<int>(history.size()) > options.window + 1) history.pop_front();
    bool stop = fixed_point;
    if (!stop && static_cast<int>(history.size()) == options.window + 1) {
      const double change = (x - history.front()).norm() / std::max(1.0, x.norm());
      stop = change < options.tolerance;
    }
    if (stop) {
      report.converged = true;
      report.stoppingReason = StoppingReason::tolerance;
      break;
    }
  }

  report.iterations = k;
  report.finalEnergy = problem.energy(x, kx);
  if (options.traceInterval > 0 && (report.traceIterations.empty() || report.traceIterations.back() != k)) {
    report.traceIterations.push_back(k);
    report.energyTrace.push_back(report.finalEnergy);
  }
  result.primal = std::move(x);
  result.dual = std::move(y);
  return result;
}

}  // namespace mmcsr
