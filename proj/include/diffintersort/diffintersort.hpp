#pragma once

#include "diffintersort/common.hpp"
#include "diffintersort/distance.hpp"
#include "diffintersort/score.hpp"
#include "diffintersort/sinkhorn.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace diffintersort {

struct ScoreEvaluation {
  double value = 0.0;
  Vector gradient;  ///< d value / d p
  PotentialMask mask;
};

/// Differentiable score sum_ij D_ij * mask_ij(p).
inline ScoreEvaluation diffintersort_score(const Matrix& D, const Potential& p, const SinkhornConfig& cfg,
                                           MaskMode mode = MaskMode::StraightThrough) {
  if (D.rows() != D.cols() || D.rows() != p.size()) throw DimensionError("diffintersort_score: size mismatch");
  if (mode == MaskMode::StraightThrough) require(!p.has_ties(), "diffintersort_score: potential has tied entries");
  ScoreEvaluation out;
  out.mask = mask_from_potential(p, cfg, mode);
  out.value = (D.array() * out.mask.mask.array()).sum();
  out.gradient = out.mask.backward(D);
  return out;
}

inline ScoreEvaluation diffintersort_score(const DistanceMatrix& D, const Potential& p, const SinkhornConfig& cfg,
                                           MaskMode mode = MaskMode::StraightThrough) {
  return diffintersort_score(D.values, p, cfg, mode);
}

/// Adam moment estimates for one parameter block.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Vector m;
  Vector v;
  long step = 0;

  explicit AdamState(Eigen::Index n = 0) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}

  /// Update direction for gradient g (to be scaled by the learning rate).
  Vector direction(const Vector& g) {
    ++step;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    return (m / c1).array() / ((v / c2).array().sqrt() + epsilon);
  }
};

struct OptimizerConfig {
  double learning_rate = 0.01;
  int steps = 2000;
  int restarts = 5;
  double init_scale = 0.1;
  /// Stop a restart after this many steps without a better hard score (0 = never).
  int patience = 0;
  SinkhornConfig sinkhorn;
  MaskMode mode = MaskMode::StraightThrough;

  void validate() const {
    require(learning_rate > 0.0, "OptimizerConfig: learning rate must be positive");
    require(steps >= 1, "OptimizerConfig: steps must be >= 1");
    require(restarts >= 1, "OptimizerConfig: restarts must be >= 1");
    require(init_scale > 0.0, "OptimizerConfig: init scale must be positive");
    require(patience >= 0, "OptimizerConfig: patience must be >= 0");
    sinkhorn.validate();
  }
};

struct RestartReport {
  int restart = 0;
  int steps_run = 0;
  double best_score = 0.0;
  bool failed = false;
  std::string failure;
};

struct OptimizationResult {
  Potential potential;             ///< best potential found (hard score)
  CausalOrder order;
  double score = 0.0;              ///< hard score of `order`
  std::vector<double> trace;       ///< best hard score so far, per evaluated step, restarts concatenated
  std::vector<RestartReport> restarts;
};

/// Break exact ties with i.i.d. jitter of the given magnitude.
inline Potential jitter_ties(Potential p, Rng& rng, double magnitude = 1e-9) {
  while (p.has_ties())
    for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values(i) += magnitude * rng.normal();
  return p;
}

/// Gradient ascent (Adam) on the differentiable score from several random
/// initializations; keeps the potential with the best hard score seen.
inline OptimizationResult optimize_potential(const Matrix& D, const OptimizerConfig& opt, std::uint64_t seed) {
  opt.validate();
  if (D.rows() != D.cols()) throw DimensionError("optimize_potential: D must be square");
  const auto d = static_cast<int>(D.rows());
  require(d >= 1, "optimize_potential: empty problem");
  const Rng root(seed);
  OptimizationResult result;
  result.score = -std::numeric_limits<double>::infinity();

  for (int r = 0; r < opt.restarts; ++r) {
    Rng rng = root.split(static_cast<std::uint64_t>(r));
    Vector p(d);
    for (int i = 0; i < d; ++i) p(i) = opt.init_scale * rng.normal();
    AdamState adam(d);
    RestartReport report{r, 0, -std::numeric_limits<double>::infinity(), false, {}};
    int since_best = 0;
    for (int step = 0; step < opt.steps; ++step) {
      const Potential current = jitter_ties(Potential(p), rng);
      ScoreEvaluation ev;
      try {
        ev = diffintersort_score(D, current, opt.sinkhorn, opt.mode);
      } catch (const NumericalError& e) {
        report.failed = true;
        report.failure = e.what();
        break;
      }
      if (!std::isfinite(ev.value) || !ev.gradient.allFinite()) {
        report.failed = true;
        report.failure = "non-finite score or gradient at step " + std::to_string(step);
        break;
      }
      const double hard = score_of_potential_hard(D, current);
      ++report.steps_run;
      if (hard > report.best_score) {
        report.best_score = hard;
        since_best = 0;
      } else {
        ++since_best;
      }
      if (hard > result.score) {
        result.score = hard;
        result.potential = current;
      }
      result.trace.push_back(result.score);
      if (opt.patience > 0 && since_best >= opt.patience) break;
      p = current.values + opt.learning_rate * adam.direction(ev.gradient);
    }
    result.restarts.push_back(report);
  }
  if (result.potential.size() == 0) throw NumericalError("optimize_potential: every restart failed");
  result.order = extract_order(result.potential);
  return result;
}

inline OptimizationResult optimize_potential(const DistanceMatrix& D, const OptimizerConfig& opt, std::uint64_t seed) {
  return optimize_potential(D.values, opt, seed);
}

}  // namespace diffintersort
