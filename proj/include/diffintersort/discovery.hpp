#pragma once

#include "diffintersort/common.hpp"
#include "diffintersort/diffintersort.hpp"
#include "diffintersort/distance.hpp"
#include "diffintersort/graph.hpp"
#include "diffintersort/scm.hpp"
#include "diffintersort/score.hpp"
#include "diffintersort/sinkhorn.hpp"

#include <optional>
#include <string>
#include <vector>

namespace diffintersort {

/// Masked linear SEM. Row j of W holds the weights of the parents of j.
struct DiscoveryModel {
  Matrix W;
  Vector b;
  Potential p;

  int size() const { return static_cast<int>(W.rows()); }

  static DiscoveryModel zeros(int d) { return {Matrix::Zero(d, d), Vector::Zero(d), Potential(Vector::Zero(d))}; }
};

struct TrainConfig {
  double gamma = 0.5;
  double lambda1 = 0.01;
  double lambda2 = 1.0;
  int epochs = 3000;
  double learning_rate = 0.01;
  double threshold = 0.1;  ///< edge threshold on |W~| in standardized units
  double init_scale = 0.1;
  double eps = 0.3;
  double c = 0.5;
  bool alternate = false;  ///< update p and (W, b) on alternating steps
  SinkhornConfig sinkhorn;
  MaskMode mode = MaskMode::StraightThrough;

  void validate() const {
    require(gamma >= 0.0, "TrainConfig: gamma must be >= 0");
    require(lambda1 >= 0.0 && lambda2 >= 0.0, "TrainConfig: lambdas must be >= 0");
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(learning_rate > 0.0, "TrainConfig: learning rate must be positive");
    require(threshold > 0.0, "TrainConfig: threshold must be positive");
    require(init_scale > 0.0, "TrainConfig: init scale must be positive");
    require(eps > 0.0 && c >= 0.0, "TrainConfig: need eps > 0 and c >= 0");
    sinkhorn.validate();
  }
};

/// W~ = W o M^T: entry (j, i) survives iff i precedes j.
inline Matrix masked_weights(const Matrix& W, const Matrix& mask) { return W.cwiseProduct(mask.transpose()); }

/// X^ = X W~^T + 1 b^T under the hard mask of the model's potential.
inline Matrix predict(const DiscoveryModel& model, const Matrix& X, const SinkhornConfig& cfg = {}) {
  const int d = model.size();
  if (X.cols() != d || model.b.size() != d || model.p.size() != d) throw DimensionError("predict: dimension mismatch");
  const Matrix Wt = masked_weights(model.W, hard_mask_from_potential(model.p, cfg).mask);
  return (X * Wt.transpose()).rowwise() + model.b.transpose();
}

struct LossParts {
  double fit = 0.0;          ///< full fitting loss (observational MAE + invariance)
  double observational = 0.0;
  double invariance = 0.0;   ///< gamma-weighted environment term
  double l1 = 0.0;           ///< lambda1 * ||W||_1
  double score = 0.0;        ///< S(p), unweighted
  double total = 0.0;
};

struct LossGradient {
  LossParts parts;
  Matrix dW;
  Vector db;
  Vector dp;
};

namespace detail {

inline double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Weighted MAE sum_{r,j} w_j |R_rj| of the residual of X under (Wt, b), and
// its gradient with respect to the prediction.
inline double weighted_mae(const Matrix& X, const Matrix& Wt, const Vector& b, const Vector& w, Matrix* grad) {
  const Matrix R = ((X * Wt.transpose()).rowwise() + b.transpose()) - X;
  if (grad) *grad = R.unaryExpr(&sign0) * w.asDiagonal();
  return (R.cwiseAbs() * w).sum();
}

}  // namespace detail

/// Loss evaluation shared by fitting_loss, total_loss and train. The mask is
/// built once and used by both the fit and the score terms.
class LossEvaluator {
 public:
  LossEvaluator(const InterventionalDataset& ds, const DistanceMatrix& D, const TrainConfig& cfg)
      : ds_(ds), D_(D), cfg_(cfg) {
    cfg.validate();
    ds.validate();
    const int d = ds.size();
    if (D.size() != d) throw DimensionError("loss: distance matrix does not match the dataset");
    require(ds.obs.rows() >= 1, "loss: no observational samples");
    // observational column weights: plain MAE minus the reference halves of
    // the invariance differences
    const double n0 = static_cast<double>(ds.obs.rows());
    const double omega = 1.0 / static_cast<double>(ds.envs.size() + 1);
    obs_weight_ = Vector::Constant(d, 1.0 / (n0 * d));
    obs_only_weight_ = obs_weight_;
    inv_obs_weight_ = Vector::Zero(d);
    for (const auto& e : ds.envs) {
      if (d < 2) continue;
      for (int j = 0; j < d; ++j)
        if (j != e.target) inv_obs_weight_(j) -= cfg.gamma * omega / (n0 * (d - 1));
      require(e.data.rows() >= 1, "loss: empty environment");
      Vector w = Vector::Zero(d);
      for (int j = 0; j < d; ++j)
        if (j != e.target) w(j) = cfg.gamma * omega / (static_cast<double>(e.data.rows()) * (d - 1));
      env_weights_.push_back(std::move(w));
    }
    obs_weight_ += inv_obs_weight_;
  }

  LossGradient evaluate(const DiscoveryModel& m, bool with_gradient = true) const {
    const int d = m.size();
    if (ds_.size() != d || m.b.size() != d || m.p.size() != d) throw DimensionError("loss: model does not match data");
    const auto pm = mask_from_potential(m.p, cfg_.sinkhorn, cfg_.mode);
    const Matrix Wt = masked_weights(m.W, pm.mask);

    LossGradient out;
    Matrix G;
    Matrix* gp = with_gradient ? &G : nullptr;
    Matrix dWt = Matrix::Zero(d, d);
    Vector db = Vector::Zero(d);
    const auto accumulate = [&](const Matrix& X) {
      dWt.noalias() += G.transpose() * X;
      db += G.colwise().sum().transpose();
    };

    // observational data carries both the MAE and the reference terms
    const Matrix R0 = ((ds_.obs * Wt.transpose()).rowwise() + m.b.transpose()) - ds_.obs;
    const Vector abs0 = R0.cwiseAbs().colwise().sum().transpose();
    out.parts.observational = abs0.dot(obs_only_weight_);
    double inv = abs0.dot(inv_obs_weight_);
    if (with_gradient) {
      G = R0.unaryExpr(&detail::sign0) * obs_weight_.asDiagonal();
      accumulate(ds_.obs);
    }
    for (std::size_t k = 0; k < ds_.envs.size(); ++k) {
      inv += detail::weighted_mae(ds_.envs[k].data, Wt, m.b, env_weights_[k], gp);
      if (with_gradient) accumulate(ds_.envs[k].data);
    }
    out.parts.invariance = inv;
    out.parts.fit = out.parts.observational + inv;
    out.parts.l1 = cfg_.lambda1 * m.W.cwiseAbs().sum();
    out.parts.score = (D_.values.array() * pm.mask.array()).sum();
    out.parts.total = out.parts.fit + out.parts.l1 - cfg_.lambda2 * out.parts.score;
    if (!with_gradient) return out;

    out.dW = dWt.cwiseProduct(pm.mask.transpose()) + cfg_.lambda1 * m.W.unaryExpr(&detail::sign0);
    out.db = db;
    // d loss / d mask_ij = dWt_ji W_ji - lambda2 D_ij
    const Matrix dmask = dWt.cwiseProduct(m.W).transpose() - cfg_.lambda2 * D_.values;
    out.dp = pm.backward(dmask);
    return out;
  }

 private:
  const InterventionalDataset& ds_;
  const DistanceMatrix& D_;
  TrainConfig cfg_;
  Vector obs_weight_;
  Vector obs_only_weight_;
  Vector inv_obs_weight_;
  std::vector<Vector> env_weights_;
};

/// Distance matrix used as the ordering regularizer for a dataset.
inline DistanceMatrix dataset_distance_matrix(const InterventionalDataset& ds, double eps, double c) {
  return threshold_matrix(build_raw_distances(ds), eps, c, ds.size());
}

/// Observational MAE plus gamma times the environment invariance term. In an
/// environment targeting k, column k is left out of both that environment's
/// loss and the observational loss it is compared with.
inline double fitting_loss(const DiscoveryModel& m, const InterventionalDataset& ds, const TrainConfig& cfg) {
  const DistanceMatrix D{Matrix::Zero(ds.size(), ds.size()), cfg.eps, cfg.c, {}};
  return LossEvaluator(ds, D, cfg).evaluate(m, false).parts.fit;
}

/// fitting_loss + lambda1 ||W||_1 - lambda2 S(p).
inline double total_loss(const DiscoveryModel& m, const InterventionalDataset& ds, const DistanceMatrix& D,
                         const TrainConfig& cfg) {
  return LossEvaluator(ds, D, cfg).evaluate(m, false).parts.total;
}

inline double total_loss(const DiscoveryModel& m, const InterventionalDataset& ds, const TrainConfig& cfg) {
  return total_loss(m, ds, dataset_distance_matrix(ds, cfg.eps, cfg.c), cfg);
}

struct TrainTraceRow {
  int epoch = 0;
  LossParts parts;
};

struct TrainResult {
  DiscoveryModel model;
  DistanceMatrix distances;
  std::vector<TrainTraceRow> trace;
};

/// Edge i -> j iff |W~_ji| > threshold under the hard mask of p.
inline BoolMatrix extract_graph(const DiscoveryModel& m, double threshold, const SinkhornConfig& cfg = {}) {
  require(threshold > 0.0, "extract_graph: threshold must be positive");
  const Matrix Wt = masked_weights(m.W, hard_mask_from_potential(m.p, cfg).mask);
  const int d = m.size();
  BoolMatrix adj = BoolMatrix::Zero(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      if (i != j && std::abs(Wt(j, i)) > threshold) adj(i, j) = 1;
  return adj;
}

/// Joint Adam descent over (W, b, p) on the total loss. D is computed once
/// from the dataset unless supplied.
inline TrainResult train(const InterventionalDataset& ds, const TrainConfig& cfg, std::uint64_t seed,
                         std::optional<DistanceMatrix> D = std::nullopt, int trace_every = 1) {
  cfg.validate();
  require(!ds.envs.empty() || cfg.lambda2 == 0.0, "train: the ordering regularizer needs interventional data");
  require(trace_every >= 1, "train: trace interval must be >= 1");
  const int d = ds.size();
  require(d >= 1 && ds.obs.rows() >= 1, "train: empty dataset");
  TrainResult res;
  res.distances = D ? std::move(*D)
                    : (ds.envs.empty() ? DistanceMatrix{Matrix::Zero(d, d), cfg.eps, cfg.c, {}}
                                       : dataset_distance_matrix(ds, cfg.eps, cfg.c));
  const LossEvaluator loss(ds, res.distances, cfg);

  Rng rng(seed);
  DiscoveryModel m = DiscoveryModel::zeros(d);
  for (int i = 0; i < d; ++i) m.p.values(i) = cfg.init_scale * rng.normal();

  AdamState aw(static_cast<Eigen::Index>(d) * d), ab(d), ap(d);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    m.p = jitter_ties(std::move(m.p), rng);
    const auto g = loss.evaluate(m);
    if (!std::isfinite(g.parts.total) || !g.dW.allFinite() || !g.db.allFinite() || !g.dp.allFinite())
      throw NumericalError("train: non-finite loss or gradient at epoch " + std::to_string(epoch) +
                           " (fit " + std::to_string(g.parts.fit) + ", score " + std::to_string(g.parts.score) + ")");
    if (epoch % trace_every == 0 || epoch + 1 == cfg.epochs) res.trace.push_back({epoch, g.parts});
    const bool step_p = !cfg.alternate || epoch % 2 == 1;
    const bool step_w = !cfg.alternate || epoch % 2 == 0;
    if (step_w) {
      const Vector gw = Eigen::Map<const Vector>(g.dW.data(), g.dW.size());
      Eigen::Map<Vector>(m.W.data(), m.W.size()) -= cfg.learning_rate * aw.direction(gw);
      m.b -= cfg.learning_rate * ab.direction(g.db);
    }
    if (step_p) m.p.values -= cfg.learning_rate * ap.direction(g.dp);
  }
  m.p = jitter_ties(std::move(m.p), rng);
  res.model = std::move(m);
  return res;
}

}  // namespace diffintersort
