#pragma once

#include "diffintersort/common.hpp"
#include "diffintersort/hungarian.hpp"
#include "diffintersort/score.hpp"

#include <algorithm>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace diffintersort {

struct SinkhornConfig {
  double temperature = 0.05;
  int iterations = 500;
  /// Iterations differentiated in the backward pass; 0 means all of them.
  /// Earlier normalizers are then treated as constants.
  int grad_iterations = 0;

  void validate() const {
    require(temperature > 0.0 && std::isfinite(temperature), "SinkhornConfig: temperature must be positive");
    require(iterations >= 1, "SinkhornConfig: iterations must be >= 1");
    require(grad_iterations >= 0, "SinkhornConfig: grad_iterations must be >= 0");
  }
};

/// Sinkhorn operator with a reverse-mode pass through the unrolled iterations.
///
/// Iterate k computes Y_k = X_{k-1} - r_k 1^T (row log-sum-exp) and
/// X_k = Y_k - 1 c_k^T (column log-sum-exp) from X_0 = M / t; the output is
/// exp(X_T).
///
/// Iterations run in scaling form on a stabilized kernel
/// K = exp(X_0 - A 1^T - 1 B^T), where exp(current) = diag(u) K diag(v), so a
/// half-step is one matrix-vector product and a reciprocal (u = 1 / K v).
/// When a scaling leaves [e^-L, e^L] (L = kAbsorbLimit) that half-step is
/// redone exactly in the log domain and the normalizers are absorbed into a
/// new kernel. The scalings of exp(Y_k) and exp(X_k) are recorded with the
/// kernel they refer to, which is all the backward pass needs.
class SinkhornTape {
 public:
  static constexpr double kAbsorbLimit = 50.0;

  SinkhornTape() = default;

  SinkhornTape(const Matrix& m, const SinkhornConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    if (m.rows() != m.cols()) throw DimensionError("sinkhorn: input must be square");
    if (!m.allFinite()) throw NumericalError("sinkhorn: input has non-finite entries");
    const auto d = m.rows();
    const int T = cfg.iterations;
    logits_ = m / cfg.temperature;
    rows_.resize(d, T);
    cols_.resize(d, T);

    Matrix kernel;
    absorb(Vector::Zero(d), Vector::Zero(d), kernel, /*exact_rows=*/true);
    Vector u = Vector::Ones(d), v = Vector::Ones(d), tmp(d);
    for (int k = 1; k <= T; ++k) {
      tmp.noalias() = kernel * v;
      u = tmp.cwiseInverse();
      if (!in_range(u)) {
        const auto& [a, b] = refs_.back();
        absorb(a - log_scaling(v, /*rows=*/true), b - v.array().log().matrix(), kernel, false);
        u.setOnes();
        v.setOnes();
      }
      rows_.record(k, static_cast<int>(refs_.size()) - 1, u, v);
      tmp.noalias() = kernel.transpose() * u;
      v = tmp.cwiseInverse();
      if (!in_range(v)) {
        const auto& [a, b] = refs_.back();
        absorb(a - u.array().log().matrix(), b - log_scaling(u, /*rows=*/false), kernel, false);
        u.setOnes();
        v.setOnes();
      }
      cols_.record(k, static_cast<int>(refs_.size()) - 1, u, v);
    }
    soft_ = u.asDiagonal() * kernel * v.asDiagonal();
    if (!soft_.allFinite()) throw NumericalError("sinkhorn: non-finite output");
    const auto& [a, b] = refs_.back();
    log_soft_ = (logits_.colwise() - (a - u.array().log().matrix())).rowwise() - (b - v.array().log().matrix()).transpose();
  }

  const Matrix& soft() const { return soft_; }
  /// X_T, the output before exponentiation. It differs from M / t only by
  /// row and column offsets, so it stays finite where soft() underflows.
  const Matrix& log_soft() const { return log_soft_; }
  const SinkhornConfig& config() const { return cfg_; }
  int size() const { return static_cast<int>(soft_.rows()); }
  /// Number of kernels exponentiated by the forward pass.
  int absorptions() const { return static_cast<int>(refs_.size()); }

  /// Gradient with respect to the input M given the gradient with respect to
  /// the soft permutation.
  Matrix backward(const Matrix& grad_soft) const {
    if (grad_soft.rows() != soft_.rows() || grad_soft.cols() != soft_.cols())
      throw DimensionError("sinkhorn backward: gradient shape mismatch");
    const int T = cfg_.iterations;
    const int stop = cfg_.grad_iterations > 0 ? std::max(0, T - cfg_.grad_iterations) : 0;
    const auto d = soft_.rows();
    Matrix g = grad_soft.cwiseProduct(soft_);
    Matrix kernel;
    int loaded = -1;
    Vector w(d);
    const auto load = [&](int ref) {
      if (ref == loaded) return;
      kernel = exp_kernel(refs_[static_cast<std::size_t>(ref)]);
      loaded = ref;
    };
    for (int k = T; k > stop; --k) {
      // column step: exp(X_k) has unit column sums
      load(cols_.ref[static_cast<std::size_t>(k - 1)]);
      w = g.colwise().sum().transpose().cwiseProduct(cols_.v.col(k - 1));
      for (Eigen::Index j = 0; j < d; ++j) g.col(j) -= w(j) * cols_.u.col(k - 1).cwiseProduct(kernel.col(j));
      // row step: exp(Y_k) has unit row sums
      load(rows_.ref[static_cast<std::size_t>(k - 1)]);
      w = g.rowwise().sum().cwiseProduct(rows_.u.col(k - 1));
      for (Eigen::Index j = 0; j < d; ++j) g.col(j) -= rows_.v(j, k - 1) * w.cwiseProduct(kernel.col(j));
    }
    return g / cfg_.temperature;
  }

  /// Largest deviation of any row or column sum from 1.
  double marginal_error() const {
    const double r = (soft_.rowwise().sum().array() - 1.0).abs().maxCoeff();
    const double c = (soft_.colwise().sum().array() - 1.0).abs().maxCoeff();
    return std::max(r, c);
  }

 private:
  // Column k-1 holds the scalings (relative to kernel ref[k-1]) after half-step k.
  struct ScalingLog {
    std::vector<int> ref;
    Matrix u;
    Matrix v;

    void resize(Eigen::Index d, int T) {
      ref.assign(static_cast<std::size_t>(T), 0);
      u.resize(d, T);
      v.resize(d, T);
    }
    void record(int k, int r, const Vector& uu, const Vector& vv) {
      ref[static_cast<std::size_t>(k - 1)] = r;
      u.col(k - 1) = uu;
      v.col(k - 1) = vv;
    }
  };
  using Reference = std::pair<Vector, Vector>;

  static bool in_range(const Vector& x) {
    static const double lo = std::exp(-kAbsorbLimit), hi = std::exp(kAbsorbLimit);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (!(x(i) >= lo && x(i) <= hi)) return false;
    return true;
  }

  Matrix exp_kernel(const Reference& ref) const {
    return ((logits_.colwise() - ref.first).rowwise() - ref.second.transpose()).array().exp().matrix();
  }

  // Exact log of the scaling that normalizes the rows (or columns) of
  // diag(.) K diag(scale), computed as a log-sum-exp over the current log
  // matrix so that it stays finite when the kernel under- or overflows.
  Vector log_scaling(const Vector& scale, bool rows) const {
    const auto& [a, b] = refs_.back();
    const Vector ls = scale.array().log();
    Matrix x = rows ? Matrix((logits_.colwise() - a).rowwise() - (b - ls).transpose())
                    : Matrix(((logits_.colwise() - (a - ls)).rowwise() - b.transpose()).transpose());
    const Vector mx = x.rowwise().maxCoeff();
    const Vector lse = mx.array() + (x.colwise() - mx).array().exp().rowwise().sum().log();
    return -lse;
  }

  // Start a new kernel at reference (a, b). With exact_rows the reference is
  // shifted by the row maxima first (initial kernel).
  void absorb(Vector a, Vector b, Matrix& kernel, bool exact_rows) {
    if (exact_rows) a += ((logits_.colwise() - a).rowwise() - b.transpose()).rowwise().maxCoeff();
    refs_.emplace_back(std::move(a), std::move(b));
    kernel = exp_kernel(refs_.back());
  }

  SinkhornConfig cfg_;
  Matrix logits_;
  std::vector<Reference> refs_;  ///< (A, B) of each kernel
  ScalingLog rows_;              ///< scalings of exp(Y_k)
  ScalingLog cols_;              ///< scalings of exp(X_k)
  Matrix soft_;
  Matrix log_soft_;
};

/// Doubly stochastic relaxation of the permutation argmax of <P, M>.
inline Matrix sinkhorn_operator(const Matrix& m, const SinkhornConfig& cfg) { return SinkhornTape(m, cfg).soft(); }

enum class MaskMode { StraightThrough, Soft };

inline std::string to_string(MaskMode m) { return m == MaskMode::StraightThrough ? "straight-through" : "soft"; }

inline MaskMode parse_mask_mode(const std::string& s) {
  if (s == "straight-through" || s == "hard") return MaskMode::StraightThrough;
  if (s == "soft") return MaskMode::Soft;
  throw ParameterError("unknown mask mode '" + s + "'");
}

/// Sorting weights o = (d, d-1, ..., 1). The assignment maximizing
/// <P, p o^T> sends the largest potential to column 0, so that
/// P L P^T == [p_i > p_j] with L strictly upper triangular.
inline Vector sorting_weights(int d) {
  Vector o(d);
  for (int j = 0; j < d; ++j) o(j) = static_cast<double>(d - j);
  return o;
}

namespace detail {

// A * L^T with L strictly upper triangular ones: (A L^T)_ib = sum_{a > b} A_ia.
inline Matrix times_upper_transpose(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  Vector acc = Vector::Zero(a.rows());
  for (Eigen::Index b = a.cols() - 1; b >= 0; --b) {
    out.col(b) = acc;
    acc += a.col(b);
  }
  return out;
}

// A * L: (A L)_ib = sum_{a < b} A_ia.
inline Matrix times_upper(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  Vector acc = Vector::Zero(a.rows());
  for (Eigen::Index b = 0; b < a.cols(); ++b) {
    out.col(b) = acc;
    acc += a.col(b);
  }
  return out;
}

}  // namespace detail

/// Ordering mask of a potential together with what its backward pass needs.
struct PotentialMask {
  Matrix mask;           ///< forward value (binary in straight-through mode)
  HardPermutation hard;  ///< Hungarian rounding of the soft permutation
  SinkhornTape tape;
  MaskMode mode = MaskMode::StraightThrough;

  const Matrix& soft() const { return tape.soft(); }

  /// Gradient with respect to the potential given the gradient with respect
  /// to the mask. In straight-through mode the gradient reaching the hard
  /// permutation is passed to the soft permutation unchanged.
  Vector backward(const Matrix& grad_mask) const {
    const auto d = mask.rows();
    if (grad_mask.rows() != d || grad_mask.cols() != d) throw DimensionError("mask backward: shape mismatch");
    Matrix gp;
    if (mode == MaskMode::StraightThrough) {
      // G H L^T + G^T H L with H a permutation: right-multiplying by H moves
      // column i to column col_of_row[i].
      Matrix gh(d, d), gth(d, d);
      for (Eigen::Index i = 0; i < d; ++i) {
        const auto c = hard.col_of_row[static_cast<std::size_t>(i)];
        gh.col(c) = grad_mask.col(i);
        gth.col(c) = grad_mask.row(i).transpose();
      }
      gp = detail::times_upper_transpose(gh) + detail::times_upper(gth);
    } else {
      const Matrix& s = tape.soft();
      gp = detail::times_upper_transpose(grad_mask * s) + detail::times_upper(grad_mask.transpose() * s);
    }
    const Matrix gm = tape.backward(gp);
    Vector gcentered = gm * sorting_weights(static_cast<int>(d));
    return gcentered.array() - gcentered.mean();
  }
};

/// Mask [p_i > p_j] built as P L P^T from the Sinkhorn relaxation of the
/// sorting permutation of p (rounded by the Hungarian algorithm in
/// straight-through mode). The potential is centered first; the mask only
/// depends on differences of p.
inline PotentialMask mask_from_potential(const Potential& p, const SinkhornConfig& cfg,
                                         MaskMode mode = MaskMode::StraightThrough) {
  const int d = p.size();
  require(d >= 1, "mask_from_potential: empty potential");
  if (!p.values.allFinite()) throw NumericalError("mask_from_potential: non-finite potential");
  const Vector centered = p.values.array() - p.values.mean();
  PotentialMask out;
  out.mode = mode;
  out.tape = SinkhornTape(centered * sorting_weights(d).transpose(), cfg);
  // Rounded in the log domain: <P, X_T> and <P, M / t> differ by a constant
  // over permutations, so this is the exact sorting permutation even when
  // exp(X_T) is still far from a vertex of the Birkhoff polytope.
  out.hard = hungarian(out.tape.log_soft());
  if (mode == MaskMode::StraightThrough) {
    out.mask = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (out.hard.col_of_row[static_cast<std::size_t>(i)] < out.hard.col_of_row[static_cast<std::size_t>(j)])
          out.mask(i, j) = 1.0;
  } else {
    const Matrix& s = out.tape.soft();
    out.mask = detail::times_upper(s) * s.transpose();
  }
  return out;
}

struct HardMask {
  Matrix mask;
  Matrix soft;
};

/// Binary ordering mask of a distinct-entry potential and its soft permutation.
inline HardMask hard_mask_from_potential(const Potential& p, const SinkhornConfig& cfg) {
  require(!p.has_ties(), "hard_mask_from_potential: potential has tied entries");
  auto pm = mask_from_potential(p, cfg, MaskMode::StraightThrough);
  return {std::move(pm.mask), pm.tape.soft()};
}

namespace detail {

inline Vector central_differences(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  require(h >= 1e-7 && h <= 1e-3, "grad_check: step must lie in [1e-7, 1e-3]");
  Vector fd(x.size());
  Vector xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp(k) = x(k) + h;
    const double fp = f(xp);
    xp(k) = x(k) - h;
    const double fm = f(xp);
    xp(k) = x(k);
    fd(k) = (fp - fm) / (2.0 * h);
  }
  return fd;
}

}  // namespace detail

/// Largest relative error between an analytic gradient and central finite
/// differences of `f` at `x`; coordinates where both are below 1e-8 in
/// magnitude are compared in absolute terms.
inline double grad_check(const std::function<double(const Vector&)>& f, const Vector& analytic, const Vector& x,
                         double h = 1e-5) {
  if (analytic.size() != x.size()) throw DimensionError("grad_check: gradient size mismatch");
  const Vector fd = detail::central_differences(f, x, h);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double scale = std::max(std::abs(fd(k)), std::abs(analytic(k)));
    const double err = std::abs(fd(k) - analytic(k));
    worst = std::max(worst, scale < 1e-8 ? err : err / scale);
  }
  return worst;
}

/// Norm-wise relative error |g_fd - g| / max(|g_fd|, |g|). Unlike the
/// coordinate-wise check it is not dominated by round-off in entries that are
/// tiny compared with the rest of the gradient.
inline double grad_check_norm(const std::function<double(const Vector&)>& f, const Vector& analytic, const Vector& x,
                              double h = 1e-5) {
  if (analytic.size() != x.size()) throw DimensionError("grad_check: gradient size mismatch");
  const Vector fd = detail::central_differences(f, x, h);
  const double diff = (fd - analytic).norm();
  const double scale = std::max(fd.norm(), analytic.norm());
  return scale < 1e-12 ? diff : diff / scale;
}

}  // namespace diffintersort
