#pragma once

#include "diffintersort/common.hpp"
#include "diffintersort/graph.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace diffintersort {

enum class NoiseFamily { Gaussian, HeteroscedasticGaussian, Laplace };
enum class MechanismKind { Linear, Rff };

inline std::string to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::Gaussian: return "gaussian";
    case NoiseFamily::HeteroscedasticGaussian: return "heteroscedastic";
    case NoiseFamily::Laplace: return "laplace";
  }
  return "?";
}

inline std::string to_string(MechanismKind k) { return k == MechanismKind::Linear ? "linear" : "rff"; }

inline NoiseFamily parse_noise_family(std::string_view s) {
  if (s == "gaussian") return NoiseFamily::Gaussian;
  if (s == "heteroscedastic") return NoiseFamily::HeteroscedasticGaussian;
  if (s == "laplace") return NoiseFamily::Laplace;
  throw ParameterError("unknown noise family '" + std::string(s) + "'");
}

inline MechanismKind parse_mechanism_kind(std::string_view s) {
  if (s == "linear") return MechanismKind::Linear;
  if (s == "rff") return MechanismKind::Rff;
  throw ParameterError("unknown mechanism kind '" + std::string(s) + "'");
}

struct NoiseSpec {
  NoiseFamily family = NoiseFamily::Gaussian;
  double scale = 1.0;  ///< std (gaussian), base std (heteroscedastic), b (laplace)

  void validate() const { require(scale > 0.0 && std::isfinite(scale), "NoiseSpec: scale must be positive"); }
};

struct MechanismOptions {
  double weight_min = 0.5;   ///< |linear weight| lower bound
  double weight_max = 2.0;   ///< |linear weight| upper bound
  int rff_features = 10;     ///< cosine features per node
  double rff_gain = 2.0;     ///< overall amplitude of each node's feature sum
  double bias_range = 1.0;   ///< biases uniform on [-range, range]
  double hetero_coef = 0.5;  ///< heteroscedastic slope magnitude bound
};

/// Random cosine features for one node: f(x) = sum_k amp_k cos(freq_k . x + phase_k).
struct RffNode {
  Matrix freq;   ///< features x parents
  Vector phase;  ///< features
  Vector amp;    ///< features
};

/// A structural causal model over a fixed DAG with parameters drawn once.
struct Mechanism {
  MechanismKind kind = MechanismKind::Linear;
  Dag graph;
  NoiseSpec noise;
  Matrix weights;        ///< (i, j) nonzero iff edge i -> j (linear only)
  Vector bias;
  Matrix hetero_slope;   ///< (i, j) slope of parent i in node j's log-scale (heteroscedastic only)
  Vector hetero_offset;
  std::vector<RffNode> rff;  ///< per node (rff only)
  std::vector<int> topo;

  int size() const { return graph.size(); }
};

/// Replace X_k's assignment by i.i.d. N(mean, stddev^2) draws.
struct Intervention {
  int target = 0;
  double mean = 0.0;
  double stddev = 1.0;
};

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline Mechanism build_mechanism(const Dag& g, MechanismKind kind, const NoiseSpec& noise, std::uint64_t seed,
                                 const MechanismOptions& opt = {}) {
  noise.validate();
  require(opt.weight_min > 0.0 && opt.weight_max >= opt.weight_min, "MechanismOptions: bad weight range");
  require(opt.rff_features >= 1, "MechanismOptions: rff_features must be >= 1");
  Rng rng(seed);
  const int d = g.size();
  Mechanism m;
  m.kind = kind;
  m.graph = g;
  m.noise = noise;
  m.topo = g.topological_order();
  m.weights = Matrix::Zero(d, d);
  m.bias = Vector::Zero(d);
  m.hetero_slope = Matrix::Zero(d, d);
  // softplus(log(e - 1)) == 1, so roots keep the base scale
  m.hetero_offset = Vector::Constant(d, std::log(std::numbers::e - 1.0));
  for (int j = 0; j < d; ++j) {
    m.bias(j) = rng.uniform(-opt.bias_range, opt.bias_range);
    const auto pa = g.parents(j);
    for (int i : pa) {
      const double mag = rng.uniform(opt.weight_min, opt.weight_max);
      m.weights(i, j) = rng.bernoulli(0.5) ? mag : -mag;
      if (noise.family == NoiseFamily::HeteroscedasticGaussian)
        m.hetero_slope(i, j) = rng.uniform(-opt.hetero_coef, opt.hetero_coef);
    }
  }
  if (kind == MechanismKind::Linear) return m;

  m.weights.setZero();
  m.rff.resize(static_cast<std::size_t>(d));
  const int nf = opt.rff_features;
  for (int j = 0; j < d; ++j) {
    const auto pa = g.parents(j);
    auto& node = m.rff[static_cast<std::size_t>(j)];
    node.freq = Matrix(nf, static_cast<Eigen::Index>(pa.size()));
    node.phase = Vector(nf);
    node.amp = Vector(nf);
    for (int k = 0; k < nf; ++k) {
      for (Eigen::Index c = 0; c < node.freq.cols(); ++c) node.freq(k, c) = rng.normal();
      node.phase(k) = rng.uniform(0.0, 2.0 * std::numbers::pi);
      node.amp(k) = opt.rff_gain * std::sqrt(2.0 / nf) * rng.normal();
    }
  }
  return m;
}

/// Ancestral sampling of n rows. Under an intervention the target's
/// structural assignment is replaced by draws independent of its parents.
inline Matrix sample(const Mechanism& m, int n, const std::optional<Intervention>& intervention, std::uint64_t seed) {
  require(n >= 1, "sample: n must be >= 1");
  const int d = m.size();
  if (intervention) {
    require(intervention->target >= 0 && intervention->target < d, "sample: intervention target out of range");
    require(intervention->stddev > 0.0, "sample: intervention stddev must be positive");
  }
  Rng rng(seed);
  Matrix x(n, d);
  std::vector<std::vector<int>> parents(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) parents[static_cast<std::size_t>(j)] = m.graph.parents(j);

  for (int r = 0; r < n; ++r) {
    for (int j : m.topo) {
      if (intervention && intervention->target == j) {
        x(r, j) = rng.normal(intervention->mean, intervention->stddev);
        continue;
      }
      const auto& pa = parents[static_cast<std::size_t>(j)];
      double value = m.bias(j);
      if (m.kind == MechanismKind::Linear) {
        for (int i : pa) value += m.weights(i, j) * x(r, i);
      } else {
        const auto& node = m.rff[static_cast<std::size_t>(j)];
        if (!pa.empty()) {
          for (Eigen::Index k = 0; k < node.freq.rows(); ++k) {
            double arg = node.phase(k);
            for (std::size_t c = 0; c < pa.size(); ++c) arg += node.freq(k, static_cast<Eigen::Index>(c)) * x(r, pa[c]);
            value += node.amp(k) * std::cos(arg);
          }
        }
      }
      double eps = 0.0;
      switch (m.noise.family) {
        case NoiseFamily::Gaussian: eps = rng.normal(0.0, m.noise.scale); break;
        case NoiseFamily::Laplace: eps = rng.laplace(m.noise.scale); break;
        case NoiseFamily::HeteroscedasticGaussian: {
          double lin = m.hetero_offset(j);
          for (int i : pa) lin += m.hetero_slope(i, j) * x(r, i);
          eps = rng.normal(0.0, m.noise.scale * softplus(lin));
          break;
        }
      }
      x(r, j) = value + eps;
    }
  }
  return x;
}

struct Environment {
  int target = 0;  ///< 0-based intervened variable
  Matrix data;
};

/// Observational samples plus single-target interventional environments,
/// standardized with observational statistics.
struct InterventionalDataset {
  Matrix obs;
  std::vector<Environment> envs;
  Vector mean;    ///< raw observational column means
  Vector stddev;  ///< raw observational column standard deviations
  bool standardized = false;

  int size() const { return static_cast<int>(obs.cols()); }

  std::vector<int> targets() const {
    std::vector<int> t;
    for (const auto& e : envs) t.push_back(e.target);
    return t;
  }

  void validate() const {
    const int d = size();
    std::vector<char> seen(static_cast<std::size_t>(d), 0);
    for (const auto& e : envs) {
      require(e.target >= 0 && e.target < d, "dataset: environment target out of range");
      require(!seen[static_cast<std::size_t>(e.target)], "dataset: duplicate environment target");
      seen[static_cast<std::size_t>(e.target)] = 1;
      if (e.data.cols() != d) throw DimensionError("dataset: environment column count differs from obs");
    }
  }
};

/// Column means and population standard deviations of `x`.
inline std::pair<Vector, Vector> column_moments(const Matrix& x) {
  const Vector mean = x.colwise().mean().transpose();
  const Vector var = (x.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  return {mean, var.array().sqrt().matrix()};
}

/// Standardize obs and every environment with the observational mean/std.
inline void standardize(InterventionalDataset& ds) {
  require(ds.obs.rows() >= 2, "standardize: need at least 2 observational samples");
  auto [mean, sd] = column_moments(ds.obs);
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    require(sd(j) > 1e-12 && std::isfinite(sd(j)),
            "standardize: observational variable " + std::to_string(j + 1) + " has zero variance");
  const auto apply = [&](Matrix& x) {
    x = ((x.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array()).matrix();
  };
  apply(ds.obs);
  for (auto& e : ds.envs) apply(e.data);
  ds.mean = std::move(mean);
  ds.stddev = std::move(sd);
  ds.standardized = true;
}

struct BenchmarkSpec {
  int n_obs = 5000;
  int n_int = 100;
  double p_int = 1.0;                 ///< fraction of variables intervened on
  double intervention_shift = 2.0;    ///< mean shift of the replacement noise, in observational std units
  double intervention_stddev = 1.0;   ///< replacement noise std, in observational std units
  bool standardize = true;
};

inline int intervention_count(int d, double p_int) {
  return std::clamp(static_cast<int>(std::ceil(p_int * d - 1e-9)), 1, d);
}

/// Simulate observational data, pick ceil(p_int * d) distinct targets and
/// sample one interventional environment per target.
inline InterventionalDataset generate_benchmark(const Mechanism& m, const BenchmarkSpec& spec, std::uint64_t seed) {
  require(spec.p_int > 0.0 && spec.p_int <= 1.0, "generate_benchmark: p_int must lie in (0, 1]");
  require(spec.n_obs >= 2, "generate_benchmark: n_obs must be >= 2");
  require(spec.n_int >= 1, "generate_benchmark: n_int must be >= 1");
  const Rng root(seed);
  const int d = m.size();
  InterventionalDataset ds;
  ds.obs = sample(m, spec.n_obs, std::nullopt, root.split(0).seed());
  const auto [mean, sd] = column_moments(ds.obs);

  Rng pick = root.split(1);
  auto perm = pick.permutation(d);
  perm.resize(static_cast<std::size_t>(intervention_count(d, spec.p_int)));
  std::sort(perm.begin(), perm.end());
  for (int k : perm) {
    Intervention iv{k, mean(k) + spec.intervention_shift * sd(k), spec.intervention_stddev * sd(k)};
    if (!(iv.stddev > 0.0)) iv.stddev = spec.intervention_stddev;
    ds.envs.push_back({k, sample(m, spec.n_int, iv, root.split(100 + static_cast<std::uint64_t>(k)).seed())});
  }
  if (spec.standardize) {
    standardize(ds);
  } else {
    ds.mean = mean;
    ds.stddev = sd;
  }
  return ds;
}

}  // namespace diffintersort
