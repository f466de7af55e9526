#pragma once

// Config-driven experiment pipelines behind the command-line tool.

#include "diffintersort/common.hpp"
#include "diffintersort/diffintersort.hpp"
#include "diffintersort/discovery.hpp"
#include "diffintersort/distance.hpp"
#include "diffintersort/graph.hpp"
#include "diffintersort/io.hpp"
#include "diffintersort/scm.hpp"
#include "diffintersort/score.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace diffintersort::experiment {

using nlohmann::json;

enum class GraphKind { ER, SF };

inline std::string to_string(GraphKind k) { return k == GraphKind::ER ? "er" : "sf"; }

struct GraphSpec {
  GraphKind kind = GraphKind::ER;
  int d = 10;
  double edges_per_node = 1.0;  ///< ER: used when edge_prob is unset
  double edge_prob = -1.0;      ///< ER: explicit p_e (overrides edges_per_node)
  int m = 2;                    ///< SF: attachments per new node

  double er_prob() const { return edge_prob >= 0.0 ? edge_prob : er_edge_prob(d, edges_per_node); }
};

struct SweepSpec {
  std::vector<double> p_int{1.0};
  std::vector<double> edges_per_node{1.0};
  int seeds = 3;
  bool discover = false;
};

struct ExperimentConfig {
  GraphSpec graph;
  MechanismKind mechanism = MechanismKind::Linear;
  NoiseSpec noise;
  BenchmarkSpec data;
  double eps = 0.3;
  double c = 0.5;
  OptimizerConfig optimizer;
  TrainConfig training;
  SweepSpec sweep;
  int random_draws = 100;
  int trace_every = 10;
  std::uint64_t seed = 0;

  void validate() const {
    require(graph.d >= 2, "config: graph.d must be >= 2");
    if (graph.kind == GraphKind::ER) {
      require(graph.edges_per_node >= 0.0, "config: graph.edges_per_node must be >= 0");
      require(graph.edge_prob <= 1.0, "config: graph.p_e must lie in [0, 1]");
    } else {
      require(graph.m >= 1 && graph.m < graph.d, "config: graph.m must lie in [1, d)");
    }
    noise.validate();
    require(data.n_obs >= 2 && data.n_int >= 1, "config: need n_obs >= 2 and n_int >= 1");
    require(data.p_int > 0.0 && data.p_int <= 1.0, "config: data.p_int must lie in (0, 1]");
    require(data.intervention_stddev > 0.0, "config: data.intervention_stddev must be positive");
    require(eps > 0.0 && c >= 0.0, "config: need distance.eps > 0 and distance.c >= 0");
    optimizer.validate();
    training.validate();
    require(!sweep.p_int.empty() && !sweep.edges_per_node.empty(), "config: sweep grid is empty");
    for (double v : sweep.p_int) require(v > 0.0 && v <= 1.0, "config: sweep p_int values must lie in (0, 1]");
    for (double v : sweep.edges_per_node) require(v > 0.0, "config: sweep edges_per_node values must be positive");
    require(sweep.seeds >= 1, "config: sweep.seeds must be >= 1");
    require(random_draws >= 1 && trace_every >= 1, "config: random_draws and trace_every must be >= 1");
  }
};

namespace detail {

// Reads keys of one object section, rejecting unknown ones.
class Section {
 public:
  Section(json j, std::string name) : j_(std::move(j)), name_(std::move(name)) {
    if (!j_.is_object()) throw ParameterError("config: section '" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ParameterError("config: " + name_ + "." + key + " has the wrong type");
    }
  }

  json sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? j_.at(key) : json::object();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ParameterError("config: unknown key '" + (name_.empty() ? k : name_ + "." + k) + "'");
  }

 private:
  json j_;
  std::string name_;
  std::set<std::string> seen_;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

/// Effective configuration as JSON (defaults filled in).
inline json to_json(const ExperimentConfig& c) {
  json g = {{"kind", to_string(c.graph.kind)}, {"d", c.graph.d}};
  if (c.graph.kind == GraphKind::ER) {
    g["edges_per_node"] = c.graph.edges_per_node;
    if (c.graph.edge_prob >= 0.0) g["p_e"] = c.graph.edge_prob;
  } else {
    g["m"] = c.graph.m;
  }
  return {
      {"graph", g},
      {"mechanism", {{"kind", to_string(c.mechanism)}, {"noise", to_string(c.noise.family)}, {"noise_scale", c.noise.scale}}},
      {"data",
       {{"n_obs", c.data.n_obs},
        {"n_int", c.data.n_int},
        {"p_int", c.data.p_int},
        {"intervention_shift", c.data.intervention_shift},
        {"intervention_stddev", c.data.intervention_stddev},
        {"standardize", c.data.standardize}}},
      {"distance", {{"eps", c.eps}, {"c", c.c}}},
      {"sinkhorn",
       {{"temperature", c.optimizer.sinkhorn.temperature},
        {"iterations", c.optimizer.sinkhorn.iterations},
        {"grad_iterations", c.optimizer.sinkhorn.grad_iterations}}},
      {"optimizer",
       {{"learning_rate", c.optimizer.learning_rate},
        {"steps", c.optimizer.steps},
        {"restarts", c.optimizer.restarts},
        {"init_scale", c.optimizer.init_scale},
        {"patience", c.optimizer.patience},
        {"mode", to_string(c.optimizer.mode)}}},
      {"training",
       {{"gamma", c.training.gamma},
        {"lambda1", c.training.lambda1},
        {"lambda2", c.training.lambda2},
        {"epochs", c.training.epochs},
        {"learning_rate", c.training.learning_rate},
        {"threshold", c.training.threshold},
        {"init_scale", c.training.init_scale},
        {"alternate", c.training.alternate},
        {"mode", to_string(c.training.mode)}}},
      {"sweep",
       {{"p_int", c.sweep.p_int},
        {"edges_per_node", c.sweep.edges_per_node},
        {"seeds", c.sweep.seeds},
        {"discover", c.sweep.discover}}},
      {"random_draws", c.random_draws},
      {"trace_every", c.trace_every},
      {"seed", c.seed},
  };
}

/// Parse and validate a config document. Missing keys keep their defaults;
/// unknown keys are errors.
inline ExperimentConfig parse_config(const json& root) {
  ExperimentConfig c;
  detail::Section top(root, "");
  {
    detail::Section s(top.sub("graph"), "graph");
    std::string kind = to_string(c.graph.kind);
    s.get("kind", kind);
    if (kind == "er") c.graph.kind = GraphKind::ER;
    else if (kind == "sf") c.graph.kind = GraphKind::SF;
    else throw ParameterError("config: graph.kind must be 'er' or 'sf'");
    s.get("d", c.graph.d);
    s.get("edges_per_node", c.graph.edges_per_node);
    s.get("p_e", c.graph.edge_prob);
    s.get("m", c.graph.m);
    s.finish();
  }
  {
    detail::Section s(top.sub("mechanism"), "mechanism");
    std::string kind = to_string(c.mechanism), noise = to_string(c.noise.family);
    s.get("kind", kind);
    s.get("noise", noise);
    s.get("noise_scale", c.noise.scale);
    c.mechanism = parse_mechanism_kind(kind);
    c.noise.family = parse_noise_family(noise);
    s.finish();
  }
  {
    detail::Section s(top.sub("data"), "data");
    s.get("n_obs", c.data.n_obs);
    s.get("n_int", c.data.n_int);
    s.get("p_int", c.data.p_int);
    s.get("intervention_shift", c.data.intervention_shift);
    s.get("intervention_stddev", c.data.intervention_stddev);
    s.get("standardize", c.data.standardize);
    s.finish();
  }
  {
    detail::Section s(top.sub("distance"), "distance");
    s.get("eps", c.eps);
    s.get("c", c.c);
    s.finish();
  }
  {
    detail::Section s(top.sub("sinkhorn"), "sinkhorn");
    s.get("temperature", c.optimizer.sinkhorn.temperature);
    s.get("iterations", c.optimizer.sinkhorn.iterations);
    s.get("grad_iterations", c.optimizer.sinkhorn.grad_iterations);
    s.finish();
    c.training.sinkhorn = c.optimizer.sinkhorn;
  }
  {
    detail::Section s(top.sub("optimizer"), "optimizer");
    std::string mode = to_string(c.optimizer.mode);
    s.get("learning_rate", c.optimizer.learning_rate);
    s.get("steps", c.optimizer.steps);
    s.get("restarts", c.optimizer.restarts);
    s.get("init_scale", c.optimizer.init_scale);
    s.get("patience", c.optimizer.patience);
    s.get("mode", mode);
    c.optimizer.mode = parse_mask_mode(mode);
    s.finish();
  }
  {
    detail::Section s(top.sub("training"), "training");
    std::string mode = to_string(c.training.mode);
    s.get("gamma", c.training.gamma);
    s.get("lambda1", c.training.lambda1);
    s.get("lambda2", c.training.lambda2);
    s.get("epochs", c.training.epochs);
    s.get("learning_rate", c.training.learning_rate);
    s.get("threshold", c.training.threshold);
    s.get("init_scale", c.training.init_scale);
    s.get("alternate", c.training.alternate);
    s.get("mode", mode);
    c.training.mode = parse_mask_mode(mode);
    s.finish();
  }
  {
    detail::Section s(top.sub("sweep"), "sweep");
    s.get("p_int", c.sweep.p_int);
    s.get("edges_per_node", c.sweep.edges_per_node);
    s.get("seeds", c.sweep.seeds);
    s.get("discover", c.sweep.discover);
    s.finish();
  }
  top.get("random_draws", c.random_draws);
  top.get("trace_every", c.trace_every);
  top.get("seed", c.seed);
  top.finish();
  c.training.eps = c.eps;
  c.training.c = c.c;
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) { return parse_config(io::read_json(path)); }

/// 16 hex digits identifying the effective config, seed excluded.
inline std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("seed");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(j.dump())));
  return buf;
}

/// One long-format result row.
struct ResultRow {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string command;
  std::string run_key;
  std::string graph;
  int d = 0;
  double p_int = 0.0;
  double p_e = 0.0;
  std::string method;
  std::string metric;
  double value = 0.0;

  double effective_ratio() const { return p_e > 0.0 ? p_int / std::sqrt(p_e) : 0.0; }
};

inline const char* kResultHeader = "config_hash,seed,command,run_key,graph,d,p_int,p_e,effective_ratio,method,metric,value";

/// Appends rows to a results CSV from any thread; rows with non-finite values
/// are rejected.
class ResultWriter {
 public:
  explicit ResultWriter(fs::path path) : path_(std::move(path)) {
    const bool fresh = !fs::exists(path_) || fs::file_size(path_) == 0;
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app);
    if (!out_) throw IoError("cannot open " + path_.string() + " for appending");
    out_ << std::setprecision(17);
    if (fresh) out_ << kResultHeader << '\n';
  }

  void write(const std::vector<ResultRow>& rows) {
    for (const auto& r : rows)
      if (!std::isfinite(r.value)) throw NumericalError("non-finite metric " + r.method + "/" + r.metric);
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& r : rows)
      out_ << r.config_hash << ',' << r.seed << ',' << r.command << ',' << r.run_key << ',' << r.graph << ',' << r.d
           << ',' << r.p_int << ',' << r.p_e << ',' << r.effective_ratio() << ',' << r.method << ',' << r.metric << ','
           << r.value << '\n';
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

inline std::vector<std::map<std::string, std::string>> read_results(const fs::path& path) {
  std::vector<std::map<std::string, std::string>> rows;
  if (!fs::exists(path)) return rows;
  auto in = io::open_in(path);
  std::string line;
  if (!std::getline(in, line)) return rows;
  const auto header = io::split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = io::split_csv_line(line);
    if (cells.size() != header.size()) throw IoError(path.string() + ": malformed results row");
    std::map<std::string, std::string> row;
    for (std::size_t k = 0; k < header.size(); ++k) row[header[k]] = cells[k];
    rows.push_back(std::move(row));
  }
  return rows;
}

struct Simulation {
  Dag graph;
  Mechanism mechanism;
  InterventionalDataset data;
  double p_e = 0.0;  ///< edge probability (ER) or realized density (SF)
};

inline Simulation simulate(const ExperimentConfig& c, std::uint64_t seed) {
  const Rng root(seed);
  Simulation s;
  if (c.graph.kind == GraphKind::ER) {
    s.p_e = c.graph.er_prob();
    s.graph = sample_er_dag(c.graph.d, s.p_e, root.split(0).seed());
  } else {
    s.graph = sample_sf_dag(c.graph.d, c.graph.m, root.split(0).seed());
    s.p_e = 2.0 * s.graph.edge_count() / (static_cast<double>(c.graph.d) * (c.graph.d - 1));
  }
  s.mechanism = build_mechanism(s.graph, c.mechanism, c.noise, root.split(1).seed());
  s.data = generate_benchmark(s.mechanism, c.data, root.split(2).seed());
  return s;
}

/// simulate: dataset directory plus ground-truth graph and manifest.
inline json cmd_simulate(const ExperimentConfig& c, const fs::path& out, std::uint64_t seed) {
  const auto s = simulate(c, seed);
  const json manifest = {{"command", "simulate"},
                         {"config", to_json(c)},
                         {"config_hash", config_hash(c)},
                         {"seed", seed},
                         {"graph", to_string(c.graph.kind)},
                         {"p_e", s.p_e},
                         {"edges", s.graph.edge_count()}};
  io::write_dataset(out, s.data, manifest);
  io::write_edge_list(out / "graph.txt", s.graph.adjacency());
  io::write_json(out / "manifest.json", manifest);
  return manifest;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct OrderOutcome {
  OptimizationResult opt;
  CausalOrder baseline;
  DistanceMatrix D;
  double opt_seconds = 0.0;
  double baseline_seconds = 0.0;
};

inline OrderOutcome run_order(const InterventionalDataset& ds, const ExperimentConfig& c, std::uint64_t seed) {
  OrderOutcome o;
  auto t0 = std::chrono::steady_clock::now();
  const auto raw = build_raw_distances(ds);
  o.D = threshold_matrix(raw, c.eps, c.c, ds.size());
  o.opt = optimize_potential(o.D, c.optimizer, seed);
  o.opt_seconds = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  o.baseline = sortranking(raw, c.eps, c.c);
  o.baseline_seconds = seconds_since(t0);
  return o;
}

// Mean score and mean d_top of uniformly random orders.
inline std::pair<double, double> random_baseline(const DistanceMatrix& D, const Dag* g, int draws, std::uint64_t seed) {
  Rng rng(seed);
  double score = 0.0, dtop = 0.0;
  for (int k = 0; k < draws; ++k) {
    const auto order = CausalOrder::random(D.size(), rng);
    score += score_of_order(D, order);
    if (g) dtop += d_top(*g, order);
  }
  return {score / draws, dtop / draws};
}

}  // namespace detail

/// order: DiffIntersort order, sortranking-approx baseline and random-order
/// baseline for a dataset directory.
inline json cmd_order(const fs::path& dataset, const ExperimentConfig& c, const fs::path& out, std::uint64_t seed,
                      std::ostream& log = std::cerr) {
  const auto ds = io::read_dataset(dataset);
  std::optional<Dag> truth;
  json warnings = json::array();
  if (fs::exists(dataset / "graph.txt")) {
    truth.emplace(io::read_edge_list(dataset / "graph.txt"));
    if (truth->size() != ds.size()) throw IoError("graph.txt and dataset disagree on d");
  } else {
    warnings.push_back("no ground-truth graph.txt; d_top omitted");
    log << "warning: " << warnings.back().get<std::string>() << '\n';
  }
  const auto o = detail::run_order(ds, c, seed);
  const auto [rand_score, rand_dtop] =
      detail::random_baseline(o.D, truth ? &*truth : nullptr, c.random_draws, Rng(seed).split(7).seed());

  const std::string hash = config_hash(c);
  struct Line {
    std::string method;
    double score;
    std::optional<double> dtop;
    double runtime;
    std::string order;
  };
  std::vector<Line> lines;
  const auto dt = [&](const CausalOrder& ord) -> std::optional<double> {
    if (!truth) return std::nullopt;
    return static_cast<double>(d_top(*truth, ord));
  };
  lines.push_back({"diffintersort", o.opt.score, dt(o.opt.order), o.opt_seconds, o.opt.order.to_string()});
  lines.push_back({"sortranking-approx", score_of_order(o.D, o.baseline), dt(o.baseline), o.baseline_seconds,
                   o.baseline.to_string()});
  lines.push_back({"random", rand_score, truth ? std::optional<double>(rand_dtop) : std::nullopt, 0.0, ""});

  {
    auto f = io::open_out(out / "orders.csv");
    f << "method,score,d_top,runtime_s,order,config_hash,seed\n";
    for (const auto& l : lines) {
      f << l.method << ',' << l.score << ',';
      if (l.dtop) f << *l.dtop;
      f << ',' << l.runtime << ',' << l.order << ',' << hash << ',' << seed << '\n';
    }
    io::close_checked(f, out / "orders.csv");
  }
  const double p_int = static_cast<double>(ds.envs.size()) / ds.size();
  std::vector<ResultRow> rows;
  for (const auto& l : lines) {
    const auto add = [&](const std::string& metric, double v) {
      rows.push_back({hash, seed, "order", "", "", ds.size(), p_int, 0.0, l.method, metric, v});
    };
    add("score", l.score);
    if (l.dtop) add("d_top", *l.dtop);
    add("runtime_s", l.runtime);
  }
  ResultWriter(out / "results.csv").write(rows);
  io::write_vector_csv(out / "potential.csv", o.opt.potential.values, "p");
  {
    auto f = io::open_out(out / "trace.csv");
    f << "step,best_score\n";
    for (std::size_t k = 0; k < o.opt.trace.size(); ++k) f << k << ',' << o.opt.trace[k] << '\n';
    io::close_checked(f, out / "trace.csv");
  }
  io::write_distance_matrix(out / "distances.csv", o.D);
  std::vector<int> targets;
  for (int t : ds.targets()) targets.push_back(t + 1);
  json restarts = json::array();
  for (const auto& r : o.opt.restarts)
    restarts.push_back({{"restart", r.restart}, {"steps", r.steps_run}, {"best_score", r.best_score}, {"failed", r.failed},
                        {"failure", r.failure}});
  const json manifest = {{"command", "order"},  {"dataset", dataset.string()}, {"config", to_json(c)},
                         {"config_hash", hash}, {"seed", seed},                {"intervention_targets", targets},
                         {"p_int", p_int},      {"restarts", restarts},        {"warnings", warnings},
                         {"order", o.opt.order.to_string()}, {"score", o.opt.score}};
  io::write_json(out / "manifest.json", manifest);
  return manifest;
}

/// discover: train the masked linear model (lambda2 = 0 without the
/// constraint) and evaluate the extracted graph.
inline json cmd_discover(const fs::path& dataset, const ExperimentConfig& c, const fs::path& out, std::uint64_t seed,
                         bool with_constraint, std::ostream& log = std::cerr) {
  auto ds = io::read_dataset(dataset);
  if (!ds.standardized) {
    log << "warning: dataset is not standardized; standardizing with observational statistics\n";
    standardize(ds);
  }
  std::optional<Dag> truth;
  if (fs::exists(dataset / "graph.txt")) truth.emplace(io::read_edge_list(dataset / "graph.txt"));
  else log << "warning: no ground-truth graph.txt; SHD, F1 and d_top omitted\n";

  TrainConfig tc = c.training;
  if (!with_constraint) tc.lambda2 = 0.0;
  const std::string hash = config_hash(c);
  json manifest = {{"command", "discover"},
                   {"dataset", dataset.string()},
                   {"config", to_json(c)},
                   {"config_hash", hash},
                   {"seed", seed},
                   {"with_constraint", with_constraint},
                   {"lambda2", tc.lambda2},
                   {"intervened_variable_loss_excluded", true}};

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res;
  try {
    res = train(ds, tc, seed, std::nullopt, c.trace_every);
  } catch (const NumericalError& e) {
    manifest["error"] = e.what();
    io::write_json(out / "diagnostics.json", manifest);
    throw;
  }
  const double seconds = detail::seconds_since(t0);
  const auto graph = extract_graph(res.model, tc.threshold, tc.sinkhorn);
  const auto order = extract_order(res.model.p);

  io::write_model(out, res.model, manifest);
  io::write_edge_list(out / "graph.txt", graph);
  {
    auto f = io::open_out(out / "trace.csv");
    f << "epoch,fit,observational,invariance,l1,score,total\n";
    for (const auto& r : res.trace)
      f << r.epoch << ',' << r.parts.fit << ',' << r.parts.observational << ',' << r.parts.invariance << ','
        << r.parts.l1 << ',' << r.parts.score << ',' << r.parts.total << '\n';
    io::close_checked(f, out / "trace.csv");
  }
  const std::string method = with_constraint ? "discovery-constrained" : "discovery-unconstrained";
  const double p_int = static_cast<double>(ds.envs.size()) / ds.size();
  std::vector<ResultRow> rows;
  const auto add = [&](const std::string& metric, double v) {
    rows.push_back({hash, seed, "discover", "", "", ds.size(), p_int, 0.0, method, metric, v});
  };
  int edges = 0;
  for (Eigen::Index i = 0; i < graph.size(); ++i) edges += graph.data()[i] != 0;
  add("edges", edges);
  add("runtime_s", seconds);
  add("final_loss", res.trace.back().parts.total);
  if (truth) {
    const auto es = edge_scores(graph, truth->adjacency());
    add("shd", shd(graph, truth->adjacency()));
    add("f1", es.f1);
    add("precision", es.precision);
    add("recall", es.recall);
    add("d_top", d_top(*truth, order));
    manifest["shd"] = shd(graph, truth->adjacency());
    manifest["f1"] = es.f1;
    manifest["d_top"] = d_top(*truth, order);
  }
  ResultWriter(out / "results.csv").write(rows);
  manifest["order"] = order.to_string();
  manifest["edges"] = edges;
  io::write_json(out / "manifest.json", manifest);
  return manifest;
}

struct BenchmarkSummary {
  int runs = 0;
  int cache_hits = 0;
  int failures = 0;
  json failed = json::array();
};

/// benchmark: the (p_int x edges per node) grid with `sweep.seeds` datasets
/// per cell. Runs already present in results.csv (same config hash, cell and
/// seed) are skipped. Writes summary.csv with per-cell mean and std.
inline BenchmarkSummary cmd_benchmark(const ExperimentConfig& base, const fs::path& out, std::uint64_t seed, int jobs,
                                      std::ostream& log = std::cerr) {
  require(jobs >= 1, "benchmark: jobs must be >= 1");
  const std::string hash = config_hash(base);
  const auto results_path = out / "results.csv";
  std::set<std::string> done;
  for (const auto& r : read_results(results_path))
    if (r.at("config_hash") == hash) done.insert(r.at("run_key"));

  struct Task {
    ExperimentConfig cfg;
    std::string key;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  BenchmarkSummary summary;
  const Rng root(seed);
  std::uint64_t cell = 0;
  for (double p_int : base.sweep.p_int) {
    for (double epn : base.sweep.edges_per_node) {
      for (int rep = 0; rep < base.sweep.seeds; ++rep) {
        Task t{base, "", root.split(cell * 1000 + static_cast<std::uint64_t>(rep)).seed()};
        t.cfg.data.p_int = p_int;
        t.cfg.graph.edges_per_node = epn;
        t.cfg.graph.edge_prob = -1.0;
        if (t.cfg.graph.kind == GraphKind::SF) t.cfg.graph.m = std::max(1, static_cast<int>(std::lround(epn)));
        std::ostringstream key;
        key << seed << ":p_int=" << p_int << ":epn=" << epn << ":rep=" << rep;
        t.key = key.str();
        ++summary.runs;
        if (done.count(t.key)) {
          ++summary.cache_hits;
          continue;
        }
        tasks.push_back(std::move(t));
      }
      ++cell;
    }
  }

  ResultWriter writer(results_path);
  std::mutex log_mu;
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      const auto& t = tasks[k];
      try {
        const auto s = simulate(t.cfg, t.seed);
        const auto o = detail::run_order(s.data, t.cfg, Rng(t.seed).split(3).seed());
        const auto [rand_score, rand_dtop] =
            detail::random_baseline(o.D, &s.graph, t.cfg.random_draws, Rng(t.seed).split(4).seed());
        std::vector<ResultRow> rows;
        const auto add = [&](const std::string& method, const std::string& metric, double v) {
          rows.push_back({hash, t.seed, "benchmark", t.key, to_string(t.cfg.graph.kind), t.cfg.graph.d,
                          t.cfg.data.p_int, s.p_e, method, metric, v});
        };
        add("diffintersort", "d_top", d_top(s.graph, o.opt.order));
        add("diffintersort", "score", o.opt.score);
        add("diffintersort", "runtime_s", o.opt_seconds);
        add("sortranking-approx", "d_top", d_top(s.graph, o.baseline));
        add("sortranking-approx", "score", score_of_order(o.D, o.baseline));
        add("random", "d_top", rand_dtop);
        add("random", "score", rand_score);
        if (t.cfg.sweep.discover) {
          for (bool constrained : {true, false}) {
            TrainConfig tc = t.cfg.training;
            if (!constrained) tc.lambda2 = 0.0;
            const auto res = train(s.data, tc, Rng(t.seed).split(5).seed(), o.D, t.cfg.trace_every);
            const auto g = extract_graph(res.model, tc.threshold, tc.sinkhorn);
            const std::string m = constrained ? "discovery-constrained" : "discovery-unconstrained";
            add(m, "shd", shd(g, s.graph.adjacency()));
            add(m, "f1", f1_edges(g, s.graph.adjacency()));
            add(m, "d_top", d_top(s.graph, extract_order(res.model.p)));
          }
        }
        writer.write(rows);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(log_mu);
        ++summary.failures;
        summary.failed.push_back({{"run_key", t.key}, {"error", e.what()}});
        log << "benchmark: run " << t.key << " failed: " << e.what() << '\n';
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));
  for (int k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  // aggregate every row of this config into summary.csv
  struct Acc {
    double sum = 0.0, sumsq = 0.0;
    int n = 0;
    double p_e = 0.0;
  };
  std::map<std::tuple<double, double, std::string, std::string>, Acc> acc;
  for (const auto& r : read_results(results_path)) {
    if (r.at("config_hash") != hash || r.at("command") != "benchmark") continue;
    const double p_int = std::stod(r.at("p_int"));
    // the cell is identified by p_int and the requested edges per node in the key
    const auto& key = r.at("run_key");
    const auto epos = key.find(":epn=");
    const double epn = std::stod(key.substr(epos + 5, key.find(":rep=") - epos - 5));
    auto& a = acc[{p_int, epn, r.at("method"), r.at("metric")}];
    const double v = std::stod(r.at("value"));
    a.sum += v;
    a.sumsq += v * v;
    ++a.n;
    a.p_e += std::stod(r.at("p_e"));
  }
  auto f = io::open_out(out / "summary.csv");
  f << "config_hash,graph,d,p_int,edges_per_node,p_e,effective_ratio,method,metric,mean,std,n\n";
  for (const auto& [k, a] : acc) {
    const auto& [p_int, epn, method, metric] = k;
    const double mean = a.sum / a.n;
    const double var = a.n > 1 ? std::max(0.0, (a.sumsq - a.n * mean * mean) / (a.n - 1)) : 0.0;
    const double p_e = a.p_e / a.n;
    f << hash << ',' << to_string(base.graph.kind) << ',' << base.graph.d << ',' << p_int << ',' << epn << ',' << p_e
      << ',' << (p_e > 0.0 ? p_int / std::sqrt(p_e) : 0.0) << ',' << method << ',' << metric << ',' << mean << ','
      << std::sqrt(var) << ',' << a.n << '\n';
  }
  io::close_checked(f, out / "summary.csv");
  io::write_json(out / "manifest.json", {{"command", "benchmark"},
                                         {"config", to_json(base)},
                                         {"config_hash", hash},
                                         {"seed", seed},
                                         {"runs", summary.runs},
                                         {"cache_hits", summary.cache_hits},
                                         {"failures", summary.failures},
                                         {"failed", summary.failed}});
  return summary;
}

}  // namespace diffintersort::experiment
