#pragma once

#include "diffintersort/common.hpp"
#include "diffintersort/discovery.hpp"
#include "diffintersort/distance.hpp"
#include "diffintersort/graph.hpp"
#include "diffintersort/scm.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace diffintersort {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

inline void close_checked(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

/// Numeric CSV; a first line that does not parse is taken as a header.
inline Matrix read_matrix_csv(const fs::path& path, std::vector<std::string>* header = nullptr) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    std::vector<double> row(cells.size());
    bool ok = true;
    for (std::size_t k = 0; k < cells.size() && ok; ++k) ok = parse_double(cells[k], row[k]);
    if (!ok) {
      if (rows.empty() && lineno == 1) {
        if (header) *header = cells;
        continue;
      }
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": non-numeric value");
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = rows.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
  Matrix m(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nc; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

inline void write_matrix_csv(const fs::path& path, const Matrix& m, const std::vector<std::string>& header = {}) {
  auto out = open_out(path);
  if (!header.empty()) {
    if (static_cast<Eigen::Index>(header.size()) != m.cols()) throw DimensionError("csv header width differs from matrix");
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
  close_checked(out, path);
}

inline std::vector<std::string> variable_names(int d) {
  std::vector<std::string> names;
  for (int j = 1; j <= d; ++j) names.push_back("X" + std::to_string(j));
  return names;
}

/// Single-column CSV with a header line.
inline void write_vector_csv(const fs::path& path, const Vector& v, const std::string& name) {
  write_matrix_csv(path, Matrix(v), {name});
}

inline Vector read_vector_csv(const fs::path& path) {
  const Matrix m = read_matrix_csv(path);
  if (m.cols() != 1) throw IoError(path.string() + ": expected one column");
  return m.col(0);
}

/// Edge list: a `d=<n>` line followed by one 1-based `i j` line per edge i -> j.
inline void write_edge_list(const fs::path& path, const BoolMatrix& adj) {
  auto out = open_out(path);
  out << "d=" << adj.rows() << '\n';
  for (Eigen::Index i = 0; i < adj.rows(); ++i)
    for (Eigen::Index j = 0; j < adj.cols(); ++j)
      if (adj(i, j)) out << i + 1 << ' ' << j + 1 << '\n';
  close_checked(out, path);
}

inline BoolMatrix read_edge_list(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("d=", 0) != 0) throw IoError(path.string() + ": missing d=<n> header");
  int d = 0;
  try {
    d = std::stoi(line.substr(2));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad d=<n> header");
  }
  if (d < 1) throw IoError(path.string() + ": d must be >= 1");
  BoolMatrix adj = BoolMatrix::Zero(d, d);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    int i = 0, j = 0;
    if (!(ss >> i >> j) || i < 1 || j < 1 || i > d || j > d || i == j)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad edge '" + line + "'");
    adj(i - 1, j - 1) = 1;
  }
  return adj;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  close_checked(out, path);
}

inline nlohmann::json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Dataset directory: obs.csv, env_<k>.csv (k is the 1-based target) and
/// meta.json. `extra` is merged into meta.json.
inline void write_dataset(const fs::path& dir, const InterventionalDataset& ds, const nlohmann::json& extra = {}) {
  ds.validate();
  const auto names = variable_names(ds.size());
  write_matrix_csv(dir / "obs.csv", ds.obs, names);
  std::vector<int> targets;
  for (const auto& e : ds.envs) {
    write_matrix_csv(dir / ("env_" + std::to_string(e.target + 1) + ".csv"), e.data, names);
    targets.push_back(e.target + 1);
  }
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["d"] = ds.size();
  meta["n_obs"] = ds.obs.rows();
  meta["targets"] = targets;
  meta["standardized"] = ds.standardized;
  if (ds.mean.size() == ds.size()) meta["obs_mean"] = to_json(ds.mean);
  if (ds.stddev.size() == ds.size()) meta["obs_stddev"] = to_json(ds.stddev);
  write_json(dir / "meta.json", meta);
}

inline InterventionalDataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory " + dir.string() + " does not exist");
  const auto meta = read_json(dir / "meta.json");
  InterventionalDataset ds;
  ds.obs = read_matrix_csv(dir / "obs.csv");
  try {
    const int d = meta.at("d").get<int>();
    if (ds.obs.cols() != d) throw IoError(dir.string() + ": obs.csv has " + std::to_string(ds.obs.cols()) + " columns, meta says " + std::to_string(d));
    for (int t : meta.at("targets").get<std::vector<int>>()) {
      if (t < 1 || t > d) throw IoError(dir.string() + ": target " + std::to_string(t) + " out of range");
      ds.envs.push_back({t - 1, read_matrix_csv(dir / ("env_" + std::to_string(t) + ".csv"))});
    }
    ds.standardized = meta.value("standardized", false);
    if (meta.contains("obs_mean")) ds.mean = vector_from_json(meta["obs_mean"]);
    if (meta.contains("obs_stddev")) ds.stddev = vector_from_json(meta["obs_stddev"]);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + "/meta.json: " + e.what());
  }
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
  return ds;
}

/// Distance matrix as CSV plus a JSON sidecar holding eps, c and targets.
inline void write_distance_matrix(const fs::path& csv, const DistanceMatrix& D) {
  write_matrix_csv(csv, D.values);
  std::vector<int> targets;
  for (int t : D.targets) targets.push_back(t + 1);
  auto side = csv;
  side.replace_extension(".json");
  write_json(side, {{"eps", D.eps}, {"c", D.c}, {"targets", targets}});
}

inline DistanceMatrix read_distance_matrix(const fs::path& csv) {
  DistanceMatrix D;
  D.values = read_matrix_csv(csv);
  if (D.values.rows() != D.values.cols()) throw IoError(csv.string() + ": distance matrix is not square");
  auto side = csv;
  side.replace_extension(".json");
  if (fs::exists(side)) {
    const auto j = read_json(side);
    D.eps = j.value("eps", D.eps);
    D.c = j.value("c", D.c);
    for (int t : j.value("targets", std::vector<int>{})) D.targets.push_back(t - 1);
  }
  return D;
}

inline void write_model(const fs::path& dir, const DiscoveryModel& m, const nlohmann::json& manifest = {}) {
  write_matrix_csv(dir / "W.csv", m.W);
  write_vector_csv(dir / "b.csv", m.b, "b");
  write_vector_csv(dir / "p.csv", m.p.values, "p");
  if (!manifest.is_null()) write_json(dir / "model.json", manifest);
}

inline DiscoveryModel read_model(const fs::path& dir) {
  DiscoveryModel m;
  m.W = read_matrix_csv(dir / "W.csv");
  m.b = read_vector_csv(dir / "b.csv");
  m.p = Potential(read_vector_csv(dir / "p.csv"));
  if (m.W.rows() != m.W.cols() || m.b.size() != m.W.rows() || m.p.size() != m.W.rows())
    throw IoError(dir.string() + ": model files disagree on d");
  return m;
}

}  // namespace io
}  // namespace diffintersort
