#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ldict/learner.hpp"
#include "ldict/types.hpp"

namespace ldict {

struct MalformedFile : std::runtime_error {
  MalformedFile(const std::string& msg, std::int64_t offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(offset) +
                           ")"),
        byte_offset(offset) {}
  std::int64_t byte_offset;
};

struct DimensionOverflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io_detail {

constexpr char kMagic[4] = {'L', 'D', 'M', 'X'};
constexpr std::uint64_t kMaxElements = 1ull << 30;

}  // namespace io_detail

enum class MatrixFormat { Csv, Binary };

/// Binary layout: "LDMX", two little-endian u64 dims, row-major f64 payload.
inline void write_matrix_binary(const std::string& path, const Matrix& M) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(io_detail::kMagic, 4);
  const std::uint64_t r = static_cast<std::uint64_t>(M.rows());
  const std::uint64_t c = static_cast<std::uint64_t>(M.cols());
  out.write(reinterpret_cast<const char*>(&r), 8);
  out.write(reinterpret_cast<const char*>(&c), 8);
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) {
      const double v = M(i, j);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
  if (!out) throw IoError("write failed: " + path);
}

/// CSV layout: header "rows,cols", then one matrix row per line at 17
/// significant digits.
inline void write_matrix_csv(const std::string& path, const Matrix& M) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << M.rows() << "," << M.cols() << "\n";
  char buf[64];
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", M(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

inline void write_matrix(const std::string& path, const Matrix& M,
                         MatrixFormat fmt) {
  fmt == MatrixFormat::Binary ? write_matrix_binary(path, M)
                              : write_matrix_csv(path, M);
}

inline Matrix read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  const bool binary =
      in.gcount() == 4 && std::memcmp(magic, io_detail::kMagic, 4) == 0;
  if (binary) {
    std::uint64_t r = 0, c = 0;
    in.read(reinterpret_cast<char*>(&r), 8);
    in.read(reinterpret_cast<char*>(&c), 8);
    if (!in) throw MalformedFile("truncated binary header", in.tellg());
    if (r * c > io_detail::kMaxElements || (c != 0 && r > io_detail::kMaxElements / c))
      throw DimensionOverflow("matrix dimensions too large: " + path);
    Matrix M(static_cast<Index>(r), static_cast<Index>(c));
    for (std::uint64_t i = 0; i < r; ++i)
      for (std::uint64_t j = 0; j < c; ++j) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), 8);
        if (in.gcount() != 8)
          throw MalformedFile("truncated binary payload",
                              20 + static_cast<std::int64_t>(8 * (i * c + j)));
        M(static_cast<Index>(i), static_cast<Index>(j)) = v;
      }
    return M;
  }
  // CSV path: reopen as text
  in.clear();
  in.seekg(0);
  std::string line;
  std::int64_t offset = 0;
  if (!std::getline(in, line)) throw MalformedFile("empty file", 0);
  std::uint64_t r = 0, c = 0;
  {
    std::istringstream hs(line);
    char comma = 0;
    if (!(hs >> r >> comma >> c) || comma != ',')
      throw MalformedFile("bad CSV header, expected rows,cols", 0);
  }
  offset += static_cast<std::int64_t>(line.size()) + 1;
  if (r * c > io_detail::kMaxElements || (c != 0 && r > io_detail::kMaxElements / c))
    throw DimensionOverflow("matrix dimensions too large: " + path);
  Matrix M(static_cast<Index>(r), static_cast<Index>(c));
  for (std::uint64_t i = 0; i < r; ++i) {
    if (!std::getline(in, line))
      throw MalformedFile("missing CSV row " + std::to_string(i), offset);
    std::istringstream ls(line);
    std::string cell;
    for (std::uint64_t j = 0; j < c; ++j) {
      if (!std::getline(ls, cell, ','))
        throw MalformedFile("missing CSV value", offset);
      try {
        std::size_t used = 0;
        M(static_cast<Index>(i), static_cast<Index>(j)) = std::stod(cell, &used);
        if (used == 0) throw std::invalid_argument("empty");
      } catch (const std::exception&) {
        throw MalformedFile("unparseable CSV value '" + cell + "'", offset);
      }
    }
    offset += static_cast<std::int64_t>(line.size()) + 1;
  }
  return M;
}

/// Planted synthetic data: unit-column ground-truth dictionary, s-sparse
/// codes with magnitudes in [0.5, 1.5], spherical noise of fixed radius.
/// Deterministic per seed; every sample is guaranteed nontrivial.
inline std::pair<Dataset, Matrix> synth_dataset(Index n, Index K_true, Index T,
                                                Index sparsity,
                                                double eps_level,
                                                double noise_level,
                                                std::uint64_t seed) {
  if (sparsity > K_true)
    throw DimensionError("synth_dataset: sparsity must be <= K_true");
  if (noise_level > eps_level)
    throw DimensionError(
        "synth_dataset: noise_level must be <= eps_level to keep samples "
        "feasible by construction");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  Matrix D(n, K_true);
  for (Index i = 0; i < K_true; ++i) {
    Vector col(n);
    for (Index j = 0; j < n; ++j) col[j] = gauss(rng);
    D.col(i) = col / col.norm();
  }
  Dataset data(n);
  std::vector<Index> idx(static_cast<std::size_t>(K_true));
  for (Index i = 0; i < K_true; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Index t = 0; t < T; ++t) {
    Vector x;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      std::shuffle(idx.begin(), idx.end(), rng);
      Vector f = Vector::Zero(K_true);
      for (Index k = 0; k < sparsity; ++k) {
        const double sign = rng() & 1 ? 1.0 : -1.0;
        f[idx[static_cast<std::size_t>(k)]] = sign * mag(rng);
      }
      x = D * f;
      if (noise_level > 0.0) {
        Vector nz(n);
        for (Index j = 0; j < n; ++j) nz[j] = gauss(rng);
        x += nz * (noise_level / nz.norm());
      }
      ok = x.norm() > eps_level * (1.0 + 1e-9);
    }
    if (!ok)
      throw DimensionError("synth_dataset: could not draw a nontrivial sample");
    data.add(Sample(x, eps_level));
  }
  return {std::move(data), std::move(D)};
}

inline void write_trace(const std::vector<TraceRecord>& records,
                        const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "iter,objective,max_feas_violation,stationarity,wall_ms\n";
  char buf[64];
  for (const TraceRecord& r : records) {
    out << r.iter;
    for (double v : {r.objective, r.max_feas_violation, r.stationarity,
                     r.wall_ms}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
    out.flush();
  }
  if (!out) throw IoError("write failed: " + path);
}

/// Flat JSON run configuration. Unknown keys are rejected.
struct RunConfig {
  std::string input;
  std::string output_dir = ".";
  std::string cost = "l1";            // l1 | l2 | sql2
  std::string threshold = "constant"; // constant | proportional
  double eps = 0.1;
  Index K = 8;
  std::string method = "batch";       // batch | online | baseline
  std::string init = "data";          // data | random
  bool binary = false;
  // synth parameters
  Index n = 16;
  Index T = 500;
  Index K_true = 32;
  Index sparsity = 3;
  double noise = 0.05;
  int epochs = 1;
  double p_order = 1.0;  // calibrate-r only
  SolverParams params;

  static RunConfig from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "input",   "output_dir", "cost",       "threshold",  "eps",
        "K",       "method",     "init",       "binary",     "n",
        "T",       "K_true",     "sparsity",   "noise",      "epochs",
        "p",       "delta",      "r_mode",     "alpha",      "beta",
        "inner_iters", "max_outer", "max_sweeps", "tol",     "stop_tol",
        "seed",    "online_a",   "online_b",   "trace_every"};
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key()))
        throw IoError("config: unknown key '" + it.key() + "'");
    RunConfig c;
    auto get = [&](const char* k, auto& slot) {
      if (j.contains(k)) slot = j.at(k).template get<std::decay_t<decltype(slot)>>();
    };
    get("input", c.input);
    get("output_dir", c.output_dir);
    get("cost", c.cost);
    get("threshold", c.threshold);
    get("eps", c.eps);
    get("K", c.K);
    get("method", c.method);
    get("init", c.init);
    get("binary", c.binary);
    get("n", c.n);
    get("T", c.T);
    get("K_true", c.K_true);
    get("sparsity", c.sparsity);
    get("noise", c.noise);
    get("epochs", c.epochs);
    get("p", c.p_order);
    get("delta", c.params.delta);
    get("alpha", c.params.alpha);
    get("beta", c.params.beta);
    get("inner_iters", c.params.inner_iters);
    get("max_outer", c.params.max_outer);
    get("max_sweeps", c.params.max_sweeps);
    get("tol", c.params.tol);
    get("stop_tol", c.params.stop_tol);
    get("seed", c.params.seed);
    get("online_a", c.params.online_a);
    get("online_b", c.params.online_b);
    get("trace_every", c.params.trace_every);
    if (j.contains("r_mode")) {
      const std::string m = j.at("r_mode").get<std::string>();
      if (m == "paper")
        c.params.r_mode = RqMode::PaperDefault;
      else if (m == "calibrated")
        c.params.r_mode = RqMode::Calibrated;
      else
        throw IoError("config: r_mode must be 'paper' or 'calibrated'");
    }
    if (c.K < 1) throw IoError("config: K must be >= 1");
    return c;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("config parse error: " + std::string(e.what()));
    }
    return from_json(j);
  }

  CostModel cost_model() const {
    CostKind kind;
    if (cost == "l1")
      kind = CostKind::L1;
    else if (cost == "l2")
      kind = CostKind::L2;
    else if (cost == "sql2")
      kind = CostKind::SquaredL2;
    else
      throw IoError("config: cost must be l1, l2 or sql2");
    return CostModel(kind, K);
  }

  ThresholdModel threshold_model() const {
    if (threshold == "constant") return ThresholdModel::constant(eps);
    if (threshold == "proportional") return ThresholdModel::proportional(eps);
    throw IoError("config: threshold must be constant or proportional");
  }
};

}  // namespace ldict
