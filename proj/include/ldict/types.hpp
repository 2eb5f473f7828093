#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ldict {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InfeasibleSeparator : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroSeparator : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EncodingInfeasible : std::runtime_error {
  explicit EncodingInfeasible(const std::string& msg, Index sample = -1)
      : std::runtime_error(msg), sample_index(sample) {}
  Index sample_index;
};

struct UnboundedProblem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyAfterFilter : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateDenominator : std::runtime_error {
  explicit DegenerateDenominator(const std::string& msg, Index sample)
      : std::runtime_error(msg), sample_index(sample) {}
  Index sample_index;
};

struct CalibrationFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One data point together with its resolved error threshold.
struct Sample {
  Vector x;
  double eps = 0.0;

  Sample() = default;
  Sample(Vector x_, double eps_) : x(std::move(x_)), eps(eps_) {
    if (x.size() < 1) throw DimensionError("Sample: dimension must be >= 1");
    if (eps < 0.0) throw DimensionError("Sample: eps must be nonnegative");
  }
};

struct Dataset {
  std::vector<Sample> samples;
  Index n = 0;

  Dataset() = default;
  explicit Dataset(Index dim) : n(dim) {}

  Index size() const { return static_cast<Index>(samples.size()); }

  void add(Sample s) {
    if (n == 0) n = s.x.size();
    if (s.x.size() != n)
      throw DimensionError("Dataset: sample dimension mismatch");
    samples.push_back(std::move(s));
  }
};

enum class ThresholdKind { Constant, Proportional, Explicit };

struct ThresholdModel {
  ThresholdKind kind = ThresholdKind::Constant;
  double eps0 = 0.0;
  std::vector<double> per_sample;  // Explicit only

  static ThresholdModel constant(double e) {
    if (e < 0.0) throw DimensionError("ThresholdModel: eps0 must be >= 0");
    return {ThresholdKind::Constant, e, {}};
  }
  static ThresholdModel proportional(double e) {
    if (e < 0.0) throw DimensionError("ThresholdModel: eps0 must be >= 0");
    if (e >= 1.0)
      throw DimensionError(
          "ThresholdModel: proportional eps0 must be < 1, every sample would "
          "be trivially encodable otherwise");
    return {ThresholdKind::Proportional, e, {}};
  }
  static ThresholdModel explicit_list(std::vector<double> eps) {
    for (double e : eps)
      if (e < 0.0) throw DimensionError("ThresholdModel: eps must be >= 0");
    return {ThresholdKind::Explicit, 0.0, std::move(eps)};
  }
};

inline double effective_threshold(const ThresholdModel& tm, const Vector& x,
                                  Index t = -1) {
  if (x.size() == 0) throw DimensionError("effective_threshold: empty x");
  switch (tm.kind) {
    case ThresholdKind::Constant:
      return tm.eps0;
    case ThresholdKind::Proportional:
      return tm.eps0 * x.norm();
    case ThresholdKind::Explicit:
      if (t < 0 || t >= static_cast<Index>(tm.per_sample.size()))
        throw DimensionError("effective_threshold: explicit index out of range");
      return tm.per_sample[static_cast<std::size_t>(t)];
  }
  throw std::logic_error("effective_threshold: bad kind");
}

enum class CostKind { L1, L2, SquaredL2 };

/// Positively homogeneous gauge cost with order p and bounded convex
/// sublevel set V_c = { f : c(f) <= 1 }.
struct CostModel {
  CostKind kind = CostKind::L1;
  Index K = 0;

  CostModel() = default;
  CostModel(CostKind k, Index code_len) : kind(k), K(code_len) {
    if (K < 1) throw DimensionError("CostModel: K must be >= 1");
  }

  double p() const { return kind == CostKind::SquaredL2 ? 2.0 : 1.0; }
};

inline double evaluate_cost(const CostModel& cm, const Vector& f) {
  if (f.size() != cm.K) throw DimensionError("evaluate_cost: length mismatch");
  switch (cm.kind) {
    case CostKind::L1:
      return f.lpNorm<1>();
    case CostKind::L2:
      return f.norm();
    case CostKind::SquaredL2:
      return f.squaredNorm();
  }
  throw std::logic_error("evaluate_cost: bad kind");
}

enum class FeasibleSet { UnitColumns, NonnegUnitColumns };

struct Dictionary {
  Matrix D;
  FeasibleSet feasible_set = FeasibleSet::UnitColumns;

  Index n() const { return D.rows(); }
  Index K() const { return D.cols(); }

  bool feasible(double tol = 1e-9) const {
    for (Index i = 0; i < D.cols(); ++i) {
      if (D.col(i).norm() > 1.0 + tol) return false;
      if (feasible_set == FeasibleSet::NonnegUnitColumns &&
          D.col(i).minCoeff() < -1e-12)
        return false;
    }
    return true;
  }
};

/// Result of solving the encoding problem for one sample.
struct Encoding {
  Vector f;
  double cost = 0.0;     // optimal value of the regularized encoding problem
  Vector h;              // normalized code, an element of V_c
  Vector lambda;         // optimal separator at the scale of Lambda(D, x)
  double feas_residual = 0.0;  // ||x - Df|| - eps - delta * cost^{1/p}
  double saddle_gap = 0.0;
  bool converged = true;
  Index iterations = 0;
};

enum class RqMode { PaperDefault, Calibrated };

struct RqConstants {
  double r = 2.0;
  double q = 0.5;
  double p = 1.0;
};

/// Exponent pair of the dual surrogate. The two modes agree at p = 1; for
/// other orders the Calibrated value is forced by requiring the min-sup of
/// the surrogate to reproduce the encoding cost (see the calibration oracle).
inline RqConstants rq_constants(double p, RqMode mode) {
  if (p <= 0.0) throw DimensionError("rq_constants: p must be positive");
  RqConstants rq;
  rq.p = p;
  rq.q = p / (1.0 + p);
  rq.r = (mode == RqMode::PaperDefault)
             ? p * (1.0 + p)
             : (1.0 + p) * std::pow(p, -p / (1.0 + p));
  return rq;
}

enum class InitMethod { DataColumns, RandomUnit };

struct SolverParams {
  double delta = 0.0;
  RqMode r_mode = RqMode::Calibrated;
  double alpha = 0.5;      // separator ascent step scale
  double beta = 0.5;       // code / dictionary descent step scale
  int inner_iters = 5;     // ascent steps per descent step
  int max_outer = 20000;   // iteration cap for the saddle solvers
  int max_sweeps = 50;     // alternating sweeps for the learners
  double tol = 1e-6;       // relative saddle-gap / residual target
  double stop_tol = 1e-5;  // learner stopping: relative objective decrease
  std::uint64_t seed = 0;
  double online_a = 1.0;   // step sizes a / (b + t); the asymptotic error
                           // decays like t^{-c·a}, so a must not be too small
  double online_b = 10.0;
  int trace_every = 100;   // online trace cadence
  InitMethod init = InitMethod::DataColumns;

  void validate() const {
    if (alpha <= 0.0 || beta <= 0.0 || tol <= 0.0)
      throw DimensionError("SolverParams: alpha, beta, tol must be positive");
    if (delta < 0.0) throw DimensionError("SolverParams: delta must be >= 0");
    if (inner_iters < 1 || max_outer < 1 || max_sweeps < 1)
      throw DimensionError("SolverParams: iteration counts must be positive");
  }
};

}  // namespace ldict
