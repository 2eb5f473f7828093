#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "ldict/encoder.hpp"
#include "ldict/projections.hpp"
#include "ldict/types.hpp"

namespace ldict {

struct StationarityReport {
  double residual = 0.0;
  std::vector<double> per_atom;
  std::vector<std::pair<double, double>> per_sample_separator_residuals;
  bool usable = true;
};

/// Membership residuals for the optimal-separator set: r1 checks the margin
/// identity <lambda,x> - eps*||lambda|| = cost^{1/p}, r2 checks
/// 1 = delta*||lambda|| + support(D^T lambda). Both vanish iff lambda is an
/// optimal separator.
inline std::pair<double, double> separator_residuals(
    const Matrix& D, const Vector& x, double eps, double delta,
    const CostModel& cm, const Vector& lambda, double cost) {
  const double p = cm.p();
  const double r1 =
      std::abs(separator_margin(lambda, x, eps) - std::pow(cost, 1.0 / p));
  const double r2 = std::abs(1.0 - delta * lambda.norm() -
                             support_function(cm, D.transpose() * lambda));
  return {r1, r2};
}

namespace detail {

// column-wise argmax of trace(D M^T) over the feasible dictionary set
inline Vector best_atom(const Vector& m, const Vector& prev, FeasibleSet set) {
  Vector v = set == FeasibleSet::NonnegUnitColumns ? Vector(m.cwiseMax(0.0)) : m;
  const double nrm = v.norm();
  if (nrm <= 1e-14) return prev;  // unused atom, anything is optimal
  return v / nrm;
}

}  // namespace detail

/// Stationarity report from an existing encoding sweep at D.
inline StationarityReport stationarity_from_encodings(
    const Dictionary& dict, const std::vector<Vector>& xs,
    const std::vector<double>& eps_list, const std::vector<Encoding>& encs,
    const CostModel& cm, double delta, double tol) {
  const std::size_t T = xs.size();
  StationarityReport rep;
  Matrix M = Matrix::Zero(dict.n(), dict.K());
  for (std::size_t t = 0; t < T; ++t) {
    const Encoding& e = encs[t];
    if (e.cost <= 0.0) {
      rep.per_sample_separator_residuals.emplace_back(0.0, 0.0);
      continue;
    }
    const auto [r1, r2] = separator_residuals(dict.D, xs[t], eps_list[t], delta,
                                              cm, e.lambda, e.cost);
    rep.per_sample_separator_residuals.emplace_back(r1, r2);
    if (std::max(r1, r2) / (1.0 + e.cost) > 10.0 * tol) rep.usable = false;
    // cost * lambda is the saddle-scale separator, the envelope gradient of
    // the per-sample cost with respect to D h
    M.noalias() +=
        e.cost * e.lambda * e.h.transpose() / static_cast<double>(T);
  }
  rep.per_atom.resize(static_cast<std::size_t>(dict.K()));
  double worst = 0.0;
  for (Index i = 0; i < dict.K(); ++i) {
    const Vector dstar =
        detail::best_atom(M.col(i), dict.D.col(i), dict.feasible_set);
    const double r = M.col(i).norm() <= 1e-14
                         ? 0.0
                         : (dict.D.col(i) - dstar).norm();
    rep.per_atom[static_cast<std::size_t>(i)] = r;
    worst = std::max(worst, r);
  }
  rep.residual = worst;
  return rep;
}

/// Encodes every sample at D and measures how far each atom is from the
/// argmax of the first-order condition.
inline StationarityReport stationarity_residual(const Dictionary& dict,
                                                const Dataset& data,
                                                const CostModel& cm,
                                                const ThresholdModel& tm,
                                                const SolverParams& params) {
  std::vector<Vector> xs;
  std::vector<double> eps_list;
  std::vector<Encoding> encs;
  for (Index t = 0; t < data.size(); ++t) {
    const Sample& s = data.samples[static_cast<std::size_t>(t)];
    const double eps = effective_threshold(tm, s.x, t);
    xs.push_back(s.x);
    eps_list.push_back(eps);
    encs.push_back(encode(s.x, dict.D, cm, eps, params));
  }
  return stationarity_from_encodings(dict, xs, eps_list, encs, cm, params.delta,
                                     params.tol);
}

/// Fixed-point residual of the stationarity characterization for delta > 0
/// and unit-column dictionaries: max over atoms of ||d(i) - rhs(i)||.
inline double fixed_point_residual(const Dictionary& dict, const Dataset& data,
                                   const CostModel& cm,
                                   const ThresholdModel& tm,
                                   const SolverParams& params) {
  if (params.delta <= 0.0)
    throw DimensionError("fixed_point_residual: requires delta > 0");
  if (dict.feasible_set != FeasibleSet::UnitColumns)
    throw DimensionError("fixed_point_residual: unit-column dictionaries only");
  const double p = cm.p();
  const Index K = dict.K();
  const double T = static_cast<double>(data.size());
  Matrix rhs = Matrix::Zero(dict.n(), K);
  std::vector<bool> active(static_cast<std::size_t>(K), false);
  bool any = false;
  for (Index t = 0; t < data.size(); ++t) {
    const Sample& s = data.samples[static_cast<std::size_t>(t)];
    const double eps = effective_threshold(tm, s.x, t);
    const Encoding e = encode(s.x, dict.D, cm, eps, params);
    if (e.f.isZero(0.0)) continue;
    any = true;
    const Vector resid = s.x - dict.D * e.f;
    // the optimal separator lies along the residual; its scale is fixed by
    // the membership normalization 1 = delta ||lambda|| + support(D^T lambda)
    const double den = params.delta * resid.norm() +
                       support_function(cm, dict.D.transpose() * resid);
    if (std::abs(den) < 1e-12)
      throw DegenerateDenominator(
          "fixed_point_residual: separator normalization ~ 0", t);
    const double w = std::pow(e.cost, 1.0 - 1.0 / p) / den / T;
    for (Index i = 0; i < K; ++i) {
      if (e.f[i] == 0.0) continue;
      active[static_cast<std::size_t>(i)] = true;
      rhs.col(i) += e.f[i] * w * resid;
    }
  }
  if (!any) return 0.0;
  double worst = 0.0;
  for (Index i = 0; i < K; ++i) {
    if (!active[static_cast<std::size_t>(i)]) continue;
    // the sample-averaged aggregate typically lands strictly inside the unit
    // ball, so the fixed-point projection acts as the argmax normalization
    // of the first-order condition it restates
    const double nn = rhs.col(i).norm();
    if (nn <= 1e-14) continue;
    worst = std::max(worst, (dict.D.col(i) - rhs.col(i) / nn).norm());
  }
  return worst;
}

}  // namespace ldict
