#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ldict/types.hpp"

namespace ldict {

inline Vector project_l2_ball(const Vector& v, double radius) {
  const double nrm = v.norm();
  if (nrm <= radius) return v;
  return v * (radius / nrm);
}

/// Euclidean projection onto { u : ||u||_1 <= radius } by the exact
/// sort-and-threshold method, O(K log K).
inline Vector project_l1_ball(const Vector& v, double radius) {
  if (v.lpNorm<1>() <= radius) return v;
  const Index K = v.size();
  std::vector<double> u(static_cast<std::size_t>(K));
  for (Index i = 0; i < K; ++i) u[static_cast<std::size_t>(i)] = std::abs(v[i]);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0;
  double theta = 0.0;
  for (Index j = 0; j < K; ++j) {
    cum += u[static_cast<std::size_t>(j)];
    const double cand = (cum - radius) / static_cast<double>(j + 1);
    if (j + 1 == K || u[static_cast<std::size_t>(j + 1)] <= cand) {
      theta = cand;
      break;
    }
  }
  Vector out(K);
  for (Index i = 0; i < K; ++i) {
    const double mag = std::abs(v[i]) - theta;
    out[i] = mag > 0.0 ? (v[i] > 0.0 ? mag : -mag) : 0.0;
  }
  return out;
}

/// Projection onto the cost sublevel set V_c.
inline Vector project_cost_sublevel(const CostModel& cm, const Vector& h) {
  if (h.size() != cm.K)
    throw DimensionError("project_cost_sublevel: length mismatch");
  switch (cm.kind) {
    case CostKind::L1:
      return project_l1_ball(h, 1.0);
    case CostKind::L2:
    case CostKind::SquaredL2:
      return project_l2_ball(h, 1.0);
  }
  throw std::logic_error("project_cost_sublevel: bad kind");
}

inline Vector project_column(const Vector& d, FeasibleSet set) {
  if (set == FeasibleSet::NonnegUnitColumns) {
    // clamp-then-normalize is the exact projection onto the intersection
    Vector c = d.cwiseMax(0.0);
    return project_l2_ball(c, 1.0);
  }
  return project_l2_ball(d, 1.0);
}

inline Matrix project_dictionary(const Matrix& D, FeasibleSet set) {
  Matrix out(D.rows(), D.cols());
  for (Index i = 0; i < D.cols(); ++i)
    out.col(i) = project_column(D.col(i), set);
  return out;
}

/// Support function of V_c: max_{h in V_c} <v, h>.
inline double support_function(const CostModel& cm, const Vector& v) {
  if (v.size() != cm.K)
    throw DimensionError("support_function: length mismatch");
  switch (cm.kind) {
    case CostKind::L1:
      return v.lpNorm<Eigen::Infinity>();
    case CostKind::L2:
    case CostKind::SquaredL2:
      return v.norm();
  }
  throw std::logic_error("support_function: bad kind");
}

}  // namespace ldict
