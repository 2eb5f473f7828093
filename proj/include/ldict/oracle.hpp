#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "ldict/types.hpp"

// Desk-scale reference solvers. Deliberately built from different algorithmic
// families than the saddle-point solvers (primal subgradient descent, closed
// forms, scalar golden-section search) so that agreement between the two is
// evidence rather than tautology. Shares no solver code with the encoder.

namespace ldict::oracle {

struct OracleInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double golden_max(const std::function<double(double)>& fn, double lo,
                         double hi, double tol = 1e-12, int iters = 200) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = fn(c), fd = fn(d);
  for (int k = 0; k < iters && (b - a) > tol * (1.0 + std::abs(a)); ++k) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = fn(d);
    }
  }
  return 0.5 * (a + b);
}

// Feasibility slack of the constraint ||x - Df|| <= eps + delta*||f||_1.
inline double violation(const Vector& x, const Matrix& D, const Vector& f,
                        double eps, double delta) {
  return (x - D * f).norm() - eps - delta * f.lpNorm<1>();
}

// Shrinks a feasible code along its own ray to the boundary: bisection on the
// scaling for the smallest c with c*h feasible.
inline Vector ray_polish(const Vector& x, const Matrix& D, const Vector& f,
                         double eps, double delta) {
  const double n1 = f.lpNorm<1>();
  if (n1 == 0.0) return f;
  double hi = 1.0, lo = 0.0;
  if (violation(x, D, Vector(lo * f), eps, delta) <= 0.0) return Vector::Zero(f.size());
  for (int k = 0; k < 80; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (violation(x, D, Vector(mid * f), eps, delta) <= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return hi * f;
}

}  // namespace detail

/// Exact solution of the scalar instance: minimize |f| subject to
/// |x - d f| <= eps + delta |f|.
inline std::pair<double, Vector> oracle_encode_1d(double x, double d,
                                                  double eps, double delta) {
  const double ax = std::abs(x);
  Vector f(1);
  if (ax <= eps) {
    f[0] = 0.0;
    return {0.0, f};
  }
  const double denom = std::abs(d) + delta;
  if (denom <= 0.0)
    throw OracleInfeasible("oracle_encode_1d: zero atom with delta = 0");
  const double c = (ax - eps) / denom;
  f[0] = (x * d >= 0.0 ? c : -c);
  return {c, f};
}

/// Soft-threshold solution for D = I, delta = 0: the threshold is found by
/// bisection on the residual norm.
inline std::pair<double, Vector> oracle_encode_identity(const Vector& x,
                                                        double eps) {
  if (x.norm() <= eps) return {0.0, Vector::Zero(x.size())};
  auto soft = [&](double theta) {
    Vector f(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      const double mag = std::abs(x[i]) - theta;
      f[i] = mag > 0.0 ? (x[i] > 0.0 ? mag : -mag) : 0.0;
    }
    return f;
  };
  double lo = 0.0, hi = x.lpNorm<Eigen::Infinity>();
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if ((x - soft(mid)).norm() <= eps)
      lo = mid;
    else
      hi = mid;
  }
  const Vector f = soft(lo);
  return {f.lpNorm<1>(), f};
}

/// Primal reference for the L1, p = 1 encoding problem at desk scale:
/// projected subgradient descent with diminishing steps, multi-restart, best
/// feasible point kept and polished along its ray.
inline std::pair<double, Vector> oracle_encode(const Vector& x, const Matrix& D,
                                               const CostModel& cm, double eps,
                                               double delta,
                                               int iters = 1000000,
                                               int restarts = 8,
                                               std::uint64_t seed = 12345) {
  if (cm.kind != CostKind::L1)
    throw DimensionError("oracle_encode: only the L1 cost is covered");
  if (x.norm() <= eps) return {0.0, Vector::Zero(cm.K)};
  if (x.size() == 1 && cm.K == 1)
    return oracle_encode_1d(x[0], D(0, 0), eps, delta);
  if (delta == 0.0 && D.rows() == D.cols() &&
      D.isApprox(Matrix::Identity(D.rows(), D.cols()), 1e-14))
    return oracle_encode_identity(x, eps);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = x.norm();
  double best_cost = std::numeric_limits<double>::infinity();
  Vector best_f;
  Vector f(cm.K), grad(cm.K), resid(x.size());
  const double feas_slack = 1e-10 * (1.0 + scale);

  for (int r = 0; r < restarts; ++r) {
    for (Index i = 0; i < cm.K; ++i) f[i] = 0.3 * scale * gauss(rng);
    if (r == 0) f.setZero();
    double run_best = std::numeric_limits<double>::infinity();
    Vector run_f;
    // continuation over shrinking step scales: each warm-started phase
    // tightens the neighborhood the diminishing-step iteration settles in
    constexpr int kPhases = 6;
    const int per_phase = std::max(1, iters / kPhases);
    for (int ph = 0; ph < kPhases; ++ph) {
      const double a = 0.5 * scale * std::pow(3.0, -ph);
      for (int k = 1; k <= per_phase; ++k) {
        resid.noalias() = x - D * f;
        const double rn = resid.norm();
        const double g = rn - eps - delta * f.lpNorm<1>();
        const double step = a / std::sqrt(static_cast<double>(k));
        if (g > feas_slack) {
          // constraint subgradient step
          grad.noalias() = (-1.0 / rn) * (D.transpose() * resid);
          for (Index i = 0; i < cm.K; ++i)
            grad[i] -= delta * (f[i] > 0.0 ? 1.0 : (f[i] < 0.0 ? -1.0 : 0.0));
          f -= step * grad;
        } else {
          const double n1 = f.lpNorm<1>();
          if (n1 < run_best) {
            run_best = n1;
            run_f = f;
          }
          for (Index i = 0; i < cm.K; ++i)
            f[i] -= step * (f[i] > 0.0 ? 1.0 : (f[i] < 0.0 ? -1.0 : 0.0));
        }
      }
    }
    if (std::isfinite(run_best)) {
      const Vector polished = detail::ray_polish(x, D, run_f, eps, delta);
      const double c = polished.lpNorm<1>();
      if (c < best_cost) {
        best_cost = c;
        best_f = polished;
      }
    }
  }
  if (!std::isfinite(best_cost)) {
    if (delta == 0.0)
      throw OracleInfeasible("oracle_encode: no feasible point found");
    // f = 0 scaled certificate always exists when delta > 0
    best_cost = (x.norm() - eps) / delta;
    best_f = Vector::Zero(cm.K);
  }
  return {best_cost, best_f};
}

/// Fits the leading constant of the dual surrogate from the 1-D instance:
/// solves max_l r*(l*s)^q - l = s^p for r, independently for s in {0.5, 1, 2},
/// and cross-checks the three fits.
inline double calibrate_r(double p) {
  if (p <= 0.0) throw DimensionError("calibrate_r: p must be positive");
  const double q = p / (1.0 + p);
  auto sup_value = [&](double rhat, double s) {
    auto fn = [&](double l) { return rhat * std::pow(l * s, q) - l; };
    double hi = 1.0;
    while (fn(hi * 2.0) > fn(hi)) hi *= 2.0;
    const double lstar = detail::golden_max(fn, 0.0, 2.0 * hi, 1e-14, 300);
    return fn(lstar);
  };
  std::vector<double> fits;
  for (double s : {0.5, 1.0, 2.0}) {
    const double target = std::pow(s, p);
    double lo = 1e-3, hi = 32.0;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (sup_value(mid, s) < target)
        lo = mid;
      else
        hi = mid;
    }
    fits.push_back(0.5 * (lo + hi));
  }
  for (double v : fits)
    if (std::abs(v - fits[0]) > 1e-6 * (1.0 + std::abs(fits[0])))
      throw CalibrationFailed("calibrate_r: s-values disagree");
  return (fits[0] + fits[1] + fits[2]) / 3.0;
}

namespace detail {

// sup over the magnitude of a separator along unit direction u, closed form.
inline double ray_sup(const Vector& u, const Vector& x, double eps,
                      const Vector& Dh, double delta, const RqConstants& rq) {
  const double su = u.dot(x) - eps;
  if (su <= 0.0) return -std::numeric_limits<double>::infinity();
  const double bu = delta + u.dot(Dh);
  if (bu <= 0.0) return std::numeric_limits<double>::infinity();
  const double mstar =
      std::pow(rq.r * rq.q * std::pow(su, rq.q) / bu, 1.0 / (1.0 - rq.q));
  return bu * mstar * (1.0 - rq.q) / rq.q;
}

}  // namespace detail

/// Outside check of the dictionary-update value: per-sample sup over the
/// separator solved by direction search (grid + golden section) with the
/// magnitude in closed form. n <= 3 only.
inline double oracle_dictionary_value(const std::vector<Vector>& xs,
                                      const std::vector<double>& eps_list,
                                      const std::vector<Vector>& h_list,
                                      double delta, const Matrix& D,
                                      const RqConstants& rq) {
  const auto T = xs.size();
  if (T == 0 || eps_list.size() != T || h_list.size() != T)
    throw DimensionError("oracle_dictionary_value: list length mismatch");
  const Index n = D.rows();
  if (n > 3) throw DimensionError("oracle_dictionary_value: n <= 3 only");
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const Vector Dh = D * h_list[t];
    const Vector& x = xs[t];
    const double eps = eps_list[t];
    double best = -std::numeric_limits<double>::infinity();
    if (n == 1) {
      Vector u(1);
      for (double sgn : {1.0, -1.0}) {
        u[0] = sgn;
        best = std::max(best, detail::ray_sup(u, x, eps, Dh, delta, rq));
      }
    } else if (n == 2) {
      auto val = [&](double th) {
        Vector u(2);
        u << std::cos(th), std::sin(th);
        return detail::ray_sup(u, x, eps, Dh, delta, rq);
      };
      const double pi = std::acos(-1.0);
      for (int seg = 0; seg < 16; ++seg) {
        const double lo = seg * pi / 8.0, hi = (seg + 1) * pi / 8.0;
        const double th = detail::golden_max(val, lo, hi, 1e-13, 200);
        best = std::max(best, val(th));
      }
    } else {
      auto val = [&](double th, double ph) {
        Vector u(3);
        u << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
            std::cos(th);
        return detail::ray_sup(u, x, eps, Dh, delta, rq);
      };
      const double pi = std::acos(-1.0);
      double bth = 0.0, bph = 0.0;
      for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 128; ++j) {
          const double th = (i + 0.5) * pi / 64.0;
          const double ph = j * 2.0 * pi / 128.0;
          const double v = val(th, ph);
          if (v > best) {
            best = v;
            bth = th;
            bph = ph;
          }
        }
      // coordinate-wise golden refinement around the grid winner
      for (int round = 0; round < 40; ++round) {
        bth = detail::golden_max([&](double t2) { return val(t2, bph); },
                                 bth - 0.1, bth + 0.1, 1e-14, 120);
        bph = detail::golden_max([&](double p2) { return val(bth, p2); },
                                 bph - 0.1, bph + 0.1, 1e-14, 120);
      }
      best = std::max(best, val(bth, bph));
    }
    if (!std::isfinite(best)) return best;
    total += best;
  }
  return total / static_cast<double>(T);
}

}  // namespace ldict::oracle
