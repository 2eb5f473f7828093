#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "ldict/projections.hpp"
#include "ldict/types.hpp"

namespace ldict {

/// Iterate of the inner descent-ascent loop.
struct InnerState {
  Vector lambda;
  Vector h;
  Index iterations = 0;
  double gap_estimate = std::numeric_limits<double>::infinity();
};

struct InnerEval {
  double value = 0.0;
  Vector grad_lambda;
};

inline double separator_margin(const Vector& lambda, const Vector& x,
                               double eps) {
  return lambda.dot(x) - eps * lambda.norm();
}

/// Value and lambda-gradient of the concave inner objective
///   r * s^q - delta * ||lambda|| - <lambda, Dh>,  s = <lambda, x> - eps * ||lambda||.
inline InnerEval inner_objective_and_grad(const Vector& lambda,
                                          const Vector& Dh, const Vector& x,
                                          double eps, double delta,
                                          const RqConstants& rq) {
  const double lam_norm = lambda.norm();
  if (lam_norm == 0.0)
    throw ZeroSeparator("inner_objective_and_grad: lambda = 0");
  const double s = lambda.dot(x) - eps * lam_norm;
  if (s <= 0.0)
    throw InfeasibleSeparator(
        "inner_objective_and_grad: <lambda,x> - eps*||lambda|| <= 0");
  InnerEval out;
  out.value = rq.r * std::pow(s, rq.q) - delta * lam_norm - lambda.dot(Dh);
  const double coeff = rq.r * rq.q * std::pow(s, rq.q - 1.0);
  out.grad_lambda = coeff * (x - (eps / lam_norm) * lambda) -
                    (delta / lam_norm) * lambda - Dh;
  return out;
}

/// Smallest scaling c >= 0 with ||x - c*u|| <= eps + delta*c, or nullopt when
/// the ray {c*u : c >= 0} contains no feasible point. Assumes ||x|| > eps.
inline std::optional<double> ray_feasible_scaling(const Vector& x,
                                                  const Vector& u, double eps,
                                                  double delta) {
  const double A = u.squaredNorm() - delta * delta;
  const double B = -2.0 * (x.dot(u) + eps * delta);
  const double C = x.squaredNorm() - eps * eps;
  if (C <= 0.0) return 0.0;
  if (std::abs(A) < 1e-300) {
    if (B >= 0.0) return std::nullopt;
    return -C / B;
  }
  const double disc = B * B - 4.0 * A * C;
  if (A > 0.0) {
    if (disc < 0.0 || B >= 0.0) return std::nullopt;
    // numerically stable smaller root; both roots positive here
    const double t = -B + std::sqrt(disc);
    return 2.0 * C / t;
  }
  // A < 0: parabola opens down, feasible beyond the positive root
  const double t = -B + std::sqrt(disc);
  const double r1 = t / (2.0 * A);
  const double r2 = 2.0 * C / t;
  const double root = std::max(r1, r2);
  if (root < 0.0) return 0.0;
  return root;
}

/// Lower bound on the encoding cost from a strictly feasible separator:
/// the inner objective minimized over h in V_c.
inline double dual_lower_bound(const Vector& lambda, const Vector& x,
                               double eps, double delta, const Matrix& D,
                               const CostModel& cm, const RqConstants& rq) {
  const double lam_norm = lambda.norm();
  const double s = lambda.dot(x) - eps * lam_norm;
  if (s <= 0.0) return -std::numeric_limits<double>::infinity();
  return rq.r * std::pow(s, rq.q) - delta * lam_norm -
         support_function(cm, D.transpose() * lambda);
}

inline double spectral_norm_estimate(const Matrix& D, int iters = 10) {
  if (D.size() == 0) return 0.0;
  Vector v = Vector::Ones(D.cols());
  v /= v.norm();
  double sq = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vector w = D.transpose() * (D * v);
    sq = w.norm();
    if (sq <= 0.0) return 0.0;
    v = w / sq;
  }
  return std::sqrt(sq);
}

/// Gap between the primal certificate at state.h and the dual bound at
/// state.lambda; zero (up to precision) exactly at a saddle point.
inline double saddle_gap(const InnerState& state, const Vector& x,
                         const Matrix& D, const CostModel& cm, double eps,
                         double delta, const RqConstants& rq) {
  if (x.norm() <= eps) return 0.0;
  const auto chat = ray_feasible_scaling(x, D * state.h, eps, delta);
  if (!chat) return std::numeric_limits<double>::infinity();
  const double upper = std::pow(*chat, rq.p);
  const double lower = dual_lower_bound(state.lambda, x, eps, delta, D, cm, rq);
  return std::max(0.0, upper - lower);
}

namespace detail {

// One backtracked ascent step; halves the step while the strict-feasibility
// margin would be lost (at most 30 times).
inline bool ascent_step(Vector& lambda, const Vector& grad, const Vector& x,
                        double eps, double alpha) {
  double step = alpha;
  for (int k = 0; k < 30; ++k) {
    Vector cand = lambda + step * grad;
    if (separator_margin(cand, x, eps) > 0.0 && cand.norm() > 0.0) {
      lambda = std::move(cand);
      return true;
    }
    step *= 0.5;
  }
  return false;
}

// Monotone ascent with an adaptive step: grows after an unbacktracked
// success, halves otherwise. Keeps the iterate strictly feasible.
inline bool adaptive_ascent_step(Vector& lambda, const Vector& Dh,
                                 const Vector& x, double eps, double delta,
                                 const RqConstants& rq, double& step) {
  const InnerEval ev = inner_objective_and_grad(lambda, Dh, x, eps, delta, rq);
  double stp = step;
  for (int bt = 0; bt < 40; ++bt) {
    Vector cand = lambda + stp * ev.grad_lambda;
    if (separator_margin(cand, x, eps) > 0.0 && cand.norm() > 0.0) {
      const double cval =
          inner_objective_and_grad(cand, Dh, x, eps, delta, rq).value;
      if (cval >= ev.value - 1e-15 * (1.0 + std::abs(ev.value))) {
        lambda = std::move(cand);
        step = bt == 0 ? stp * 1.5 : stp;
        return true;
      }
    }
    stp *= 0.5;
  }
  return false;
}

}  // namespace detail

/// Solves the encoding problem through its min-max form by projected
/// gradient descent-ascent. Trivial samples (||x|| <= eps) return the zero
/// code immediately.
inline Encoding encode(const Vector& x, const Matrix& D, const CostModel& cm,
                       double eps, const SolverParams& params) {
  params.validate();
  if (D.rows() != x.size() || D.cols() != cm.K)
    throw DimensionError("encode: dimension mismatch");
  const double nx = x.norm();
  Encoding enc;
  enc.f = Vector::Zero(cm.K);
  enc.h = Vector::Zero(cm.K);
  enc.lambda = Vector::Zero(x.size());
  if (nx <= eps) {
    enc.feas_residual = nx - eps;
    return enc;
  }

  const RqConstants rq = rq_constants(cm.p(), params.r_mode);
  const double delta = params.delta;
  const double inf = std::numeric_limits<double>::infinity();

  Vector lambda = (x / nx) * std::max(nx - eps, params.tol);
  Vector dtx = D.transpose() * x;
  const double dual_norm = support_function(cm, dtx);
  Vector h = project_cost_sublevel(cm, dtx / std::max(dual_norm, 1.0));
  Vector Dh = D * h;

  const double alpha = params.alpha / (nx * nx);
  const double sigma = spectral_norm_estimate(D);
  const double beta = params.beta / std::max(sigma * sigma, 1e-12);

  double best_upper = inf;
  double best_chat = 0.0;
  Vector best_h = h;
  if (delta > 0.0) {
    // f = 0 is always feasible when delta > 0
    best_chat = (nx - eps) / delta;
    best_upper = std::pow(best_chat, rq.p);
    best_h = Vector::Zero(cm.K);
  }
  double best_lower = -inf;
  double gap = inf;
  int iter = 0;
  bool converged = false;
  double step_lam = alpha;
  bool polish_improved = false;

  const auto try_ray = [&](const Vector& hc) {
    if (const auto chat = ray_feasible_scaling(x, D * hc, eps, delta)) {
      const double upper = std::pow(*chat, rq.p);
      if (upper < best_upper) {
        best_upper = upper;
        best_chat = *chat;
        best_h = hc;
        polish_improved = true;
      }
    }
  };
  const auto consider = [&](const Vector& f_cand) {
    const double cf = evaluate_cost(cm, f_cand);
    if (cf <= 0.0) return;
    try_ray(Vector(f_cand / std::pow(cf, 1.0 / cm.p())));
  };
  // exact minimizer of the L1 cost over a fixed support and sign pattern:
  // stationarity forces the span component of the residual along
  // w0 = Da (Daᵀ Da)⁻¹ σ, leaving a scalar quadratic for its magnitude
  const auto try_support = [&](const std::vector<Index>& act,
                               const Vector& sg) {
    const Index s = static_cast<Index>(act.size());
    if (s == 0 || s > x.size()) return;
    Matrix Da(x.size(), s);
    for (Index j = 0; j < s; ++j) Da.col(j) = D.col(act[static_cast<std::size_t>(j)]);
    const Matrix G = Da.transpose() * Da;
    const auto ldlt = G.ldlt();
    if (ldlt.info() != Eigen::Success) return;
    const Vector g0 = ldlt.solve(sg);
    if ((G * g0 - sg).norm() > 1e-8 * (1.0 + sg.norm())) return;  // singular
    const Vector f0 = ldlt.solve(Da.transpose() * x);
    const double b = sg.dot(g0);  // equals ||Da g0||^2
    if (b <= 0.0) return;
    const double a = sg.dot(f0);
    const double xp2 = (x - Da * f0).squaredNorm();
    // || x_perp + c Da g0 ||^2 = (eps + delta (a - b c))^2, c >= 0
    const double rhs0 = eps + delta * a;
    const double A2 = b - delta * delta * b * b;
    const double B2 = 2.0 * delta * b * rhs0;
    const double C2 = xp2 - rhs0 * rhs0;
    double roots[2];
    int nroots = 0;
    if (std::abs(A2) < 1e-300) {
      if (std::abs(B2) > 0.0) roots[nroots++] = -C2 / B2;
    } else {
      const double disc = B2 * B2 - 4.0 * A2 * C2;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        roots[nroots++] = (-B2 - sq) / (2.0 * A2);
        roots[nroots++] = (-B2 + sq) / (2.0 * A2);
      }
    }
    for (int r0 = 0; r0 < nroots; ++r0) {
      const double c = roots[r0];
      if (!(c >= 0.0)) continue;
      Vector f_cand = Vector::Zero(cm.K);
      for (Index j = 0; j < s; ++j)
        f_cand[act[static_cast<std::size_t>(j)]] = f0[j] - c * g0[j];
      consider(f_cand);
    }
  };
  // exact minimizer for the rotation-invariant costs: the optimal code lies
  // on the Tikhonov path f(mu) = (DᵀD + mu I)⁻¹ Dᵀx, located by bisection
  // on the feasibility slack
  bool l2_exact_done = false;
  const auto try_l2_exact = [&]() {
    if (cm.kind == CostKind::L1 || l2_exact_done) return;
    l2_exact_done = true;
    Eigen::JacobiSVD<Matrix> svd(D, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector sv = svd.singularValues();
    const Vector utx = svd.matrixU().transpose() * x;
    const auto f_of = [&](double mu) {
      Vector z(sv.size());
      for (Index i = 0; i < sv.size(); ++i) {
        const double den = sv[i] * sv[i] + mu;
        z[i] = den > 0.0 ? sv[i] * utx[i] / den : 0.0;
      }
      return Vector(svd.matrixV() * z);
    };
    const auto slack = [&](double mu) {
      const Vector f = f_of(mu);
      const double cf = evaluate_cost(cm, f);
      return (x - D * f).norm() - eps - delta * std::pow(cf, 1.0 / cm.p());
    };
    if (slack(0.0) > 0.0) return;  // x unreachable along this path
    double lo = 0.0, hi = 1.0;
    int grow = 0;
    while (slack(hi) < 0.0 && grow++ < 200) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (slack(mid) < 0.0 ? lo : hi) = mid;
    }
    consider(f_of(lo));
  };
  // candidate codes rebuilt from the atoms most aligned with a separator
  // direction; only the ranking of the alignments has to be right for one of
  // the support prefixes to contain the true active set, on which
  // try_support lands exactly — closing the gap in finitely many steps where
  // plain descent-ascent merely oscillates around the saddle
  const auto try_direction = [&](const Vector& lhat) {
    const Vector g = D.transpose() * lhat;
    if (cm.kind != CostKind::L1) {
      if (g.norm() > 0.0) consider(Vector(g / g.norm()));
      try_l2_exact();
      return;
    }
    std::vector<Index> order(static_cast<std::size_t>(cm.K));
    for (Index i = 0; i < cm.K; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Index i, Index j) {
      return std::abs(g[i]) > std::abs(g[j]);
    });
    const std::size_t max_s =
        static_cast<std::size_t>(std::min<Index>(x.size(), cm.K));
    std::vector<Index> act;
    for (std::size_t k = 0; k < max_s; ++k) {
      act.push_back(order[k]);
      Vector sg(static_cast<Index>(act.size()));
      for (std::size_t j = 0; j < act.size(); ++j)
        sg[static_cast<Index>(j)] = g[act[j]] >= 0.0 ? 1.0 : -1.0;
      try_support(act, sg);
    }
  };
  // refine from the primal side: the residual of the best code points along
  // the optimal separator, so re-deriving the active set from it converges
  // in a few rounds even when the dual iterate is still inaccurate
  const auto residual_rounds = [&]() {
    for (int round = 0; round < 8; ++round) {
      const Vector resid = x - best_chat * (D * best_h);
      const double rn = resid.norm();
      if (rn <= 0.0) break;
      polish_improved = false;
      try_direction(Vector(resid / rn));
      if (!polish_improved) break;
    }
  };
  // dual value maximized in closed form along a fixed direction; equals the
  // encoding cost exactly at the optimal separator direction
  const auto dual_ray_bound = [&](const Vector& u) {
    const double su = u.dot(x) - eps;
    if (su <= 0.0) return -inf;
    const double b = delta + support_function(cm, D.transpose() * u);
    if (b <= 0.0) return -inf;
    const double mstar =
        std::pow(rq.r * rq.q * std::pow(su, rq.q) / b, 1.0 / (1.0 - rq.q));
    return b * mstar * (1.0 - rq.q) / rq.q;
  };
  // polish the separator against the best code direction: closed-form
  // magnitude along the current ray, then plain ascent steps
  const auto polish_lambda = [&](const Vector& Dhb) {
    for (int k = 0; k < 500; ++k) {
      const double ln = lambda.norm();
      if (ln == 0.0) break;
      const Vector u = lambda / ln;
      const double su = u.dot(x) - eps;
      const double bu = delta + u.dot(Dhb);
      if (su > 0.0 && bu > 0.0)
        lambda = std::pow(rq.r * rq.q * std::pow(su, rq.q) / bu,
                          1.0 / (1.0 - rq.q)) *
                 u;
      const InnerEval ev =
          inner_objective_and_grad(lambda, Dhb, x, eps, delta, rq);
      if (ev.grad_lambda.norm() <= 1e-13 * (1.0 + lambda.norm())) break;
      if (!detail::adaptive_ascent_step(lambda, Dhb, x, eps, delta, rq,
                                        step_lam))
        break;
    }
  };

  // primal refinement for the order-1 costs: splitting iterations on
  // min c(f) s.t. ||x - Df|| <= R produce a high-quality feasible code whose
  // support then goes through the exact finishing steps; the threshold R is
  // re-tightened from the certified cost when delta > 0. All candidates pass
  // through consider(), so optimality is still certified by the exact ray
  // scaling and the dual bounds, never assumed
  bool primal_refined = false;
  const auto primal_refine = [&]() {
    if (rq.p != 1.0) return;  // the order-2 cost has its exact path solve
    if (primal_refined) return;
    primal_refined = true;
    const Matrix A =
        Matrix::Identity(cm.K, cm.K) + D.transpose() * D;
    const auto fact = A.ldlt();
    const int rounds = delta > 0.0 ? 3 : 1;
    for (int round = 0; round < rounds; ++round) {
      const double R =
          eps + (std::isfinite(best_upper) ? delta * best_chat : 0.0);
      Vector f = Vector::Zero(cm.K), g = Vector::Zero(cm.K);
      Vector z = x, ug = Vector::Zero(cm.K), uz = Vector::Zero(x.size());
      double rho = 1.0;
      for (int it = 0; it < 2000; ++it) {
        f = fact.solve(g - ug + D.transpose() * (z - uz));
        const Vector w = f + ug;
        const Vector g_old = g;
        if (cm.kind == CostKind::L1) {
          const double kap = 1.0 / rho;
          for (Index i = 0; i < cm.K; ++i)
            g[i] = w[i] > kap ? w[i] - kap : (w[i] < -kap ? w[i] + kap : 0.0);
        } else {
          const double wn = w.norm();
          g = wn > 1.0 / rho ? Vector((1.0 - 1.0 / (rho * wn)) * w)
                             : Vector(Vector::Zero(cm.K));
        }
        const Vector df = D * f;
        const Vector y = df + uz;
        const Vector dev = y - x;
        const double dn = dev.norm();
        const Vector z_old = z;
        z = dn > R ? Vector(x + dev * (R / dn)) : y;
        ug += f - g;
        uz += df - z;
        const double pres = std::sqrt((f - g).squaredNorm() +
                                      (df - z).squaredNorm());
        const double dres =
            rho * std::sqrt((g - g_old).squaredNorm() +
                            (z - z_old).squaredNorm());
        if (pres <= 1e-11 * (1.0 + nx) && dres <= 1e-11 * (1.0 + nx)) break;
        if (it % 25 == 24) {
          if (pres > 10.0 * dres) {
            rho *= 2.0;
            ug *= 0.5;
            uz *= 0.5;
          } else if (dres > 10.0 * pres) {
            rho *= 0.5;
            ug *= 2.0;
            uz *= 2.0;
          }
        }
      }
      consider(g);
      if (cm.kind == CostKind::L1) {
        const double gmax = g.cwiseAbs().maxCoeff();
        if (gmax > 0.0) {
          std::vector<Index> act;
          for (Index i = 0; i < cm.K; ++i)
            if (std::abs(g[i]) > 1e-7 * gmax) act.push_back(i);
          if (!act.empty() && static_cast<Index>(act.size()) <= x.size()) {
            Vector sg(static_cast<Index>(act.size()));
            for (std::size_t j = 0; j < act.size(); ++j)
              sg[static_cast<Index>(j)] = g[act[j]] >= 0.0 ? 1.0 : -1.0;
            try_support(act, sg);
          }
        }
      }
      residual_rounds();
      if (delta == 0.0) break;
    }
  };

  primal_refine();
  if (std::isfinite(best_upper)) {
    const Vector resid = x - best_chat * (D * best_h);
    const double rn = resid.norm();
    if (rn > 0.0)
      best_lower = std::max(best_lower, dual_ray_bound(Vector(resid / rn)));
    gap = best_upper - best_lower;
    if (gap <= params.tol * (1.0 + std::abs(best_upper))) converged = true;
  }

  // windowed averages of the oscillating iterates converge to the saddle
  // point; certificates built from them close the gap where the raw
  // iterates cannot
  Vector h_acc = Vector::Zero(cm.K);
  Vector lam_acc = Vector::Zero(x.size());
  int acc = 0;
  constexpr int kWindow = 64;

  for (; !converged && iter < params.max_outer; ++iter) {
    const double ln0 = lambda.norm();
    for (int m = 0; m < params.inner_iters; ++m)
      detail::adaptive_ascent_step(lambda, Dh, x, eps, delta, rq, step_lam);

    // magnitude control: snap to the closed-form optimum along the current
    // ray, or cap the growth while the sup is unbounded for this h
    const double ln = lambda.norm();
    if (ln > 0.0) {
      const Vector u = lambda / ln;
      const double su = u.dot(x) - eps;
      const double bu = delta + u.dot(Dh);
      if (su > 0.0 && bu > 0.0)
        lambda = std::pow(rq.r * rq.q * std::pow(su, rq.q) / bu,
                          1.0 / (1.0 - rq.q)) *
                 u;
      else if (ln > 4.0 * ln0)
        lambda *= 4.0 * ln0 / ln;
    }

    h = project_cost_sublevel(cm, h + beta * (D.transpose() * lambda));
    Dh.noalias() = D * h;

    try_ray(h);
    best_lower =
        std::max(best_lower, dual_lower_bound(lambda, x, eps, delta, D, cm, rq));

    h_acc += h;
    lam_acc += lambda;
    if (++acc == kWindow) {
      try_ray(Vector(h_acc / acc));
      const Vector lam_avg = lam_acc / acc;
      if (lam_avg.norm() > 0.0) {
        best_lower = std::max(
            best_lower, dual_lower_bound(lam_avg, x, eps, delta, D, cm, rq));
        try_direction(Vector(lam_avg / lam_avg.norm()));
      }
      if (std::isfinite(best_upper)) {
        residual_rounds();
        const Vector resid = x - best_chat * (D * best_h);
        const double rn = resid.norm();
        if (rn > 0.0)
          best_lower = std::max(best_lower, dual_ray_bound(Vector(resid / rn)));
      }
      h_acc.setZero();
      lam_acc.setZero();
      acc = 0;
    }

    gap = best_upper - best_lower;
    if (std::isfinite(best_upper) &&
        gap <= params.tol * (1.0 + std::abs(best_upper))) {
      converged = true;
      ++iter;
      break;
    }
  }

  if (!std::isfinite(best_upper)) {
    if (delta == 0.0)
      throw EncodingInfeasible(
          "encode: no feasible code found with delta = 0 (dictionary cannot "
          "reach x within eps)");
    throw EncodingInfeasible("encode: failed to locate a feasible code");
  }

  if (lambda.norm() > 0.0) try_direction(Vector(lambda / lambda.norm()));
  residual_rounds();
  polish_lambda(D * best_h);

  best_lower =
      std::max(best_lower, dual_lower_bound(lambda, x, eps, delta, D, cm, rq));
  {
    const Vector resid = x - best_chat * (D * best_h);
    const double rn = resid.norm();
    if (rn > 0.0)
      best_lower = std::max(best_lower, dual_ray_bound(Vector(resid / rn)));
  }
  gap = std::min(gap, best_upper - best_lower);
  if (std::isfinite(best_upper) &&
      gap <= params.tol * (1.0 + std::abs(best_upper)))
    converged = true;

  enc.cost = best_upper;
  enc.h = best_h;
  enc.f = best_chat * best_h;
  enc.lambda = enc.cost > 0.0 ? Vector(lambda / enc.cost) : lambda;
  enc.feas_residual = (x - D * enc.f).norm() - eps - delta * best_chat;
  enc.saddle_gap = std::max(0.0, gap);
  enc.converged = converged;
  enc.iterations = iter;
  return enc;
}

/// Value of the dual surrogate at fixed h: the concave sup over separators,
/// solved by gradient ascent with a closed-form magnitude polish along the
/// current direction. Returns +inf when the sup is unbounded.
inline double j_value(const Matrix& D, const Vector& h, const Vector& x,
                      double eps, double delta, const CostModel& cm,
                      const SolverParams& params) {
  params.validate();
  const double nx = x.norm();
  if (nx <= eps)
    throw DimensionError("j_value: requires ||x|| > eps");
  const RqConstants rq = rq_constants(cm.p(), params.r_mode);
  const double inf = std::numeric_limits<double>::infinity();
  const Vector Dh = D * h;
  const double alpha = params.alpha / (nx * nx);

  Vector lambda = (x / nx) * std::max(nx - eps, params.tol);
  double best = -inf;
  double step = alpha;
  int stalled = 0;
  for (int iter = 0; iter < params.max_outer; ++iter) {
    // closed-form magnitude along the current direction
    const Vector u = lambda / lambda.norm();
    const double su = u.dot(x) - eps;
    const double bu = delta + u.dot(Dh);
    if (su > 0.0) {
      if (bu <= 0.0) return inf;  // grows without bound along this ray
      const double mstar = std::pow(
          rq.r * rq.q * std::pow(su, rq.q) / bu, 1.0 / (1.0 - rq.q));
      lambda = mstar * u;
      const double val = bu * mstar * (1.0 - rq.q) / rq.q;
      if (val > 1e12) return inf;
      if (val > best + params.tol * (1.0 + std::abs(val))) {
        stalled = 0;
      } else if (++stalled > 50) {
        return std::max(best, val);
      }
      best = std::max(best, val);
    }
    if (!detail::adaptive_ascent_step(lambda, Dh, x, eps, delta, rq, step))
      break;
  }
  return best;
}

}  // namespace ldict
