#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "ldict/encoder.hpp"
#include "ldict/projections.hpp"
#include "ldict/types.hpp"

namespace ldict {

struct SaddleResult {
  Dictionary D;
  std::vector<Vector> lambdas;
  double value = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  Index iterations = 0;
  bool converged = false;
};

/// Optimal unit-column dictionary for fixed separators: each atom is the
/// normalized aggregate (1/T) sum_t h_t(i) lambda_t. Atoms with a zero
/// aggregate keep their previous value (any unit vector is optimal there).
inline Matrix closed_form_dictionary(const std::vector<Vector>& h_list,
                                     const std::vector<Vector>& lambda_list,
                                     const Matrix& D_prev) {
  const std::size_t T = h_list.size();
  if (T == 0 || lambda_list.size() != T)
    throw DimensionError("closed_form_dictionary: list length mismatch");
  const Index n = lambda_list[0].size();
  const Index K = h_list[0].size();
  Matrix G = Matrix::Zero(n, K);
  for (std::size_t t = 0; t < T; ++t)
    G.noalias() += lambda_list[t] * h_list[t].transpose();
  G /= static_cast<double>(T);
  Matrix D(n, K);
  for (Index i = 0; i < K; ++i) {
    const double g = G.col(i).norm();
    D.col(i) = g > 1e-14 ? Vector(G.col(i) / g) : Vector(D_prev.col(i));
  }
  return D;
}

/// One preconditioned ascent step on a separator,
///   mu = s^{1/(1+p)},  lambda += (alpha/mu) * mu * grad,
/// halving the step until the strict-feasibility margin survives.
inline Vector lambda_ascent_step(const Vector& lambda, const Vector& x,
                                 double eps, double delta, const Matrix& D,
                                 const Vector& h, double alpha,
                                 const RqConstants& rq) {
  const double s = separator_margin(lambda, x, eps);
  if (s <= 0.0)
    throw InfeasibleSeparator("lambda_ascent_step: infeasible separator");
  const double mu = std::pow(s, 1.0 / (1.0 + rq.p));
  const InnerEval ev = inner_objective_and_grad(lambda, D * h, x, eps, delta, rq);
  const Vector g = mu * ev.grad_lambda;
  double step = alpha / mu;
  for (int k = 0; k < 30; ++k) {
    Vector cand = lambda + step * g;
    if (separator_margin(cand, x, eps) > 0.0) return cand;
    step *= 0.5;
  }
  return lambda;
}

namespace detail {

struct AscentState {
  std::vector<Vector> lambdas;
  std::vector<double> contrib;  // r*s_t^q - delta*||lambda_t||, per sample
  Matrix G;                     // (1/T) sum_t lambda_t h_t^T
  double phi = 0.0;             // max-min objective with D eliminated
};

inline double sample_contrib(const Vector& lambda, const Vector& x, double eps,
                             double delta, const RqConstants& rq) {
  const double s = separator_margin(lambda, x, eps);
  return rq.r * std::pow(s, rq.q) - delta * lambda.norm();
}

}  // namespace detail

/// Solves the dictionary-update saddle problem for unit-column dictionaries:
/// closed-form dictionary given separators, monotone backtracked gradient
/// ascent on the separators.
inline SaddleResult update_dictionary(const std::vector<Vector>& xs,
                                      const std::vector<double>& eps_list,
                                      const std::vector<Vector>& h_list,
                                      double delta, const SolverParams& params,
                                      const Matrix& D_init,
                                      std::vector<Vector> lambda_init = {},
                                      double p = 1.0) {
  params.validate();
  const std::size_t T = xs.size();
  if (T == 0 || eps_list.size() != T || h_list.size() != T)
    throw DimensionError("update_dictionary: list length mismatch");
  const Index n = xs[0].size();
  const Index K = h_list[0].size();
  const RqConstants rq = rq_constants(p, params.r_mode);

  double xmax = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (xs[t].norm() <= eps_list[t])
      throw DimensionError("update_dictionary: trivial sample present");
    xmax = std::max(xmax, xs[t].norm());
  }

  detail::AscentState st;
  st.lambdas.resize(T);
  st.contrib.resize(T);
  if (!lambda_init.empty()) {
    if (lambda_init.size() != T)
      throw DimensionError("update_dictionary: lambda_init length mismatch");
    st.lambdas = std::move(lambda_init);
    for (std::size_t t = 0; t < T; ++t)
      if (separator_margin(st.lambdas[t], xs[t], eps_list[t]) <= 0.0)
        throw InfeasibleSeparator("update_dictionary: infeasible lambda_init");
  } else {
    for (std::size_t t = 0; t < T; ++t)
      st.lambdas[t] = (xs[t] / xs[t].norm()) * (xs[t].norm() - eps_list[t]);
  }

  st.G = Matrix::Zero(n, K);
  for (std::size_t t = 0; t < T; ++t) {
    st.G.noalias() += st.lambdas[t] * h_list[t].transpose();
    st.contrib[t] =
        detail::sample_contrib(st.lambdas[t], xs[t], eps_list[t], delta, rq);
  }
  st.G /= static_cast<double>(T);
  auto aggregate_norm = [](const Matrix& G) {
    double s = 0.0;
    for (Index i = 0; i < G.cols(); ++i) s += G.col(i).norm();
    return s;
  };
  double contrib_sum = 0.0;
  for (double c : st.contrib) contrib_sum += c;
  st.phi = contrib_sum / static_cast<double>(T) - aggregate_norm(st.G);

  Matrix D = closed_form_dictionary(h_list, st.lambdas, D_init);
  std::vector<double> step(T, params.alpha);
  const double res_tol = params.tol * (1.0 + xmax);
  SaddleResult out;
  out.D.feasible_set = FeasibleSet::UnitColumns;

  int sweep = 0;
  double phi_mark = st.phi;
  for (; sweep < params.max_outer; ++sweep) {
    for (std::size_t t = 0; t < T; ++t) {
      const InnerEval ev = inner_objective_and_grad(
          st.lambdas[t], D * h_list[t], xs[t], eps_list[t], delta, rq);
      bool accepted = false;
      double stp = step[t];
      for (int bt = 0; bt < 30; ++bt) {
        Vector cand = st.lambdas[t] + stp * ev.grad_lambda;
        if (separator_margin(cand, xs[t], eps_list[t]) > 0.0) {
          // incremental phi for the candidate
          const Vector dlam = (cand - st.lambdas[t]) / static_cast<double>(T);
          double dnorm = 0.0;
          for (Index i = 0; i < K; ++i) {
            const double hi = h_list[t][i];
            if (hi == 0.0) continue;
            dnorm += (st.G.col(i) + hi * dlam).norm() - st.G.col(i).norm();
          }
          const double newc =
              detail::sample_contrib(cand, xs[t], eps_list[t], delta, rq);
          const double newphi =
              st.phi + (newc - st.contrib[t]) / static_cast<double>(T) - dnorm;
          if (newphi >= st.phi - 1e-12 * (1.0 + std::abs(st.phi))) {
            for (Index i = 0; i < K; ++i) {
              const double hi = h_list[t][i];
              if (hi != 0.0) st.G.col(i) += hi * dlam;
            }
            st.lambdas[t] = std::move(cand);
            st.contrib[t] = newc;
            st.phi = newphi;
            accepted = true;
            step[t] = bt == 0 ? std::min(stp * 1.4, 1e6)
                              : std::max(stp, 1e-12);
            break;
          }
        }
        stp *= 0.5;
      }
      // a fully rejected sweep means the stored step is too large for the
      // local curvature; shrink it so later sweeps can make progress
      if (!accepted) step[t] = std::max(step[t] * 0.25, 1e-14);
    }
    D = closed_form_dictionary(h_list, st.lambdas, D);

    if (st.phi > 1e12)
      throw UnboundedProblem(
          "update_dictionary: min-sup value exceeded the ceiling (delta = 0 "
          "with arbitrary h can be unbounded)");

    double res = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const InnerEval ev = inner_objective_and_grad(
          st.lambdas[t], D * h_list[t], xs[t], eps_list[t], delta, rq);
      res = std::max(res, ev.grad_lambda.norm());
    }
    out.residual = res;
    if (res <= res_tol) {
      out.converged = true;
      ++sweep;
      break;
    }
    // hand over to the endgame once the sweeps stop making progress; the
    // tolerance-band acceptance cannot push the gradient further down
    if (sweep % 25 == 24) {
      if (st.phi - phi_mark <= 1e-13 * (1.0 + std::abs(st.phi))) {
        ++sweep;
        break;
      }
      phi_mark = st.phi;
    }
  }

  // endgame: maximize a smoothed version of the D-eliminated objective with
  // the kink regularization sqrt(||G_i||^2 + mu^2) driven to zero. The
  // sweep's tolerance-band acceptance random-walks once the gradient is
  // small, and any method built on unit dictionary columns stalls outright
  // when an aggregate G_i vanishes at the optimum: there the trace argmax is
  // the whole unit ball and the saddle column is an interior point. The
  // smoothed objective has no kink, and its maximizers converge to the
  // saddle separators as mu -> 0, so the gradients can actually vanish.
  if (!out.converged) {
    // re-anchor the incremental state to shed accumulated drift
    st.G.setZero();
    for (std::size_t t = 0; t < T; ++t) {
      st.G.noalias() += st.lambdas[t] * h_list[t].transpose();
      st.contrib[t] =
          detail::sample_contrib(st.lambdas[t], xs[t], eps_list[t], delta, rq);
    }
    st.G /= static_cast<double>(T);

    double gtop = 0.0;
    for (Index i = 0; i < K; ++i) gtop = std::max(gtop, st.G.col(i).norm());
    const double mu_final = 1e-13 * (1.0 + gtop);
    const Index N = static_cast<Index>(T) * n;
    if (N <= 256) {
      // small instances: damped Newton on the packed separators with
      // continuation on mu. The smoothed objective is concave and flat over
      // enormous separator ranges, where first-order ascent crawls; Newton
      // reaches machine-precision stationarity in a handful of steps.
      Vector z(N);
      for (std::size_t t = 0; t < T; ++t)
        z.segment(static_cast<Index>(t) * n, n) = st.lambdas[t];
      const auto phi_of = [&](const Vector& zz, double mu, bool& ok) {
        ok = true;
        double val = 0.0;
        Matrix G = Matrix::Zero(n, K);
        for (std::size_t t = 0; t < T; ++t) {
          const Vector lam = zz.segment(static_cast<Index>(t) * n, n);
          if (separator_margin(lam, xs[t], eps_list[t]) <= 0.0) {
            ok = false;
            return -std::numeric_limits<double>::infinity();
          }
          val += detail::sample_contrib(lam, xs[t], eps_list[t], delta, rq) /
                 static_cast<double>(T);
          G.noalias() += lam * h_list[t].transpose() / static_cast<double>(T);
        }
        for (Index i = 0; i < K; ++i)
          val -= std::sqrt(G.col(i).squaredNorm() + mu * mu);
        return val;
      };
      Vector g(N);
      Matrix H(N, N);
      const auto grad_hess = [&](const Vector& zz, double mu) {
        g.setZero();
        H.setZero();
        Matrix G = Matrix::Zero(n, K);
        for (std::size_t t = 0; t < T; ++t)
          G.noalias() += zz.segment(static_cast<Index>(t) * n, n) *
                         h_list[t].transpose() / static_cast<double>(T);
        const double q = rq.q, r = rq.r;
        for (std::size_t t = 0; t < T; ++t) {
          const Index off = static_cast<Index>(t) * n;
          const Vector lam = zz.segment(off, n);
          const double ln = lam.norm();
          const Vector lh = lam / ln;
          const double s = separator_margin(lam, xs[t], eps_list[t]);
          const Vector u = xs[t] - eps_list[t] * lh;
          const Matrix P =
              (Matrix::Identity(n, n) - lh * lh.transpose()) / ln;
          g.segment(off, n) = (r * q * std::pow(s, q - 1.0) * u - delta * lh) /
                              static_cast<double>(T);
          H.block(off, off, n, n) =
              (r * q * (q - 1.0) * std::pow(s, q - 2.0) * u * u.transpose() -
               (r * q * std::pow(s, q - 1.0) * eps_list[t] + delta) * P) /
              static_cast<double>(T);
        }
        for (Index i = 0; i < K; ++i) {
          const double m = std::sqrt(G.col(i).squaredNorm() + mu * mu);
          const Vector gi = G.col(i);
          const Matrix Hi = Matrix::Identity(n, n) / m -
                            gi * gi.transpose() / (m * m * m);
          for (std::size_t t = 0; t < T; ++t) {
            g.segment(static_cast<Index>(t) * n, n) -=
                h_list[t][i] * gi / m / static_cast<double>(T);
            for (std::size_t t2 = 0; t2 < T; ++t2)
              H.block(static_cast<Index>(t) * n, static_cast<Index>(t2) * n,
                      n, n) -= h_list[t][i] * h_list[t2][i] * Hi /
                               (static_cast<double>(T) * static_cast<double>(T));
          }
        }
      };
      for (double mu = 1e-2 * (1.0 + gtop);;
           mu = std::max(mu * 1e-2, mu_final)) {
        bool ok;
        double f = phi_of(z, mu, ok);
        for (int it = 0; it < 100; ++it) {
          grad_hess(z, mu);
          if (g.norm() <= 1e-15 * (1.0 + std::abs(f))) break;
          Vector nstep;
          double tau = 0.0;
          for (;;) {
            Matrix Hd = H;
            Hd.diagonal().array() -= tau;
            nstep = -Hd.ldlt().solve(g);
            if (nstep.dot(g) > 0.0) break;
            tau = tau == 0.0 ? 1e-10 : tau * 10.0;
            if (tau > 1e6) {
              nstep = g;
              break;
            }
          }
          double a = 1.0;
          bool moved = false;
          for (int bt = 0; bt < 60; ++bt, a *= 0.5) {
            bool ok2;
            const double f2 = phi_of(z + a * nstep, mu, ok2);
            if (ok2 && f2 > f) {
              z += a * nstep;
              f = f2;
              moved = true;
              break;
            }
          }
          if (!moved) break;
        }
        if (mu <= mu_final) break;
      }
      st.G.setZero();
      for (std::size_t t = 0; t < T; ++t) {
        st.lambdas[t] = z.segment(static_cast<Index>(t) * n, n);
        st.G.noalias() +=
            st.lambdas[t] * h_list[t].transpose() / static_cast<double>(T);
        st.contrib[t] = detail::sample_contrib(st.lambdas[t], xs[t],
                                               eps_list[t], delta, rq);
      }
    } else {
      // large instances: coordinate ascent with exact 1-D line searches on
      // the smoothed objective, budgeted; the learner's outer loop does not
      // require full saddle convergence here
    std::vector<Vector> grads(T);
    int rounds_left =
        std::max(200, static_cast<int>(120000 / std::max<std::size_t>(T, 1)));
    for (double mu = 1e-2 * (1.0 + gtop); rounds_left > 0;
         mu = std::max(mu * 1e-2, mu_final)) {
      const auto smooth = [mu](double v) { return std::sqrt(v * v + mu * mu); };
      double phi_mu = 0.0;
      for (double c : st.contrib) phi_mu += c / static_cast<double>(T);
      for (Index i = 0; i < K; ++i) phi_mu -= smooth(st.G.col(i).norm());

      for (; rounds_left > 0; --rounds_left) {
        for (Index i = 0; i < K; ++i)
          D.col(i) = st.G.col(i) / smooth(st.G.col(i).norm());
        double gmax = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
          grads[t] = inner_objective_and_grad(st.lambdas[t], D * h_list[t],
                                              xs[t], eps_list[t], delta, rq)
                         .grad_lambda;
          gmax = std::max(gmax, grads[t].norm());
        }
        out.residual = gmax;
        if (mu <= mu_final && gmax <= res_tol) {
          out.converged = true;
          rounds_left = 0;
          break;
        }
        double round_gain = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
          const Vector& dir = grads[t];
          const double dn = dir.norm();
          if (dn <= 1e-17 * (1.0 + st.lambdas[t].norm())) continue;
          // smoothed phi increment along lambda_t + theta*dir, O(nK) per eval
          const auto q = [&](double theta) {
            const Vector cand = st.lambdas[t] + theta * dir;
            if (separator_margin(cand, xs[t], eps_list[t]) <= 0.0)
              return -std::numeric_limits<double>::infinity();
            const Vector dlam =
                (cand - st.lambdas[t]) / static_cast<double>(T);
            double dnorm = 0.0;
            for (Index i = 0; i < K; ++i) {
              const double hi = h_list[t][i];
              if (hi == 0.0) continue;
              dnorm += smooth((st.G.col(i) + hi * dlam).norm()) -
                       smooth(st.G.col(i).norm());
            }
            const double newc =
                detail::sample_contrib(cand, xs[t], eps_list[t], delta, rq);
            return (newc - st.contrib[t]) / static_cast<double>(T) - dnorm;
          };
          // bracket at the scale of the iterate, not of the sweep's last
          // step: tiny starts drown the increment in cancellation noise
          double hi = (1.0 + st.lambdas[t].norm()) / dn;
          for (int g = 0; g < 80 && hi < 1e12 && q(2.0 * hi) > q(hi); ++g)
            hi *= 2.0;
          double lo = 0.0, up = 2.0 * hi;
          for (int g = 0; g < 80; ++g) {
            const double m1 = lo + (up - lo) / 3.0;
            const double m2 = up - (up - lo) / 3.0;
            if (q(m1) < q(m2))
              lo = m1;
            else
              up = m2;
          }
          const double theta = 0.5 * (lo + up);
          const double gain = q(theta);
          if (gain > 0.0 && std::isfinite(gain)) {
            const Vector cand = st.lambdas[t] + theta * dir;
            const Vector dlam =
                (cand - st.lambdas[t]) / static_cast<double>(T);
            for (Index i = 0; i < K; ++i) {
              const double hval = h_list[t][i];
              if (hval != 0.0) st.G.col(i) += hval * dlam;
            }
            st.lambdas[t] = cand;
            st.contrib[t] = detail::sample_contrib(cand, xs[t], eps_list[t],
                                                   delta, rq);
            phi_mu += gain;
            round_gain += gain;
          }
        }
        if (round_gain <= 1e-15 * (1.0 + std::abs(phi_mu))) break;
      }
      if (mu <= mu_final) break;
    }
    }

    // final dictionary: boundary columns from the aggregate where it stands
    // above the accumulation-noise floor; where it has vanished the trace
    // argmax is the whole unit ball, and the saddle column is the interior
    // point solving the gradient-consistency least squares.
    double noise = 0.0;
    for (std::size_t t = 0; t < T; ++t)
      noise += st.lambdas[t].norm() * h_list[t].norm();
    noise = 1e-9 * (1.0 + noise / static_cast<double>(T));
    std::vector<Index> degen;
    for (Index i = 0; i < K; ++i) {
      const double gn = st.G.col(i).norm();
      if (gn > noise)
        D.col(i) = st.G.col(i) / gn;
      else
        degen.push_back(i);
    }
    if (!degen.empty()) {
      const Index Z = static_cast<Index>(degen.size());
      Matrix C = Matrix::Zero(n, Z);
      Matrix B = Matrix::Zero(Z, Z);
      const double q = rq.q, r = rq.r;
      for (std::size_t t = 0; t < T; ++t) {
        const Vector& lam = st.lambdas[t];
        const double ln = lam.norm();
        const double s = separator_margin(lam, xs[t], eps_list[t]);
        Vector gc = r * q * std::pow(s, q - 1.0) *
                        (xs[t] - eps_list[t] * lam / ln) -
                    delta * lam / ln;
        for (Index i = 0; i < K; ++i) {
          bool is_degen = false;
          for (Index zz = 0; zz < Z; ++zz)
            is_degen = is_degen || degen[static_cast<std::size_t>(zz)] == i;
          if (!is_degen) gc -= h_list[t][i] * D.col(i);
        }
        Vector hd(Z);
        for (Index zz = 0; zz < Z; ++zz)
          hd[zz] = h_list[t][degen[static_cast<std::size_t>(zz)]];
        C.noalias() += gc * hd.transpose();
        B.noalias() += hd * hd.transpose();
      }
      B.diagonal().array() += 1e-12 * (1.0 + B.trace());
      const Matrix X = C * B.inverse();
      for (Index zz = 0; zz < Z; ++zz) {
        Vector col = X.col(zz);
        const double cn = col.norm();
        if (cn > 1.0) col /= cn;
        D.col(degen[static_cast<std::size_t>(zz)]) = col;
      }
    }
    double gmax = 0.0;
    for (std::size_t t = 0; t < T; ++t)
      gmax = std::max(gmax, inner_objective_and_grad(st.lambdas[t],
                                                     D * h_list[t], xs[t],
                                                     eps_list[t], delta, rq)
                                .grad_lambda.norm());
    out.residual = gmax;
    out.converged = gmax <= res_tol;
  }

  // recompute the max-min value from scratch at the returned iterates to
  // shed any drift accumulated by the incremental updates
  st.G.setZero();
  for (std::size_t t = 0; t < T; ++t) {
    st.G.noalias() += st.lambdas[t] * h_list[t].transpose();
    st.contrib[t] =
        detail::sample_contrib(st.lambdas[t], xs[t], eps_list[t], delta, rq);
  }
  st.G /= static_cast<double>(T);
  contrib_sum = 0.0;
  for (double c : st.contrib) contrib_sum += c;
  st.phi = contrib_sum / static_cast<double>(T) - aggregate_norm(st.G);

  out.D.D = D;
  out.lambdas = st.lambdas;
  out.value = st.phi;
  out.iterations = sweep;
  return out;
}

/// One projected descent-ascent step for feasible dictionary sets without a
/// closed-form update.
inline std::pair<Matrix, std::vector<Vector>> general_descent_ascent_step(
    const Matrix& D, const std::vector<Vector>& lambda_list,
    const std::vector<Vector>& h_list, const std::vector<Vector>& xs,
    const std::vector<double>& eps_list, double delta, double alpha,
    double beta, FeasibleSet set, const RqConstants& rq) {
  const std::size_t T = xs.size();
  if (T == 0 || lambda_list.size() != T || h_list.size() != T ||
      eps_list.size() != T)
    throw DimensionError("general_descent_ascent_step: list length mismatch");
  Matrix step = Matrix::Zero(D.rows(), D.cols());
  for (std::size_t t = 0; t < T; ++t)
    step.noalias() += lambda_list[t] * h_list[t].transpose();
  const Matrix Dnew = project_dictionary(D + beta * step, set);
  std::vector<Vector> lnew(T);
  for (std::size_t t = 0; t < T; ++t)
    lnew[t] = lambda_ascent_step(lambda_list[t], xs[t], eps_list[t], delta,
                                 Dnew, h_list[t], alpha, rq);
  return {Dnew, std::move(lnew)};
}

}  // namespace ldict
