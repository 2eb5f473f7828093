#pragma once

#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "ldict/dict_update.hpp"
#include "ldict/encoder.hpp"
#include "ldict/parallel.hpp"
#include "ldict/stationarity.hpp"
#include "ldict/types.hpp"

namespace ldict {

struct TraceRecord {
  Index iter = 0;
  double objective = 0.0;
  double max_feas_violation = 0.0;
  double stationarity = 0.0;
  double wall_ms = 0.0;
};

struct LearnResult {
  Dictionary D;
  std::vector<Encoding> encodings;  // batch learners only
  std::vector<TraceRecord> trace;
  bool converged = false;
};

using SampleStream = std::function<std::optional<Vector>()>;

/// Drops samples that the zero code represents optimally (||x|| <= eps) and
/// resolves the per-sample thresholds of the survivors.
inline std::pair<Dataset, Index> filter_samples(const Dataset& data,
                                                const ThresholdModel& tm) {
  Dataset kept(data.n);
  Index dropped = 0;
  for (Index t = 0; t < data.size(); ++t) {
    const Sample& s = data.samples[static_cast<std::size_t>(t)];
    const double eps = effective_threshold(tm, s.x, t);
    if (s.x.norm() <= eps)
      ++dropped;
    else
      kept.add(Sample(s.x, eps));
  }
  if (kept.size() == 0)
    throw EmptyAfterFilter("filter_samples: no nontrivial samples remain");
  return {std::move(kept), dropped};
}

inline Dictionary init_dictionary(const Dataset& data, Index K,
                                  InitMethod method, std::uint64_t seed) {
  if (K < 1) throw DimensionError("init_dictionary: K must be >= 1");
  const Index n = data.n;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dictionary dict;
  dict.feasible_set = FeasibleSet::UnitColumns;
  dict.D.resize(n, K);
  Index filled = 0;
  if (method == InitMethod::DataColumns && data.size() > 0) {
    std::vector<Index> idx(static_cast<std::size_t>(data.size()));
    for (Index t = 0; t < data.size(); ++t) idx[static_cast<std::size_t>(t)] = t;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (Index i = 0; i < K && i < data.size(); ++i) {
      const Vector& x = data.samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])].x;
      const double nx = x.norm();
      if (nx > 0.0) dict.D.col(filled++) = x / nx;
    }
  }
  for (; filled < K; ++filled) {
    Vector c(n);
    for (Index j = 0; j < n; ++j) c[j] = gauss(rng);
    dict.D.col(filled) = c / c.norm();
  }
  return dict;
}

namespace detail {

struct Sweep {
  std::vector<Encoding> encs;
  double objective = 0.0;
  double max_feas = 0.0;
};

inline Sweep encode_sweep(const Dataset& data, const Matrix& D,
                          const CostModel& cm, const SolverParams& params) {
  const std::size_t T = static_cast<std::size_t>(data.size());
  Sweep sw;
  sw.encs.resize(T);
  std::vector<std::exception_ptr> errs(T);
  parallel_for(T, [&](std::size_t t) {
    try {
      const Sample& s = data.samples[t];
      sw.encs[t] = encode(s.x, D, cm, s.eps, params);
    } catch (...) {
      errs[t] = std::current_exception();
    }
  });
  for (std::size_t t = 0; t < T; ++t) {
    if (!errs[t]) continue;
    try {
      std::rethrow_exception(errs[t]);
    } catch (const EncodingInfeasible& e) {
      throw EncodingInfeasible(std::string(e.what()) + " (sample " +
                                   std::to_string(t) + ")",
                               static_cast<Index>(t));
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    sw.objective += sw.encs[t].cost;
    sw.max_feas = std::max(sw.max_feas, sw.encs[t].feas_residual);
  }
  sw.objective /= static_cast<double>(T);
  return sw;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

/// Smallest scaling c >= 0 with ||x - c v|| <= eps + delta * c^{1/p}, or
/// +inf when the ray c*v never meets the feasibility tube. This is the
/// encoding cost restricted to the fixed code direction v = D h.
inline double ray_cost(const Vector& x, const Vector& v, double eps,
                       double delta, double p) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (x.norm() <= eps) return 0.0;
  if (p == 1.0) {
    const double A = v.squaredNorm() - delta * delta;
    const double B = x.dot(v) + eps * delta;
    const double C = x.squaredNorm() - eps * eps;  // > 0 here
    if (A < 0.0)  // wide tube: the downward parabola has one positive root
      return (B - std::sqrt(B * B - A * C)) / A;
    if (A == 0.0) return B > 0.0 ? C / (2.0 * B) : inf;
    const double disc = B * B - A * C;
    if (disc < 0.0) return inf;
    const double c1 = (B - std::sqrt(disc)) / A;
    return c1 >= 0.0 ? c1 : inf;
  }
  // general p: g(c) = ||x - c v|| - eps - delta c^{1/p} is convex; locate its
  // minimizer by doubling + ternary search, then bisect for the left root
  auto g = [&](double c) {
    return (x - c * v).norm() - eps - delta * std::pow(c, 1.0 / p);
  };
  double hi = 1.0;
  for (int k = 0; k < 80 && g(2.0 * hi) < g(hi); ++k) hi *= 2.0;
  double lo = 0.0, rhs = 2.0 * hi;
  for (int k = 0; k < 200; ++k) {
    const double m1 = lo + (rhs - lo) / 3.0, m2 = rhs - (rhs - lo) / 3.0;
    if (g(m1) < g(m2)) rhs = m2; else lo = m1;
  }
  const double cmin = 0.5 * (lo + rhs);
  if (g(cmin) > 0.0) return inf;
  double a = 0.0, b = cmin;
  for (int k = 0; k < 200; ++k) {
    const double m = 0.5 * (a + b);
    (g(m) > 0.0 ? a : b) = m;
  }
  return 0.5 * (a + b);
}

/// d raycost / d v at a finite root c, by implicit differentiation of
/// ||x - c v|| = eps + delta c^{1/p}.
inline Vector ray_cost_grad(const Vector& x, const Vector& v, double eps,
                            double delta, double p, double c) {
  const Vector resid = x - c * v;
  const double rn = resid.norm();
  if (rn <= 0.0 || c <= 0.0) return Vector::Zero(v.size());
  const double Fc = -v.dot(resid) / rn -
                    (delta / p) * std::pow(c, 1.0 / p - 1.0);
  if (std::abs(Fc) < 1e-12) return Vector::Zero(v.size());
  return (c / (rn * Fc)) * resid;
}

/// Projected-gradient descent on the exact ray surrogate
/// S(D) = (1/T) sum_t raycost(x_t, D h_t). S is tight at the sweep's own
/// dictionary (S(D) >= objective(D) with equality at the encoding point), so
/// any decrease of S certifies a decrease of the next sweep's objective.
inline Matrix surrogate_descent(Matrix D, const std::vector<Vector>& hs,
                                const std::vector<Vector>& xs,
                                const std::vector<double>& eps, double delta,
                                double p, FeasibleSet fs, int iters) {
  const std::size_t T = xs.size();
  if (T == 0) return D;
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto value = [&](const Matrix& M) {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double c = ray_cost(xs[t], M * hs[t], eps[t], delta, p);
      if (!std::isfinite(c)) return inf;
      s += c;
    }
    return s / static_cast<double>(T);
  };
  double cur = value(D);
  if (!std::isfinite(cur)) return D;
  double step = 1.0;
  for (int it = 0; it < iters; ++it) {
    Matrix G = Matrix::Zero(D.rows(), D.cols());
    for (std::size_t t = 0; t < T; ++t) {
      const Vector v = D * hs[t];
      const double c = ray_cost(xs[t], v, eps[t], delta, p);
      if (!std::isfinite(c) || c <= 0.0) continue;
      G += ray_cost_grad(xs[t], v, eps[t], delta, p, c) * hs[t].transpose();
    }
    G /= static_cast<double>(T);
    const double gn = G.norm();
    if (gn <= 1e-12 * (1.0 + std::abs(cur))) break;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Matrix cand = project_dictionary(D - step * G, fs);
      const double val = value(cand);
      if (val < cur) {
        D = cand;
        cur = val;
        accepted = true;
        if (bt == 0) step *= 1.3;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return D;
}

/// Block-coordinate descent on the exact joint objective
/// (1/T) sum_t raycost(x_t, D h_t) over (D, {h_t in V_c}). Tight at the
/// sweep's own iterate, so every accepted step certifies that the next
/// encode sweep's objective cannot rise. Returns the improved dictionary and
/// mutates hs in place.
inline Matrix joint_surrogate_descent(Matrix D, std::vector<Vector>& hs,
                                      const std::vector<Vector>& xs,
                                      const std::vector<double>& eps,
                                      double delta, double p,
                                      const CostModel& cm, FeasibleSet fs,
                                      int rounds) {
  const std::size_t T = xs.size();
  if (T == 0) return D;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(T), hstep(T, 0.25);
  auto refresh = [&](std::size_t t) {
    cost[t] = ray_cost(xs[t], D * hs[t], eps[t], delta, p);
  };
  for (std::size_t t = 0; t < T; ++t) refresh(t);
  double dstep = 0.5;
  for (int round = 0; round < rounds; ++round) {
    double moved = 0.0;
    // code-direction block: one backtracked projected gradient step each
    for (std::size_t t = 0; t < T; ++t) {
      if (!std::isfinite(cost[t]) || cost[t] <= 0.0) continue;
      const Vector v = D * hs[t];
      const Vector gv = ray_cost_grad(xs[t], v, eps[t], delta, p, cost[t]);
      const Vector gh = D.transpose() * gv;
      if (gh.norm() <= 1e-13 * (1.0 + cost[t])) continue;
      for (int bt = 0; bt < 12; ++bt) {
        const Vector cand =
            project_cost_sublevel(cm, Vector(hs[t] - hstep[t] * gh));
        const double val = ray_cost(xs[t], D * cand, eps[t], delta, p);
        if (val < cost[t]) {
          moved += cost[t] - val;
          hs[t] = cand;
          cost[t] = val;
          if (bt == 0) hstep[t] *= 1.4;
          break;
        }
        hstep[t] *= 0.5;
      }
    }
    // dictionary block: one backtracked projected gradient step
    Matrix G = Matrix::Zero(D.rows(), D.cols());
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      total += cost[t];
      if (!std::isfinite(cost[t]) || cost[t] <= 0.0) continue;
      G += ray_cost_grad(xs[t], Vector(D * hs[t]), eps[t], delta, p,
                         cost[t]) *
           hs[t].transpose();
    }
    G /= static_cast<double>(T);
    if (G.norm() > 1e-13) {
      for (int bt = 0; bt < 12; ++bt) {
        const Matrix cand = project_dictionary(D - dstep * G, fs);
        double val = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
          const double c = ray_cost(xs[t], cand * hs[t], eps[t], delta, p);
          if (!std::isfinite(c)) {
            val = inf;
            break;
          }
          val += c;
        }
        if (val < total) {
          moved += (total - val) / static_cast<double>(T);
          D = cand;
          for (std::size_t t = 0; t < T; ++t) refresh(t);
          if (bt == 0) dstep *= 1.4;
          break;
        }
        dstep *= 0.5;
      }
    }
    if (moved <= 1e-14 * static_cast<double>(T)) break;
  }
  return D;
}

}  // namespace detail

/// Batch alternating minimization: encode sweep with the dictionary frozen,
/// then the saddle-point dictionary update with the normalized codes frozen.
inline LearnResult learn_batch(const Dataset& data, const CostModel& cm,
                               const ThresholdModel& tm,
                               const SolverParams& params) {
  params.validate();
  auto [kept, dropped] = filter_samples(data, tm);
  (void)dropped;
  Dictionary dict = init_dictionary(kept, cm.K, params.init, params.seed);
  const double p = cm.p();
  LearnResult out;
  out.D.feasible_set = FeasibleSet::UnitColumns;
  const auto t0 = std::chrono::steady_clock::now();
  int flat = 0;
  double prev_obj = std::numeric_limits<double>::infinity();

  Matrix prev_D = dict.D;
  for (int sweep = 0; sweep < params.max_sweeps; ++sweep) {
    detail::Sweep sw = detail::encode_sweep(kept, dict.D, cm, params);
    // the dictionary step minimizes a dual surrogate; when its inexact solve
    // fails to produce true descent, keep the previous dictionary and stop
    if (sweep > 0 && sw.objective > prev_obj + 1e-12 * (1.0 + prev_obj)) {
      dict.D = prev_D;
      out.converged = true;
      break;
    }
    prev_D = dict.D;
    std::vector<Vector> xs;
    std::vector<double> eps_list;
    for (Index t = 0; t < kept.size(); ++t) {
      xs.push_back(kept.samples[static_cast<std::size_t>(t)].x);
      eps_list.push_back(kept.samples[static_cast<std::size_t>(t)].eps);
    }
    const StationarityReport rep = stationarity_from_encodings(
        dict, xs, eps_list, sw.encs, cm, params.delta, params.tol);
    out.trace.push_back({sweep, sw.objective, sw.max_feas, rep.residual,
                         detail::elapsed_ms(t0)});
    out.encodings = std::move(sw.encs);

    if (prev_obj - sw.objective < params.stop_tol * (1.0 + sw.objective))
      ++flat;
    else
      flat = 0;
    prev_obj = sw.objective;
    if (flat >= 3) {
      out.converged = true;
      break;
    }
    if (sweep + 1 == params.max_sweeps) break;

    // samples with zero cost constrain nothing this sweep
    std::vector<Vector> axs, ah, alam;
    std::vector<double> aeps;
    for (std::size_t t = 0; t < out.encodings.size(); ++t) {
      const Encoding& e = out.encodings[t];
      if (e.cost <= 0.0) continue;
      axs.push_back(xs[t]);
      aeps.push_back(eps_list[t]);
      ah.push_back(e.h);
      alam.push_back(e.cost * e.lambda);  // back to saddle scale
    }
    if (axs.empty()) break;
    SaddleResult sr = update_dictionary(axs, aeps, ah, params.delta, params,
                                        dict.D, std::move(alam), p);
    // polish on the exact ray surrogate: start from whichever of the saddle
    // step's output and the sweep's own dictionary scores better, then
    // descend; this certifies that the next sweep's objective cannot rise
    auto sval = [&](const Matrix& M) {
      double s = 0.0;
      for (std::size_t t = 0; t < axs.size(); ++t) {
        const double c = detail::ray_cost(axs[t], M * ah[t], aeps[t],
                                          params.delta, p);
        if (!std::isfinite(c)) return std::numeric_limits<double>::infinity();
        s += c;
      }
      return s / static_cast<double>(axs.size());
    };
    Matrix start = sval(sr.D.D) <= sval(dict.D) ? sr.D.D : dict.D;
    dict.D = detail::joint_surrogate_descent(std::move(start), ah, axs, aeps,
                                             params.delta, p, cm,
                                             dict.feasible_set, 400);
  }
  out.D = dict;
  return out;
}

/// Online stochastic learner: one encode and one projected rank-one (or
/// element-wise, when delta > 0) dictionary push per arrival, with
/// Robbins-Monro step sizes a/(b+t).
inline LearnResult learn_online(const SampleStream& stream, const CostModel& cm,
                                const ThresholdModel& tm,
                                const SolverParams& params,
                                const Dictionary& D_init) {
  params.validate();
  Dictionary dict = D_init;
  LearnResult out;
  const auto t0 = std::chrono::steady_clock::now();
  Index t = 0;
  double win_cost = 0.0, win_feas = 0.0;
  Index win_n = 0;
  while (auto xopt = stream()) {
    const Vector& x = *xopt;
    const double eps = effective_threshold(tm, x, t);
    const double alpha_t =
        params.online_a / (params.online_b + static_cast<double>(t));
    ++t;
    if (x.norm() <= eps) continue;  // trivial arrival, D untouched
    Encoding e;
    try {
      e = encode(x, dict.D, cm, eps, params);
    } catch (const EncodingInfeasible&) {
      continue;  // skip, counted by the missing trace contribution
    }
    win_cost += e.cost;
    win_feas = std::max(win_feas, e.feas_residual);
    ++win_n;
    if (e.cost > 0.0 && alpha_t > 0.0) {
      if (params.delta > 0.0) {
        const Vector resid = x - dict.D * e.f;
        for (Index i = 0; i < dict.K(); ++i) {
          if (e.f[i] == 0.0) continue;
          dict.D.col(i) = project_column(dict.D.col(i) + alpha_t * e.f[i] * resid,
                                         dict.feasible_set);
        }
      } else {
        // envelope gradient of the per-sample cost with respect to D is
        // cost * lambda * h^T with h = f / cost^{1/p}
        const double w = std::pow(e.cost, 1.0 - 1.0 / cm.p());
        dict.D = project_dictionary(
            dict.D + alpha_t * w * e.lambda * e.f.transpose(),
            dict.feasible_set);
      }
    }
    if (t % params.trace_every == 0 && win_n > 0) {
      out.trace.push_back({t, win_cost / static_cast<double>(win_n), win_feas,
                           0.0, detail::elapsed_ms(t0)});
      win_cost = 0.0;
      win_feas = 0.0;
      win_n = 0;
    }
  }
  out.D = dict;
  out.converged = true;
  return out;
}

/// Conventional baseline: the same constrained encodes, but the dictionary
/// step minimizes the reconstruction error (1/T) sum ||x_t - D f_t||^2 by
/// projected gradient. The reported objective stays the encoding cost so the
/// two learners are comparable.
inline LearnResult learn_baseline(const Dataset& data, const CostModel& cm,
                                  const ThresholdModel& tm,
                                  const SolverParams& params) {
  params.validate();
  auto [kept, dropped] = filter_samples(data, tm);
  (void)dropped;
  Dictionary dict = init_dictionary(kept, cm.K, params.init, params.seed);
  const Index T = kept.size();
  LearnResult out;
  const auto t0 = std::chrono::steady_clock::now();
  int flat = 0;
  double prev_obj = std::numeric_limits<double>::infinity();

  Matrix X(kept.n, T);
  for (Index t = 0; t < T; ++t) X.col(t) = kept.samples[static_cast<std::size_t>(t)].x;

  for (int sweep = 0; sweep < params.max_sweeps; ++sweep) {
    detail::Sweep sw = detail::encode_sweep(kept, dict.D, cm, params);
    out.trace.push_back(
        {sweep, sw.objective, sw.max_feas, 0.0, detail::elapsed_ms(t0)});
    out.encodings = std::move(sw.encs);

    if (prev_obj - sw.objective < params.stop_tol * (1.0 + sw.objective))
      ++flat;
    else
      flat = 0;
    prev_obj = sw.objective;
    if (flat >= 3) {
      out.converged = true;
      break;
    }
    if (sweep + 1 == params.max_sweeps) break;

    Matrix F(cm.K, T);
    for (Index t = 0; t < T; ++t)
      F.col(t) = out.encodings[static_cast<std::size_t>(t)].f;
    const double lip =
        2.0 * spectral_norm_estimate(F) * spectral_norm_estimate(F) /
        static_cast<double>(T);
    if (lip <= 0.0) continue;
    const double step = 1.0 / lip;
    for (int it = 0; it < 10000; ++it) {
      const Matrix grad = (-2.0 / static_cast<double>(T)) *
                          (X - dict.D * F) * F.transpose();
      const Matrix next =
          project_dictionary(dict.D - step * grad, dict.feasible_set);
      const double move = (next - dict.D).norm();
      dict.D = next;
      if (move <= 1e-8 * (1.0 + dict.D.norm())) break;
    }
  }
  out.D = dict;
  return out;
}

/// Adapter: replays a dataset as a stream for a number of epochs.
inline SampleStream make_stream(const Dataset& data, int epochs) {
  auto pos = std::make_shared<Index>(0);
  const Index total = data.size() * epochs;
  return [pos, total, &data]() -> std::optional<Vector> {
    if (*pos >= total) return std::nullopt;
    const Vector& x = data.samples[static_cast<std::size_t>(*pos % data.size())].x;
    ++*pos;
    return x;
  };
}

}  // namespace ldict
