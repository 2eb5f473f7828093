#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ldict/encoder.hpp"

using namespace ldict;

namespace {

Vector vec1(double a) {
  Vector v(1);
  v << a;
  return v;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Matrix random_unit_dict(std::mt19937_64& rng, Index n, Index K) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix D(n, K);
  for (Index i = 0; i < K; ++i) {
    Vector c(n);
    for (Index j = 0; j < n; ++j) c[j] = gauss(rng);
    D.col(i) = c / c.norm();
  }
  return D;
}

SolverParams tight_params() {
  SolverParams p;
  p.tol = 1e-8;
  return p;
}

}  // namespace

TEST_CASE("inner objective value and infeasibility") {
  const RqConstants rq = rq_constants(1.0, RqMode::Calibrated);
  const Vector x = vec1(2.0);
  const Vector Dh = vec1(1.0);  // D = [1], h = 1

  const auto ev = inner_objective_and_grad(vec1(1.0), Dh, x, 0.5, 0.0, rq);
  CHECK(ev.value == Catch::Approx(2.0 * std::sqrt(1.5) - 1.0));

  // analytic maximizer lambda* = (x - eps)/h^2
  const auto at_star =
      inner_objective_and_grad(vec1(1.5), Dh, x, 0.5, 0.0, rq);
  CHECK(at_star.grad_lambda.norm() <= 1e-12);

  CHECK_THROWS_AS(inner_objective_and_grad(vec1(-0.1), Dh, x, 0.5, 0.0, rq),
                  InfeasibleSeparator);
  CHECK_THROWS_AS(inner_objective_and_grad(vec1(0.0), Dh, x, 0.5, 0.0, rq),
                  ZeroSeparator);
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const RqConstants rq = rq_constants(1.0, RqMode::Calibrated);
  int checked = 0;
  while (checked < 100) {
    const Index n = 3;
    Vector x(n), lambda(n), Dh(n);
    for (Index i = 0; i < n; ++i) {
      x[i] = gauss(rng);
      lambda[i] = gauss(rng);
      Dh[i] = gauss(rng);
    }
    const double eps = 0.2;
    if (lambda.dot(x) - eps * lambda.norm() <= 0.05) continue;
    ++checked;
    const auto ev = inner_objective_and_grad(lambda, Dh, x, eps, 0.07, rq);
    const double fd_step = 1e-6;
    Vector fd(n);
    for (Index i = 0; i < n; ++i) {
      Vector lp = lambda, lm = lambda;
      lp[i] += fd_step;
      lm[i] -= fd_step;
      fd[i] = (inner_objective_and_grad(lp, Dh, x, eps, 0.07, rq).value -
               inner_objective_and_grad(lm, Dh, x, eps, 0.07, rq).value) /
              (2.0 * fd_step);
    }
    CHECK((fd - ev.grad_lambda).norm() <=
          1e-5 * (1.0 + ev.grad_lambda.norm()));
  }
}

TEST_CASE("encode on the scalar instance") {
  const CostModel cm(CostKind::L1, 1);
  SolverParams params = tight_params();

  SECTION("trivial sample") {
    const Encoding e = encode(vec1(0.3), Matrix::Identity(1, 1), cm, 0.5,
                              params);
    CHECK(e.cost == 0.0);
    CHECK(e.f.norm() == 0.0);
    CHECK(e.converged);
  }
  SECTION("delta = 0") {
    const Encoding e = encode(vec1(2.0), Matrix::Identity(1, 1), cm, 0.5,
                              params);
    CHECK(e.cost == Catch::Approx(1.5).epsilon(1e-6));
    CHECK(e.f[0] == Catch::Approx(1.5).epsilon(1e-6));
    CHECK(e.feas_residual <= 1e-9);
    CHECK(e.converged);
  }
  SECTION("delta = 0.1") {
    params.delta = 0.1;
    const Encoding e = encode(vec1(2.0), Matrix::Identity(1, 1), cm, 0.5,
                              params);
    CHECK(e.cost == Catch::Approx(1.5 / 1.1).epsilon(1e-6));
    CHECK(e.f[0] == Catch::Approx(1.5 / 1.1).epsilon(1e-6));
    CHECK(e.feas_residual <= 1e-9);
  }
}

TEST_CASE("encode on the 2-D identity instance") {
  const CostModel cm(CostKind::L1, 2);
  const Encoding e = encode(vec2(2.0, 0.1), Matrix::Identity(2, 2), cm, 0.5,
                            tight_params());
  // soft threshold theta = sqrt(0.24): f = (2 - theta, 0)
  const double expect = 2.0 - std::sqrt(0.24);
  CHECK(e.cost == Catch::Approx(expect).epsilon(1e-5));
  CHECK(e.f[0] == Catch::Approx(expect).epsilon(1e-4));
  CHECK(std::abs(e.f[1]) <= 1e-4);
}

TEST_CASE("encode reports the separator at unit scale") {
  const CostModel cm(CostKind::L1, 1);
  SolverParams params = tight_params();
  params.delta = 0.1;
  const Encoding e = encode(vec1(2.0), Matrix::Identity(1, 1), cm, 0.5,
                            params);
  // membership conditions of the optimal separator set
  const double s = separator_margin(e.lambda, vec1(2.0), 0.5);
  CHECK(s == Catch::Approx(std::pow(e.cost, 1.0)).epsilon(1e-4));
  CHECK(0.1 * e.lambda.norm() + std::abs(e.lambda[0]) ==
        Catch::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("encode rejects inconsistent dimensions") {
  const CostModel cm(CostKind::L1, 2);
  CHECK_THROWS_AS(encode(vec1(1.0), Matrix::Identity(2, 2), cm, 0.1,
                         SolverParams{}),
                  DimensionError);
}

TEST_CASE("encode throws when no feasible code exists at delta = 0") {
  const CostModel cm(CostKind::L1, 1);
  Matrix D(2, 1);
  D << 1.0, 0.0;
  SolverParams params;
  params.max_outer = 2000;
  CHECK_THROWS_AS(encode(vec2(0.0, 2.0), D, cm, 0.5, params),
                  EncodingInfeasible);
}

TEST_CASE("j_value on the scalar instance") {
  const CostModel cm(CostKind::L1, 1);
  const SolverParams params = tight_params();
  const Matrix D = Matrix::Identity(1, 1);
  CHECK(j_value(D, vec1(1.0), vec1(2.0), 0.5, 0.0, cm, params) ==
        Catch::Approx(1.5).epsilon(1e-6));
  CHECK(j_value(D, vec1(0.5), vec1(2.0), 0.5, 0.0, cm, params) ==
        Catch::Approx(3.0).epsilon(1e-6));
  CHECK(j_value(D, vec1(1.0), vec1(2.0), 0.5, 0.1, cm, params) ==
        Catch::Approx(1.5 / 1.1).epsilon(1e-6));
  // h pointing away from x makes the sup unbounded at delta = 0
  CHECK(std::isinf(j_value(D, vec1(-1.0), vec1(2.0), 0.5, 0.0, cm, params)));
}

TEST_CASE("saddle gap vanishes only at the saddle") {
  const CostModel cm(CostKind::L1, 1);
  const RqConstants rq = rq_constants(1.0, RqMode::Calibrated);
  const Matrix D = Matrix::Identity(1, 1);
  const Vector x = vec1(2.0);

  InnerState at_saddle;
  at_saddle.lambda = vec1(1.5);  // (x - eps)/h^2
  at_saddle.h = vec1(1.0);
  CHECK(saddle_gap(at_saddle, x, D, cm, 0.5, 0.0, rq) <= 1e-8);

  InnerState off;
  off.lambda = vec1(0.15);
  off.h = vec1(1.0);
  CHECK(saddle_gap(off, x, D, cm, 0.5, 0.0, rq) > 1e-3);

  InnerState trivial;
  trivial.lambda = vec1(1.0);
  trivial.h = vec1(1.0);
  CHECK(saddle_gap(trivial, vec1(0.3), D, cm, 0.5, 0.0, rq) == 0.0);
}

TEST_CASE("duality identity at the encoder output") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const SolverParams params = tight_params();
  for (int k = 0; k < 20; ++k) {
    const Index n = 3, K = 4;
    const Matrix D = random_unit_dict(rng, n, K);
    Vector f0 = Vector::Zero(K);
    f0[0] = 1.0 + std::abs(gauss(rng));
    f0[2] = gauss(rng);
    const Vector x = D * f0;
    const double eps = 0.3 * x.norm();
    if (x.norm() <= eps) continue;
    const CostModel cm(CostKind::L1, K);
    const Encoding e = encode(x, D, cm, eps, params);
    const double jv = j_value(D, e.h, x, eps, 0.0, cm, params);
    CHECK(std::abs(jv - e.cost) <= 1e-3 * (1.0 + e.cost));
  }
}

TEST_CASE("scale equivariance with a proportional threshold") {
  std::mt19937_64 rng(37);
  const Matrix D = random_unit_dict(rng, 3, 5);
  const CostModel cm(CostKind::L1, 5);
  Vector x(3);
  x << 1.2, -0.4, 0.7;
  const SolverParams params = tight_params();
  const double base = encode(x, D, cm, 0.1 * x.norm(), params).cost;
  for (const double s : {0.5, 2.0, 10.0}) {
    const Vector xs = s * x;
    const double cs = encode(xs, D, cm, 0.1 * xs.norm(), params).cost;
    CHECK(std::abs(cs - s * base) <= 1e-5 * (1.0 + s * base));
  }
}

TEST_CASE("permutation equivariance of the code") {
  std::mt19937_64 rng(41);
  const Index n = 3, K = 4;
  const Matrix D = random_unit_dict(rng, n, K);
  Vector x(3);
  x << 1.0, 0.5, -0.3;
  const CostModel cm(CostKind::L1, K);
  const SolverParams params = tight_params();
  const Encoding a = encode(x, D, cm, 0.2, params);

  Matrix P = Matrix::Zero(K, K);
  P(0, 2) = P(1, 0) = P(2, 3) = P(3, 1) = 1.0;
  const Encoding b = encode(x, Matrix(D * P), cm, 0.2, params);
  CHECK(std::abs(a.cost - b.cost) <= 1e-5 * (1.0 + a.cost));
  CHECK((P * b.f - a.f).norm() <= 1e-3 * (1.0 + a.f.norm()));
}

TEST_CASE("returned encodings are always feasible") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SolverParams params;
  params.tol = 1e-7;
  for (int k = 0; k < 30; ++k) {
    const Index n = 4, K = 6;
    const Matrix D = random_unit_dict(rng, n, K);
    Vector f0 = Vector::Zero(K);
    for (int j = 0; j < 2; ++j) f0[rng() % K] = gauss(rng);
    Vector x = D * f0;
    if (x.norm() < 0.1) continue;
    const double eps = 0.25 * x.norm();
    params.delta = (k % 2 == 0) ? 0.0 : 0.05;
    const CostModel cm(CostKind::L1, K);
    const Encoding e = encode(x, D, cm, eps, params);
    const double p = cm.p();
    CHECK((x - D * e.f).norm() <=
          eps + params.delta * std::pow(e.cost, 1.0 / p) + 1e-6);
    CHECK(evaluate_cost(cm, e.f) <= e.cost + 1e-6);
    CHECK(evaluate_cost(cm, e.h) <= 1.0 + 1e-9);
  }
}
