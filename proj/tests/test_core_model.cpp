#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ldict/projections.hpp"
#include "ldict/types.hpp"

using namespace ldict;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("evaluate_cost on the three kinds") {
  CHECK(evaluate_cost(CostModel(CostKind::L1, 2), vec2(1.0, -2.0)) == 3.0);
  CHECK(evaluate_cost(CostModel(CostKind::SquaredL2, 2), vec2(3.0, 4.0)) ==
        25.0);
  CHECK(evaluate_cost(CostModel(CostKind::L1, 2), vec2(0.0, 0.0)) == 0.0);
  CHECK(evaluate_cost(CostModel(CostKind::L2, 2), vec2(3.0, 4.0)) == 5.0);
  CHECK_THROWS_AS(evaluate_cost(CostModel(CostKind::L1, 3), vec2(1.0, 1.0)),
                  DimensionError);
}

TEST_CASE("effective_threshold variants") {
  const Vector x = vec2(3.0, 4.0);
  CHECK(effective_threshold(ThresholdModel::constant(0.5), x) == 0.5);
  CHECK(effective_threshold(ThresholdModel::proportional(0.1), x) ==
        Catch::Approx(0.5));
  const auto tm = ThresholdModel::explicit_list({0.2, 0.7});
  CHECK(effective_threshold(tm, x, 1) == 0.7);
  CHECK_THROWS_AS(effective_threshold(tm, x, 2), DimensionError);
  CHECK_THROWS_AS(effective_threshold(tm, x, -1), DimensionError);
}

TEST_CASE("threshold model constructors validate") {
  CHECK_THROWS_AS(ThresholdModel::constant(-0.1), DimensionError);
  CHECK_THROWS_AS(ThresholdModel::proportional(1.0), DimensionError);
  CHECK_NOTHROW(ThresholdModel::proportional(0.99));
  CHECK_THROWS_AS(ThresholdModel::explicit_list({0.1, -0.2}), DimensionError);
}

TEST_CASE("sample and dataset invariants") {
  CHECK_THROWS_AS(Sample(vec2(1.0, 2.0), -1.0), DimensionError);
  CHECK_THROWS_AS(Sample(Vector(), 0.1), DimensionError);
  Dataset data;
  data.add(Sample(vec2(1.0, 0.0), 0.1));
  Vector v3(3);
  v3 << 1, 2, 3;
  CHECK_THROWS_AS(data.add(Sample(v3, 0.1)), DimensionError);
  CHECK(data.size() == 1);
}

TEST_CASE("rq_constants in both modes") {
  const auto paper1 = rq_constants(1.0, RqMode::PaperDefault);
  const auto cal1 = rq_constants(1.0, RqMode::Calibrated);
  CHECK(paper1.r == 2.0);
  CHECK(paper1.q == 0.5);
  CHECK(cal1.r == 2.0);
  CHECK(cal1.q == 0.5);

  const auto cal2 = rq_constants(2.0, RqMode::Calibrated);
  CHECK(cal2.q == Catch::Approx(2.0 / 3.0));
  CHECK(cal2.r == Catch::Approx(3.0 * std::pow(2.0, -2.0 / 3.0)));
  CHECK(cal2.r == Catch::Approx(1.88988).margin(1e-4));

  const auto paper2 = rq_constants(2.0, RqMode::PaperDefault);
  CHECK(paper2.r == 6.0);

  CHECK_THROWS_AS(rq_constants(0.0, RqMode::Calibrated), DimensionError);
}

TEST_CASE("cost homogeneity of order p") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> amp(0.0, 5.0);
  for (const auto kind :
       {CostKind::L1, CostKind::L2, CostKind::SquaredL2}) {
    const CostModel cm(kind, 6);
    for (int k = 0; k < 100; ++k) {
      Vector f(6);
      for (Index i = 0; i < 6; ++i) f[i] = gauss(rng);
      const double a = amp(rng);
      const double lhs = evaluate_cost(cm, Vector(a * f));
      const double rhs = std::pow(a, cm.p()) * evaluate_cost(cm, f);
      CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + rhs));
      CHECK(evaluate_cost(cm, f) >= 0.0);
    }
    CHECK(evaluate_cost(cm, Vector(Vector::Zero(6))) == 0.0);
  }
}

TEST_CASE("sublevel membership agrees with the projection") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto kind :
       {CostKind::L1, CostKind::L2, CostKind::SquaredL2}) {
    const CostModel cm(kind, 5);
    for (int k = 0; k < 200; ++k) {
      Vector f(5);
      for (Index i = 0; i < 5; ++i) f[i] = 0.6 * gauss(rng);
      const bool inside = evaluate_cost(cm, f) <= 1.0;
      const Vector proj = project_cost_sublevel(cm, f);
      if (inside)
        CHECK((proj - f).norm() <= 1e-9);
      else
        CHECK((proj - f).norm() > 1e-9);
    }
  }
}

TEST_CASE("dictionary feasibility flags") {
  Dictionary d;
  d.D = Matrix::Identity(2, 2);
  CHECK(d.feasible());
  d.D(0, 0) = 2.0;
  CHECK_FALSE(d.feasible());
  d.D = Matrix::Identity(2, 2);
  d.D(1, 0) = -0.5;
  d.D.col(0).normalize();
  d.feasible_set = FeasibleSet::NonnegUnitColumns;
  CHECK_FALSE(d.feasible());
}

TEST_CASE("solver params validation") {
  SolverParams p;
  CHECK_NOTHROW(p.validate());
  p.alpha = 0.0;
  CHECK_THROWS_AS(p.validate(), DimensionError);
  p = SolverParams{};
  p.delta = -0.1;
  CHECK_THROWS_AS(p.validate(), DimensionError);
  p = SolverParams{};
  p.inner_iters = 0;
  CHECK_THROWS_AS(p.validate(), DimensionError);
}
