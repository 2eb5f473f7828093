#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ldict/io.hpp"
#include "ldict/learner.hpp"
#include "ldict/stationarity.hpp"

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

}  // namespace

TEST_CASE("separator membership residuals on the scalar instance") {
  const CostModel cm(CostKind::L1, 1);
  const Matrix D = Matrix::Identity(1, 1);
  const Vector x = vec1(2.0);

  SECTION("optimal separator at delta = 0") {
    const auto [r1, r2] = separator_residuals(D, x, 0.5, 0.0, cm, vec1(1.0),
                                              1.5);
    CHECK(r1 <= 1e-12);
    CHECK(r2 <= 1e-12);
  }
  SECTION("non-optimal separator") {
    const auto [r1, r2] = separator_residuals(D, x, 0.5, 0.0, cm, vec1(2.0),
                                              1.5);
    CHECK(r1 == Catch::Approx(1.5));
    CHECK(r2 == Catch::Approx(1.0));
  }
  SECTION("delta = 0.1 separator scales by 1/(1+delta)") {
    const auto [r1, r2] = separator_residuals(D, x, 0.5, 0.1, cm,
                                              vec1(1.0 / 1.1), 1.5 / 1.1);
    CHECK(r1 <= 1e-12);
    CHECK(r2 <= 1e-12);
  }
}

TEST_CASE("stationarity residual on the single-sample optimum") {
  Dataset d(2);
  d.add(Sample(vec2(2.0, 0.0), 0.0));
  const CostModel cm(CostKind::L1, 1);
  const auto tm = ThresholdModel::constant(0.5);
  SolverParams p;
  p.tol = 1e-8;

  Dictionary opt;
  opt.D = Matrix(2, 1);
  opt.D << 1.0, 0.0;
  auto [kept, dropped] = filter_samples(d, tm);
  const StationarityReport at_opt = stationarity_residual(opt, kept, cm, tm, p);
  CHECK(at_opt.usable);
  CHECK(at_opt.residual <= 1e-6);

  // tilted but still able to reach x within eps at delta = 0
  Dictionary off;
  off.D = Matrix(2, 1);
  off.D << 0.99, std::sqrt(1.0 - 0.99 * 0.99);
  const StationarityReport at_off = stationarity_residual(off, kept, cm, tm, p);
  CHECK(at_off.residual > 0.1);
}

TEST_CASE("unused atoms report zero residual") {
  Dataset d(2);
  d.add(Sample(vec2(2.0, 0.0), 0.0));
  const CostModel cm(CostKind::L1, 2);
  const auto tm = ThresholdModel::constant(0.5);
  SolverParams p;
  p.tol = 1e-8;
  Dictionary dict;
  dict.D = Matrix(2, 2);
  dict.D << 1.0, 0.0, 0.0, -1.0;  // second atom orthogonal, never used
  auto [kept, dropped] = filter_samples(d, tm);
  const StationarityReport rep = stationarity_residual(dict, kept, cm, tm, p);
  CHECK(rep.per_atom.size() == 2);
  CHECK(rep.per_atom[1] == 0.0);
}

TEST_CASE("fixed point residual") {
  const CostModel cm(CostKind::L1, 1);
  const auto tm = ThresholdModel::constant(0.5);
  SolverParams p;
  p.tol = 1e-8;
  p.delta = 0.05;

  Dataset d(2);
  d.add(Sample(vec2(2.0, 0.0), 0.0));
  auto [kept, dropped] = filter_samples(d, tm);

  SECTION("small at the single-sample optimum") {
    Dictionary opt;
    opt.D = Matrix(2, 1);
    opt.D << 1.0, 0.0;
    CHECK(fixed_point_residual(opt, kept, cm, tm, p) <= 1e-3);
  }
  SECTION("large away from the optimum") {
    Dictionary off;
    off.D = Matrix(2, 1);
    off.D << 0.6, 0.8;
    CHECK(fixed_point_residual(off, kept, cm, tm, p) > 1e-1);
  }
  SECTION("all-zero codes return zero") {
    Dataset trivial(2);
    trivial.add(Sample(vec2(0.2, 0.0), 0.5));
    Dictionary dict;
    dict.D = Matrix(2, 1);
    dict.D << 1.0, 0.0;
    CHECK(fixed_point_residual(dict, trivial, cm,
                               ThresholdModel::explicit_list({0.5}), p) == 0.0);
  }
  SECTION("requires delta > 0 and unit columns") {
    Dictionary dict;
    dict.D = Matrix(2, 1);
    dict.D << 1.0, 0.0;
    SolverParams zero = p;
    zero.delta = 0.0;
    CHECK_THROWS_AS(fixed_point_residual(dict, kept, cm, tm, zero),
                    DimensionError);
    dict.feasible_set = FeasibleSet::NonnegUnitColumns;
    CHECK_THROWS_AS(fixed_point_residual(dict, kept, cm, tm, p),
                    DimensionError);
  }
}

TEST_CASE("stationarity and fixed point agree at a learned dictionary") {
  auto [data, D_true] = synth_dataset(5, 6, 30, 2, 0.12, 0.05, 29);
  const CostModel cm(CostKind::L1, 6);
  const auto tm = ThresholdModel::constant(0.12);
  SolverParams p;
  p.delta = 0.05;
  p.tol = 1e-7;
  p.max_sweeps = 12;
  p.seed = 29;
  const LearnResult r = learn_batch(data, cm, tm, p);
  auto [kept, dropped] = filter_samples(data, tm);
  const StationarityReport rep =
      stationarity_residual(r.D, kept, cm, tm, p);
  const double fp = fixed_point_residual(r.D, kept, cm, tm, p);
  // both diagnostics should classify the point the same way
  CHECK((rep.residual <= 1e-2) == (fp <= 1e-1));
}
