// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "rmmb/rng.hpp"
#include "rmmb/solver.hpp"
#include "rmmb/socp.hpp"

using namespace rmmb;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SocConstraint ball(int n, double radius) {
  SocConstraint soc;
  soc.A = MatrixXd::Identity(n, n);
  soc.d = VectorXd::Zero(n);
  soc.g = VectorXd::Zero(n);
  soc.h = radius;
  return soc;
}

LinearConstraint row(const VectorXd& a, double rhs,
                     LinearConstraint::Kind kind =
                         LinearConstraint::Kind::LessEqual) {
  LinearConstraint lc;
  lc.a = a;
  lc.rhs = rhs;
  lc.kind = kind;
  return lc;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("box LP hits the sign corner") {
  // min c^T x over the unit box.
  ConeProgram p;
  p.n_vars = 3;
  p.c = (VectorXd(3) << 1.5, -2.0, 0.25).finished();
  for (int i = 0; i < 3; ++i) {
    VectorXd e = VectorXd::Zero(3);
    e(i) = 1.0;
    p.linear.push_back(row(e, 1.0));
    p.linear.push_back(row(-e, 1.0));
  }
  const auto out = solve(p, {});
  REQUIRE(out.ok());
  CHECK(out.x(0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(out.x(1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out.x(2) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(out.objective == doctest::Approx(-3.75).epsilon(1e-7));
  CHECK(max_violation(p, out.x) <= 1e-7);
}

TEST_CASE("ball projection in closed form") {
  ConeProgram p;
  p.n_vars = 4;
  p.c = (VectorXd(4) << 1, -2, 3, 0.5).finished();
  p.socs.push_back(ball(4, 2.5));
  const auto out = solve(p, {});
  REQUIRE(out.ok());
  const VectorXd want = -2.5 * p.c / p.c.norm();
  CHECK((out.x - want).norm() < 1e-6);
  CHECK(out.objective == doctest::Approx(-2.5 * p.c.norm()).epsilon(1e-8));
}

TEST_CASE("shifted and weighted cone") {
  // min x1 s.t. ||(x1 - 1, 2 x2)|| <= x1 + 1: parabola-like region,
  // minimum at the vertex where x2 = 0 and x1 >= 0 tightest at x1 = 0.
  ConeProgram p;
  p.n_vars = 2;
  p.c = (VectorXd(2) << 1, 0).finished();
  SocConstraint soc;
  soc.A = (MatrixXd(2, 2) << 1, 0, 0, 2).finished();
  soc.d = (VectorXd(2) << -1, 0).finished();
  soc.g = (VectorXd(2) << 1, 0).finished();
  soc.h = 1.0;
  p.socs.push_back(soc);
  const auto out = solve(p, {});
  REQUIRE(out.ok());
  CHECK(out.objective == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("equality-constrained minimum norm") {
  // min r s.t. ||x|| <= r, A x = b: r* = ||pseudoinverse solution||.
  Philox rng(99);
  MatrixXd A(2, 4);
  VectorXd b(2);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 4; ++j) A(i, j) = rng.next_gaussian();
    b(i) = rng.next_gaussian();
  }
  const double want = A.completeOrthogonalDecomposition().solve(b).norm();

  ConeProgram p;
  p.n_vars = 5;  // x (4), r
  p.c = VectorXd::Zero(5);
  p.c(4) = 1.0;
  for (int i = 0; i < 2; ++i) {
    VectorXd a = VectorXd::Zero(5);
    a.head(4) = A.row(i);
    p.linear.push_back(row(a, b(i), LinearConstraint::Kind::Equal));
  }
  SocConstraint soc;
  soc.A = MatrixXd::Zero(4, 5);
  soc.A.block(0, 0, 4, 4).setIdentity();
  soc.d = VectorXd::Zero(4);
  soc.g = VectorXd::Zero(5);
  soc.g(4) = 1.0;
  soc.h = 0.0;
  p.socs.push_back(soc);
  const auto out = solve(p, {});
  REQUIRE(out.ok());
  CHECK(out.objective == doctest::Approx(want).epsilon(1e-7));
  CHECK((A * out.x.head(4) - b).norm() < 1e-7);
}

TEST_CASE("matches brute-force grid search on random 2-d programs") {
  for (int rep = 0; rep < 12; ++rep) {
    Philox rng(3000 + rep);
    ConeProgram p;
    p.n_vars = 2;
    p.c = (VectorXd(2) << 2 * rng.next_double() - 1,
           2 * rng.next_double() - 1).finished();
    const double radius = 0.5 + 1.5 * rng.next_double();
    p.socs.push_back(ball(2, radius));
    for (int k = 0; k < 2; ++k) {
      VectorXd a(2);
      a << 2 * rng.next_double() - 1, 2 * rng.next_double() - 1;
      p.linear.push_back(row(a, 0.2 + rng.next_double()));  // keeps 0 inside
    }
    const auto out = solve(p, {});
    REQUIRE(out.ok());
    CHECK(max_violation(p, out.x) <= 1e-7);

    const int steps = 801;
    double best = 1e300;
    for (int i = 0; i < steps; ++i) {
      for (int j = 0; j < steps; ++j) {
        VectorXd x(2);
        x << -radius + 2 * radius * i / (steps - 1.0),
            -radius + 2 * radius * j / (steps - 1.0);
        bool feas = x.norm() <= radius;
        for (const auto& lc : p.linear) {
          feas = feas && lc.a.dot(x) <= lc.rhs;
        }
        if (feas) best = std::min(best, p.c.dot(x));
      }
    }
    REQUIRE(best < 1e299);
    const double cell = 2 * radius / (steps - 1.0) * p.c.lpNorm<1>();
    CHECK(out.objective <= best + 1e-6);
    CHECK(out.objective >= best - cell - 1e-6);
  }
}

TEST_CASE("detects linear and conic infeasibility") {
  {
    ConeProgram p;
    p.n_vars = 1;
    p.c = VectorXd::Ones(1);
    p.linear.push_back(row(-VectorXd::Ones(1), -1.0));  // x >= 1
    p.linear.push_back(row(VectorXd::Ones(1), 0.0));    // x <= 0
    CHECK(solve(p, {}).status == SolveStatus::Infeasible);
  }
  {
    ConeProgram p;
    p.n_vars = 2;
    p.c = VectorXd::Ones(2);
    p.socs.push_back(ball(2, 1.0));
    VectorXd e0 = VectorXd::Zero(2);
    e0(0) = -1.0;
    p.linear.push_back(row(e0, -2.0));  // x0 >= 2 outside the unit ball
    CHECK(solve(p, {}).status == SolveStatus::Infeasible);
  }
}

TEST_CASE("flags unbounded problems as not optimal") {
  ConeProgram p;
  p.n_vars = 1;
  p.c = -VectorXd::Ones(1);
  p.linear.push_back(row(-VectorXd::Ones(1), 0.0));  // x >= 0, min -x
  const auto out = solve(p, {});
  CHECK_FALSE(out.ok());
  CHECK(out.status != SolveStatus::Infeasible);
}

TEST_CASE("no constraints, zero objective") {
  ConeProgram p;
  p.n_vars = 2;
  p.c = VectorXd::Zero(2);
  const auto out = solve(p, {});
  CHECK(out.ok());
  CHECK(out.objective == doctest::Approx(0.0));
}

TEST_CASE("iteration limit is reported honestly") {
  ConeProgram p;
  p.n_vars = 4;
  p.c = (VectorXd(4) << 1, -2, 3, 0.5).finished();
  p.socs.push_back(ball(4, 2.5));
  SolverOptions opts;
  opts.max_iters = 2;
  const auto out = solve(p, opts);
  CHECK_FALSE(out.ok());
  CHECK(out.iterations <= 2);
}

TEST_CASE("deterministic across repeat solves") {
  ConeProgram p;
  p.n_vars = 3;
  p.c = (VectorXd(3) << 0.3, -1.1, 0.7).finished();
  p.socs.push_back(ball(3, 1.7));
  VectorXd a(3);
  a << 1, 1, 1;
  p.linear.push_back(row(a, 0.4));
  const auto a1 = solve(p, {});
  const auto a2 = solve(p, {});
  REQUIRE(a1.ok());
  CHECK(a1.x == a2.x);
  CHECK(a1.iterations == a2.iterations);
}

TEST_CASE("dropping a constraint can only improve the optimum") {
  for (int rep = 0; rep < 8; ++rep) {
    Philox rng(4000 + rep);
    ConeProgram p;
    p.n_vars = 3;
    p.c = VectorXd::Zero(3);
    for (int i = 0; i < 3; ++i) p.c(i) = 2 * rng.next_double() - 1;
    p.socs.push_back(ball(3, 2.0));
    SocConstraint extra = ball(3, 0.5 + rng.next_double());
    for (int i = 0; i < 3; ++i) extra.d(i) = 0.3 * rng.next_gaussian();
    p.socs.push_back(extra);

    const auto with = solve(p, {});
    ConeProgram q = p;
    q.socs.pop_back();
    const auto without = solve(q, {});
    REQUIRE(with.ok());
    REQUIRE(without.ok());
    CHECK(without.objective <= with.objective + 1e-7);
  }
}

TEST_CASE("solution scales with the data") {
  ConeProgram p;
  p.n_vars = 2;
  p.c = (VectorXd(2) << 3, -4).finished();
  p.socs.push_back(ball(2, 1.0));
  ConeProgram q = p;
  q.socs[0].h = 1000.0;
  const auto small = solve(p, {});
  const auto big = solve(q, {});
  REQUIRE(small.ok());
  REQUIRE(big.ok());
  CHECK(big.objective == doctest::Approx(1000.0 * small.objective)
                             .epsilon(1e-6));
}

TEST_CASE("residual fields are populated and small at optimality") {
  ConeProgram p;
  p.n_vars = 3;
  p.c = (VectorXd(3) << 1, 1, 1).finished();
  p.socs.push_back(ball(3, 1.0));
  const auto out = solve(p, {});
  REQUIRE(out.ok());
  CHECK(out.primal_residual < 1e-8);
  CHECK(out.dual_residual < 1e-8);
  CHECK(out.gap >= 0.0);
  CHECK(out.iterations > 0);
  CHECK(out.seconds >= 0.0);
}

}  // TEST_SUITE
