#include <cmath>

#include "doctest.h"
#include "drsub/errors.hpp"
#include "drsub/polytope.hpp"

using namespace drsub;

TEST_CASE("construction certifies non-emptiness") {
  CHECK_THROWS_AS(HPolytope(2, {{Vec{1, 1}, 3.0, false}, {Vec{-1, -1}, -2.5, false}}, false),
                  InfeasibleError);
  // Down-closed declaration requires the origin.
  CHECK_THROWS_AS(HPolytope(2, {{Vec{-1, -1}, -0.1, false}}, true), ArgumentError);
  CHECK(HPolytope::sum_band(3, 0.0, 0.9).down_closed());
  CHECK_FALSE(HPolytope::sum_band(3, 0.1, 1.0).down_closed());
}

TEST_CASE("min_linf_point examples") {
  {
    auto [x, t] = min_linf_point(HPolytope::sum_band(2, 0.1, 0.1));
    CHECK(t == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(x[0] == doctest::Approx(0.05));
    CHECK(x[1] == doctest::Approx(0.05));
  }
  {
    auto [x, t] = min_linf_point(HPolytope::origin(3));
    CHECK(t == 0.0);
    CHECK(x == Point::zeros(3));
  }
  {
    HPolytope P(2, {{Vec{1, 0}, 0.3, true}}, false);
    auto [x, t] = min_linf_point(P);
    CHECK(t == doctest::Approx(0.3));
    CHECK(x[0] == doctest::Approx(0.3));
    CHECK(x[1] <= 0.3 + 1e-12);
  }
}

TEST_CASE("min_linf_point agrees with grid search on tiny bodies") {
  Rng rng(5);
  for (int trial = 0; trial < 15; ++trial) {
    int n = 2 + static_cast<int>(rng.below(2));
    std::vector<DenseRow> rows;
    // A lower-bound row makes the minimum non-trivial.
    Vec a(n);
    for (double& v : a) v = -rng.uniform(0.2, 1.0);
    rows.push_back({a, -rng.uniform(0.1, 0.6), false});
    Vec c(n);
    for (double& v : c) v = rng.uniform(-0.5, 1.0);
    rows.push_back({c, 1.0, false});
    std::unique_ptr<HPolytope> P;
    try {
      P = std::make_unique<HPolytope>(n, rows, false);
    } catch (const InfeasibleError&) {
      continue;
    }
    auto [x, t] = min_linf_point(*P);
    CHECK(P->violation(x) <= 1e-8);
    const double step = 0.01;
    const int k = 101;
    double best = 2.0;
    Vec p(n);
    int total = 1;
    for (int i = 0; i < n; ++i) total *= k;
    for (int idx = 0; idx < total; ++idx) {
      int r = idx;
      for (int i = 0; i < n; ++i) {
        p[i] = step * (r % k);
        r /= k;
      }
      if (P->violation(p) <= 1e-12) best = std::min(best, linf_norm(p));
    }
    CHECK(t <= best + 1e-9);
    CHECK(t >= best - 0.01 - 1e-9);
  }
}

TEST_CASE("projection examples") {
  HPolytope box = HPolytope::unit_box(2);
  Point p = project(box, Vec{1.5, -0.2});
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 0.0);

  HPolytope half(2, {{Vec{1, 1}, 1.0, false}}, true);
  Point q = project(half, Vec{1.0, 1.0});
  CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(q[1] == doctest::Approx(0.5).epsilon(1e-9));

  Vec inside{0.2, 0.3};
  Point r = project(half, inside);
  CHECK(std::abs(r[0] - 0.2) <= 1e-10);
  CHECK(std::abs(r[1] - 0.3) <= 1e-10);
}

TEST_CASE("projection matches the closed form for a hyperplane inside the box") {
  HPolytope plane = HPolytope::sum_band(4, 2.0, 2.0);
  Point p = project(plane, Vec{0.9, 0.2, 0.6, 0.1});  // shift by +0.05
  Vec expect{0.95, 0.25, 0.65, 0.15};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(p[i] - expect[i]) <= 1e-9);
}

TEST_CASE("projection is idempotent and non-expansive") {
  Rng rng(99);
  HPolytope P(4,
              {{Vec{1, 1, 1, 1}, 1.5, false},
               {Vec{1, -1, 0, 0.5}, 0.2, false},
               {Vec{0, 1, 1, 0}, 0.4, true}},
              false);
  Projector proj(P.system());
  for (int trial = 0; trial < 100; ++trial) {
    Vec y(4), y2(4);
    for (int i = 0; i < 4; ++i) {
      y[i] = rng.uniform(-1, 2);
      y2[i] = rng.uniform(-1, 2);
    }
    Vec a = project(P.system(), y);
    Vec b = project(P.system(), y2);
    CHECK(P.violation(a) <= 1e-8);
    CHECK(l2_distance(a, b) <= l2_distance(y, y2) + 1e-8);
    Vec aa = project(P.system(), a);
    CHECK(l2_distance(a, aa) <= 1e-8);
    // Warm-started projector agrees with a cold start.
    Vec w = proj.project(y);
    CHECK(l2_distance(w, a) <= 1e-8);
  }
}

// Optimality of a projection x of y: <y - x, v - x> <= 0 for every feasible
// v. LP vertices under random objectives give a spread of such v.
TEST_CASE("projection satisfies the variational inequality on dense correlated rows") {
  Rng rng(2024);
  for (int inst = 0; inst < 10; ++inst) {
    const int n = 10;
    std::vector<DenseRow> rows;
    Vec base(n);
    for (double& v : base) v = rng.uniform(0.2, 1.0);
    for (int k = 0; k < 8; ++k) {
      Vec a(n);
      for (int j = 0; j < n; ++j) a[j] = base[j] + 0.05 * rng.uniform();
      rows.push_back({a, rng.uniform(0.8, 1.5), false});
    }
    HPolytope P(n, rows, true);
    LinearProgram lp;
    static_cast<LinearSystem&>(lp) = P.system();
    for (int trial = 0; trial < 5; ++trial) {
      Vec y(n);
      for (double& v : y) v = rng.uniform(-2, 3);
      Vec x = project(P.system(), y);
      CHECK(P.violation(x) <= 1e-8);
      for (int s = 0; s < 10; ++s) {
        lp.objective.assign(n, 0.0);
        for (double& c : lp.objective) c = rng.uniform(-1, 1);
        Vec v = solve_lp(lp).x;
        double ip = 0.0;
        for (int j = 0; j < n; ++j) ip += (y[j] - x[j]) * (v[j] - x[j]);
        CHECK(ip <= 1e-8);
      }
    }
  }
}

TEST_CASE("projection reports non-convergence") {
  HPolytope P(3, {{Vec{1, 1, 1}, 1.0, true}, {Vec{1, -1, 0}, 0.0, true}}, false);
  ProjectionOptions opt;
  opt.max_iters = 1;
  CHECK_THROWS_AS(project(P.system(), Vec{5, -3, 2}, opt), ConvergenceError);
}

TEST_CASE("validate_down_closed") {
  Rng rng(3);
  auto r1 = validate_down_closed(HPolytope::sum_band(4, 0.0, 0.9), 200, rng);
  CHECK(r1.violations == 0);
  auto r2 = validate_down_closed(HPolytope::sum_band(4, 0.1, 0.1), 200, rng);
  CHECK(r2.violations > 0);
  auto r3 = validate_down_closed(HPolytope::unit_box(4), 200, rng);
  CHECK(r3.violations == 0);
}

TEST_CASE("diameter_upper examples") {
  Decomposition box(HPolytope::origin(4), HPolytope::unit_box(4));
  CHECK(box.diameter_upper() == doctest::Approx(2.0));
  Decomposition l1(HPolytope::origin(2), HPolytope::sum_band(2, 0.0, 1.0));
  CHECK(l1.diameter_upper() == doctest::Approx(std::sqrt(2.0)));
  HPolytope single(2, {{Vec{1, 0}, 0.3, true}, {Vec{0, 1}, 0.6, true}}, false);
  Decomposition s(single, HPolytope::origin(2));
  CHECK(s.diameter_upper() == doctest::Approx(0.0));
  CHECK(s.m() == doctest::Approx(0.6));
}

TEST_CASE("decomposition membership and sum-body helpers") {
  Decomposition dec(HPolytope::sum_band(3, 0.1, 0.1), HPolytope::sum_band(3, 0.0, 0.9));
  CHECK(dec.m() == doctest::Approx(0.1 / 3));
  CHECK(dec.membership_residual(Vec{0.2, 0.2, 0.1}) <= 1e-9);
  CHECK(dec.membership_residual(Vec{0.02, 0.02, 0.01}) > 1e-3);
  CHECK(dec.membership_residual(Vec{0.9, 0.9, 0.0}) > 1e-3);
  Vec v = dec.maximize_over_sum(Vec{1.0, -1.0, 0.5});
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(0.0));
  Vec low = dec.min_linf_point_of_sum();
  CHECK(linf_norm(low) == doctest::Approx(0.1 / 3));
  CHECK_THROWS_AS(Decomposition(HPolytope::unit_box(3), HPolytope::sum_band(3, 0.1, 0.2)),
                  ArgumentError);
}
