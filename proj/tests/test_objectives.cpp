#include <cmath>

#include "doctest.h"
#include "drsub/errors.hpp"
#include "drsub/objectives.hpp"
#include "objective_oracles.hpp"

using namespace drsub;

namespace {

Vec interior_point(std::size_t n, Rng& rng) {
  Vec x(n);
  for (double& t : x) t = rng.uniform(0.01, 0.99);
  return x;
}

RevenueObjective random_revenue(std::size_t n, double p_edge, double p, Rng& rng,
                                std::vector<std::vector<double>>* dense = nullptr) {
  std::vector<Edge> edges;
  if (dense) dense->assign(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < p_edge) {
        double w = rng.uniform(0.5, 2.0);
        edges.push_back({int(i), int(j), w});
        if (dense) (*dense)[i][j] = (*dense)[j][i] = w;
      }
  return RevenueObjective(n, edges, p);
}

LocationObjective random_location(std::size_t n, Rng& rng, std::vector<Vec>* Mout = nullptr,
                                  Vec* dout = nullptr) {
  Matrix M(n);
  Vec d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) M(i, j) = std::round(rng.uniform() * 4.0) / 4.0;  // forces ties
    d[i] = rng.uniform(0.0, 0.3) / n;
  }
  if (Mout) {
    Mout->assign(n, Vec(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) (*Mout)[i][j] = M(i, j);
  }
  if (dout) *dout = d;
  return LocationObjective(std::move(M), std::move(d));
}

}  // namespace

TEST_CASE("quadratic examples") {
  Matrix H(2);
  H(0, 0) = H(1, 1) = -1.0;
  QuadraticObjective q(H, {1.0, 1.0}, 0.0);
  CHECK(q.value(Vec{0.5, 0.5}) == doctest::Approx(0.75).epsilon(1e-15));
  Vec g = q.gradient(Vec{0.5, 0.5});
  CHECK(g[0] == doctest::Approx(0.5));
  CHECK(g[1] == doctest::Approx(0.5));
  QuadraticObjective q2(H, {0.3, -0.2}, 2.5);
  CHECK(q2.value(Vec{0, 0}) == 2.5);
  CHECK(q2.gradient(Vec{0, 0}) == Vec{0.3, -0.2});
  CHECK_THROWS_AS(q.value(Vec{0.1}), DimensionError);
  Matrix bad(2);
  bad(0, 1) = bad(1, 0) = 0.5;
  CHECK_THROWS_AS(QuadraticObjective(bad, {0, 0}, 0), ArgumentError);
}

TEST_CASE("finite differences across families") {
  Rng rng(11);
  for (int t = 0; t < 10; ++t) {
    Matrix H(3);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) H(i, j) = H(j, i) = -rng.uniform();
    QuadraticObjective q(H, {rng.uniform(), rng.uniform(), rng.uniform()}, 1.0);
    CHECK(fd_gradient_check(q, interior_point(3, rng)) <= 1e-9);
    auto r = random_revenue(8, 0.5, 0.3, rng);
    CHECK(fd_gradient_check(r, interior_point(8, rng)) <= 1e-5);
    auto l = random_location(7, rng);
    CHECK(fd_gradient_check(l, interior_point(7, rng)) <= 1e-5);
  }
}

TEST_CASE("revenue examples and Monte-Carlo agreement") {
  const double p = 0.3;
  std::vector<Edge> e{{0, 1, 1.0}};
  RevenueObjective r(2, e, p);
  CHECK(r.value(Vec{1, 0}) == doctest::Approx(p).epsilon(1e-14));
  CHECK(r.value(Vec{0, 0}) == 0.0);
  CHECK_THROWS_AS(RevenueObjective(2, e, 1.0), ArgumentError);
  CHECK_THROWS_AS(RevenueObjective(2, std::vector<Edge>{{0, 1, -1.0}}, p), ArgumentError);

  Rng rng(3);
  std::vector<std::vector<double>> W;
  auto obj = random_revenue(5, 0.7, p, rng, &W);
  for (int t = 0; t < 3; ++t) {
    Vec x = interior_point(5, rng);
    auto est = oracle::revenue_monte_carlo(W, p, x, 100000, rng);
    CHECK(std::abs(obj.value(x) - est.mean) <= 3.0 * est.stderr_ + 1e-12);
  }
}

TEST_CASE("revenue is invariant under relabelling") {
  Rng rng(8);
  const std::size_t n = 9;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.4) edges.push_back({int(i), int(j), rng.uniform(0.1, 3.0)});
  std::vector<int> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = int(i);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  std::vector<Edge> moved;
  for (auto e : edges) moved.push_back({perm[e.u], perm[e.v], e.w});
  RevenueObjective a(n, edges, 0.2), b(n, moved, 0.2);
  Vec x = interior_point(n, rng), y(n);
  for (std::size_t i = 0; i < n; ++i) y[perm[i]] = x[i];
  CHECK(a.value(x) == doctest::Approx(b.value(y)).epsilon(1e-13));
}

TEST_CASE("location multilinear extension") {
  Rng rng(21);
  for (std::size_t n : {1u, 3u, 6u, 10u}) {
    std::vector<Vec> M;
    Vec d;
    auto obj = random_location(n, rng, &M, &d);
    CHECK(obj.value(Vec(n, 0.0)) == 0.0);
    auto f = [&](const std::vector<bool>& S) { return oracle::location_set(M, d, S); };
    // Integral points, all of them.
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      Vec x(n);
      std::vector<bool> S(n);
      for (std::size_t j = 0; j < n; ++j) x[j] = S[j] = (mask >> j) & 1;
      double ref = f(S);
      REQUIRE(obj.value(x) == doctest::Approx(ref).epsilon(1e-12));
      REQUIRE(obj.set_value(S) == doctest::Approx(ref).epsilon(1e-12));
    }
    if (n <= 6) {
      for (int t = 0; t < 5; ++t) {
        Vec x = interior_point(n, rng);
        CHECK(obj.value(x) == doctest::Approx(oracle::multilinear(f, x)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("upper_bounds and qp_offset examples") {
  Vec u = upper_bounds({{0.5, 2.0}, {1.0, 1.0}}, Vec{1.0, 1.0});
  CHECK(u[0] == 1.0);
  CHECK(u[1] == 0.5);
  Matrix Z(1);
  CHECK(qp_offset(Z, Vec{-1.0}, Vec{1.0}) == 1.0);
  Matrix H(1);
  H(0, 0) = -2.0;
  CHECK(qp_offset(H, Vec{1.0}, Vec{1.0}) == 0.0);
  Matrix big(21);
  CHECK_THROWS_AS(qp_offset(big, Vec(21, 0.0), Vec(21, 1.0)), ArgumentError);
  CHECK_THROWS_AS(make_qp_instance(21, 3, QpDistribution::kUniform, 1), ArgumentError);
}

TEST_CASE("qp_offset matches a grid search") {
  Rng rng(17);
  for (int t = 0; t < 10; ++t) {
    Matrix H(3);
    Vec h(3), u(3);
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) H(i, j) = H(j, i) = -rng.uniform();
      h[i] = rng.uniform(-1.0, 1.0);
      u[i] = rng.uniform(0.2, 1.0);
    }
    auto neg = [&](const Vec& s) {
      double q = 0.0;
      for (int i = 0; i < 3; ++i) {
        double xi = s[i] * u[i];
        q += h[i] * xi;
        for (int j = 0; j < 3; ++j) q += 0.5 * xi * H(i, j) * s[j] * u[j];
      }
      return -q;
    };
    auto [best, arg] = oracle::grid_max(3, 0.02, neg, [](const Vec&) { return true; });
    CHECK(std::abs(qp_offset(H, h, u) - best) <= 0.02);
  }
}

TEST_CASE("generated QP instances") {
  for (auto dist : {QpDistribution::kUniform, QpDistribution::kExponential}) {
    auto a = make_qp_instance(6, 6, dist, 42);
    auto b = make_qp_instance(6, 6, dist, 42);
    CHECK(a.objective->H().data == b.objective->H().data);
    CHECK(a.objective->h() == b.objective->h());
    CHECK(a.objective->c() == b.objective->c());
    CHECK(a.decomposition.m() == 0.0);
    CHECK(a.decomposition.down().down_closed());
    // Non-negativity over the whole unit cube (scaled box).
    Rng rng(1);
    double lo = INFINITY;
    for (int t = 0; t < 10000; ++t) {
      Vec x(6);
      for (double& v : x) v = rng.uniform();
      lo = std::min(lo, a.objective->value(x));
    }
    CHECK(lo >= -1e-9);
    // Every row of A(u (.) x) <= 1 is tight somewhere along each axis.
    for (std::size_t j = 0; j < 6; ++j) {
      Vec e(6, 0.0);
      e[j] = 1.0;
      CHECK(a.decomposition.down().contains(e));
    }
    CHECK(a.objective->value_upper() >= a.objective->value(Vec(6, 0.5)));
  }
}

TEST_CASE("DR probes and negative control") {
  Rng rng(5);
  auto qp = make_qp_instance(5, 5, QpDistribution::kUniform, 3);
  auto rev = random_revenue(10, 0.4, 0.2, rng);
  auto loc = random_location(8, rng);
  auto gen = make_location_instance(8, rng);
  for (const Objective* o : {static_cast<const Objective*>(qp.objective.get()),
                             static_cast<const Objective*>(&rev), static_cast<const Objective*>(&loc),
                             static_cast<const Objective*>(gen.get())}) {
    auto rep = dr_probe(*o, 1000, rng);
    CHECK(rep.pairs == 1000);
    CHECK(rep.total() == 0);
    CHECK(sampled_lipschitz(*o, 1000, rng) <= o->beta() * (1.0 + 1e-9));
  }
  Matrix H(2);
  H(0, 0) = H(1, 1) = -0.1;
  H(0, 1) = H(1, 0) = 1.0;
  QuadraticObjective bad(H, {0.0, 0.0}, 1.0, false);
  CHECK(dr_probe(bad, 200, rng).gradient_violations > 0);
}

TEST_CASE("subset inequality at r = 2 and 3") {
  Rng rng(9);
  auto qp = make_qp_instance(4, 4, QpDistribution::kExponential, 7);
  auto loc = make_location_instance(4, rng);
  for (const Objective* o : {static_cast<const Objective*>(qp.objective.get()),
                             static_cast<const Objective*>(loc.get())}) {
    for (std::size_t r : {2u, 3u}) {
      for (int t = 0; t < 50; ++t) {
        std::vector<Point> xs;
        Vec p(r);
        for (std::size_t i = 0; i < r; ++i) {
          Vec v(4);
          for (double& c : v) c = rng.uniform();
          xs.emplace_back(v);
          p[i] = rng.uniform();
        }
        auto sb = subset_bound(*o, xs, p);
        CHECK(sb.lhs >= sb.rhs - 1e-9);
      }
    }
  }
}

TEST_CASE("location generator keeps F non-negative") {
  Rng rng(2);
  auto loc = make_location_instance(12, rng);
  for (int t = 0; t < 2000; ++t) {
    Vec x(12);
    for (double& v : x) v = rng.uniform();
    REQUIRE(loc->value(x) >= -1e-12);
  }
}

TEST_CASE("erdos_renyi edge count") {
  Rng rng(4);
  auto e = erdos_renyi(200, 0.05, rng);
  double mean = 0.05 * 200 * 199 / 2.0;
  double sd = std::sqrt(mean * 0.95);
  CHECK(std::abs(double(e.size()) - mean) <= 4 * sd);
}
