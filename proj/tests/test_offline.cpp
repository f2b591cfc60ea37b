#include <cmath>
#include <sstream>

#include "doctest.h"
#include "drsub/errors.hpp"
#include "drsub/offline.hpp"
#include "objective_oracles.hpp"

using namespace drsub;

namespace {

double grid_opt(const Objective& F, const HPolytope& body, double step = 0.05) {
  return oracle::grid_max(
             F.dim(), step, [&](const Vec& x) { return F.value(x); },
             [&](const Vec& x) { return body.contains(x, 1e-12); })
      .first;
}

// A general (not down-closed) body for the D = {0} cases: a random packing
// polytope with a lower bound on the total.
HPolytope general_body(std::size_t n, Rng& rng) {
  std::vector<DenseRow> rows;
  DenseRow pack;
  for (std::size_t j = 0; j < n; ++j) pack.a.push_back(rng.uniform(0.3, 1.0));
  pack.b = 1.0;
  rows.push_back(pack);
  DenseRow floor_row;
  floor_row.a.assign(n, -1.0);
  floor_row.b = -rng.uniform(0.1, 0.5);
  rows.push_back(floor_row);
  return HPolytope(n, rows, false);
}

QuadraticObjective toy_quadratic(std::size_t n, Rng& rng) {
  Matrix H(n);
  Vec h(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) H(i, j) = H(j, i) = -rng.uniform();
    h[i] = rng.uniform(0.0, 1.5);
  }
  // Offset keeps F >= 0 on the cube.
  Vec u(n, 1.0);
  double M = qp_offset(H, h, u);
  return QuadraticObjective(H, h, M + 0.1 * std::abs(M) + 0.01);
}

}  // namespace

TEST_CASE("epsilon and t_s snapping") {
  CHECK(snap_epsilon(0.3) == doctest::Approx(0.25));
  CHECK(snap_epsilon(0.25) == 0.25);
  CHECK(snap_epsilon(0.01) == doctest::Approx(0.01));
  CHECK(snap_epsilon_hybrid(0.05) == doctest::Approx(1.0 / 30.0));
  CHECK(snap_epsilon_hybrid(0.01) == doctest::Approx(0.01));
  CHECK(snap_t_s(0.37, 0.1) == doctest::Approx(0.3));
  CHECK(snap_t_s(0.3, 0.1) == doctest::Approx(0.3));
  CHECK_THROWS_AS(snap_epsilon(0.0), ArgumentError);
  CHECK_THROWS_AS(snap_t_s(1.5, 0.1), ArgumentError);
}

TEST_CASE("theorem1 examples") {
  CHECK(std::abs(theorem1_value(1, 1, 1, 0, 0, 1) - std::exp(-1.0)) <= 1e-12);
  const double l2 = std::log(2.0);
  for (double m : {0.0, 0.3}) CHECK(std::abs(theorem1_value(1, 0, 0, m, l2, l2) - 0.25 * (1 - m)) <= 1e-12);
  CHECK(theorem1_bound(0, 0, 0, 0, 0.01).value == 0.0);
  auto b = theorem1_bound(1, 0, 0, 0, 0.001);
  CHECK(b.value == doctest::Approx(0.25).epsilon(1e-5));
  CHECK(b.t_s == doctest::Approx(l2).epsilon(1e-2));
  CHECK(theorem1_bound(1, 1, 1, 0, 0.01).value >= std::exp(-1.0) - 1e-12);
}

TEST_CASE("Alg. 1 basics") {
  Rng rng(1);
  auto inst = make_qp_instance(5, 5, QpDistribution::kUniform, 4);
  const auto& F = *inst.objective;
  Trace t = run_alg1(F, inst.decomposition, 0.05, 0.0);
  CHECK(t.iters.size() == 21);
  CHECK(t.violations.empty());
  CHECK(verify_trace(t, inst.decomposition) == 0);
  CHECK_THROWS_AS(run_alg1(F, inst.decomposition, 0.05, 1e6), InfeasibleError);
  try {
    run_alg1(F, inst.decomposition, 0.05, 1e6);
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("growth constraint") != std::string::npos);
  }
}

// The baseline here uses the same (1 - z) damped update as Alg. 1.
TEST_CASE("Alg. 1 with the right F_p1 matches the down-closed baseline on a simplex") {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    auto F = toy_quadratic(3, rng);
    HPolytope simplex = HPolytope::sum_band(3, 0.0, 1.0);
    Decomposition dec(HPolytope::origin(3), simplex);
    double Fp1 = grid_opt(F, simplex, 0.05);
    Trace fw = run_fw_downclosed(F, simplex, 0.25, FwRule::kMeasured);
    Trace a1 = run_alg1(F, dec, 0.25, Fp1);
    CHECK(a1.best_value >= fw.best_value - 1e-6);
  }
}

TEST_CASE("Alg. 1 invariants on random QP instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = make_qp_instance(3 + seed % 8, 4, QpDistribution::kExponential, seed);
    Trace t = run_alg1(*inst.objective, inst.decomposition, 0.1, 0.0);
    CHECK(verify_trace(t, inst.decomposition) == 0);
    CHECK(t.violations.empty());
  }
}

TEST_CASE("Alg. 2 with t_s = 0 follows measured continuous greedy") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto inst = make_qp_instance(6, 6, QpDistribution::kUniform, 100 + seed);
    Trace a = run_alg2(*inst.objective, inst.decomposition, 0.02, 0.0);
    Trace b = run_fw_downclosed(*inst.objective, inst.decomposition.down(), 0.02, FwRule::kMeasured);
    REQUIRE(a.iters.size() == b.iters.size());
    for (std::size_t i = 0; i < a.iters.size(); ++i)
      for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(a.iters[i].z[j] - b.iters[i].z[j]) <= 1e-9);
    CHECK(std::abs(a.iters.back().F_w - b.iters.back().F_w) <= 1e-9);
  }
}

TEST_CASE("Alg. 2 boundary, potential and invariants") {
  Rng rng(3);
  auto inst = make_qp_instance(4, 4, QpDistribution::kUniform, 9);
  const auto& F = *inst.objective;
  Trace t1 = run_alg2(F, inst.decomposition, 0.05, 1.0);
  CHECK(t1.first_admissible == 30);
  CHECK(t1.best_index == 30);

  // General N so that phase one does real work.
  HPolytope N = general_body(4, rng);
  Decomposition dec(N, HPolytope::sum_band(4, 0.0, 0.6));
  for (double ts : {0.0, 0.3, 0.7, 1.0}) {
    Trace t = run_alg2(F, dec, 0.05, ts);
    CHECK(t.violations.empty());
    CHECK(verify_trace(t, dec) == 0);
    auto pot = potential_check(t, F.beta(), dec.diameter_upper());
    CHECK(pot.violations == 0);
    Vec bsf = t.best_so_far();
    for (std::size_t i = 1; i < bsf.size(); ++i) CHECK(bsf[i] >= bsf[i - 1]);
  }
}

TEST_CASE("down-closed recovery on tiny QPs") {
  const double e = std::exp(-1.0);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    std::size_t n = 1 + seed % 3;
    auto inst = make_qp_instance(n, n, QpDistribution::kUniform, 500 + seed);
    const auto& F = *inst.objective;
    double opt = grid_opt(F, inst.decomposition.down());
    auto g = run_alg2_grid(F, inst.decomposition, 0.05);
    Trace fw = run_fw_downclosed(F, inst.decomposition.down(), 0.05);
    CHECK(g.best.best_value >= (e - 0.1) * opt);
    CHECK(fw.best_value >= (e - 0.1) * opt);
    auto bound = theorem1_bound(opt, opt, opt, 0.0, 0.05);
    CHECK(g.best.best_value >= bound.value - 0.1 * opt);
    for (double v : g.values) CHECK(g.best.best_value >= v);
  }
}

TEST_CASE("general-body recovery on tiny instances") {
  Rng rng(4);
  for (int trial = 0; trial < 6; ++trial) {
    std::size_t n = 1 + trial % 3;
    auto F = toy_quadratic(n, rng);
    HPolytope N = general_body(n, rng);
    Decomposition dec(N, HPolytope::origin(n));
    double opt = grid_opt(F, N);
    auto g = run_alg2_grid(F, dec, 0.05);
    CHECK(g.best.best_value >= (0.25 * (1 - dec.m()) - 0.1) * opt);
    Trace fw = run_fw_general(F, dec, 0.05);
    CHECK(verify_trace(fw, dec) == 0);
  }
}

TEST_CASE("fw_general on a singleton and with m = 0") {
  HPolytope point(2, {{Vec{1, 0}, 0.3, true}, {Vec{0, 1}, 0.6, true}}, false);
  Decomposition dec(point, HPolytope::origin(2));
  Rng rng(5);
  auto F = toy_quadratic(2, rng);
  Trace t = run_fw_general(F, dec, 0.1);
  CHECK(t.best_point()[0] == doctest::Approx(0.3));
  CHECK(t.best_point()[1] == doctest::Approx(0.6));

  for (int trial = 0; trial < 5; ++trial) {
    std::size_t n = 1 + trial % 3;
    auto G = toy_quadratic(n, rng);
    HPolytope D = HPolytope::sum_band(n, 0.0, rng.uniform(0.5, 1.5));
    Decomposition d2(HPolytope::origin(n), D);
    double opt = grid_opt(G, D);
    Trace a = run_fw_general(G, d2, 0.05);
    Trace b = run_fw_general(G, d2, 0.05);
    CHECK(a.best_value >= (0.25 - 0.1) * opt);
    CHECK(a.best_value == b.best_value);
  }
}

TEST_CASE("Alg. 3 invariants and head-to-head with Alg. 2") {
  Rng rng(6);
  HPolytope N = general_body(5, rng);
  auto inst = make_qp_instance(5, 5, QpDistribution::kExponential, 77);
  Decomposition dec(N, inst.decomposition.down());
  for (double ts : {0.0, 0.5, 1.0}) {
    Trace t = run_alg3(*inst.objective, dec, 0.05, ts);
    CHECK(t.violations.empty());
    CHECK(verify_trace(t, dec) == 0);
    CHECK(t.first_admissible == 0);
  }
  int close = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto q = make_qp_instance(4, 4, QpDistribution::kUniform, 900 + seed);
    auto a3 = run_alg3_grid(*q.objective, q.decomposition, 0.05);
    auto a2 = run_alg2_grid(*q.objective, q.decomposition, 0.05);
    std::vector<Vec> cands{a3.best.best_point(), a2.best.best_point()};
    auto opt = reference_opt(*q.objective, q.decomposition, cands, 10, rng);
    if (a3.best.best_value >= a2.best.best_value - 0.02 * opt.value) ++close;
  }
  CHECK(close >= 16);
}

TEST_CASE("reference_opt never reports less than its candidates") {
  Rng rng(7);
  auto q = make_qp_instance(3, 3, QpDistribution::kUniform, 5);
  Trace fw = run_fw_downclosed(*q.objective, q.decomposition.down(), 0.05);
  auto est = reference_opt(*q.objective, q.decomposition, {fw.best_point()}, 20, rng);
  CHECK(est.value >= fw.best_value);
  double opt = grid_opt(*q.objective, q.decomposition.down(), 0.02);
  CHECK(est.value >= opt - 1e-3);
  CHECK(q.decomposition.down().contains(est.point, 1e-7));
}

TEST_CASE("trace serialization") {
  auto q = make_qp_instance(3, 3, QpDistribution::kUniform, 5);
  Trace t = run_alg3(*q.objective, q.decomposition, 0.1, 0.5);
  t.seed = 5;
  std::ostringstream os;
  write_trace_csv(os, t);
  std::string s = os.str();
  CHECK(s.rfind("variant,seed,eps,t_s,i,F_w,F_z,best_so_far\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + static_cast<long>(t.iters.size()));
  std::string j = trace_summary_json(t);
  CHECK(j.find("\"invariant_violations\":0") != std::string::npos);
}
