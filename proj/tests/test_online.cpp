#include <cmath>
#include <memory>
#include <sstream>

#include "doctest.h"
#include "drsub/errors.hpp"
#include "drsub/lp.hpp"
#include "drsub/offline.hpp"
#include "drsub/online.hpp"

using namespace drsub;

namespace {

std::shared_ptr<QuadraticObjective> random_quadratic(std::size_t n, Rng& rng) {
  Matrix H(n);
  Vec h(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) H(i, j) = H(j, i) = -rng.uniform();
    h[i] = rng.uniform(0.0, 1.5);
  }
  double M = qp_offset(H, h, Vec(n, 1.0));
  return std::make_shared<QuadraticObjective>(H, h, M + 0.1 * std::abs(M) + 0.01);
}

std::vector<ObjectivePtr> random_stream(std::size_t n, int L, Rng& rng) {
  std::vector<ObjectivePtr> s;
  for (int l = 0; l < L; ++l) s.push_back(random_quadratic(n, rng));
  return s;
}

// Regret of a played sequence against the best fixed point of `sys`, found by
// one LP on the summed reward.
double regret(const LinearSystem& sys, const std::vector<Vec>& played, const std::vector<Vec>& rewards) {
  const std::size_t n = rewards.front().size();
  LinearProgram lp;
  static_cast<LinearSystem&>(lp) = sys;
  lp.objective.assign(n, 0.0);
  double got = 0.0;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    for (std::size_t j = 0; j < n; ++j) lp.objective[j] += rewards[t][j];
    got += dot(rewards[t], played[t]);
  }
  return solve_lp(lp).objective - got;
}

}  // namespace

TEST_CASE("FTRL: zero rewards keep the anchor") {
  LinearSystem box = HPolytope::unit_box(3).system();
  FtrlOptimizer olo(box, Vec{0.2, 0.5, 0.9}, 10, std::sqrt(3.0), 1.0);
  for (int t = 0; t < 10; ++t) {
    Vec u = olo.next();
    CHECK(u == Vec{0.2, 0.5, 0.9});
    olo.feed(Vec(3, 0.0));
  }
}

TEST_CASE("FTRL: protocol errors") {
  LinearSystem box = HPolytope::unit_box(2).system();
  FtrlOptimizer olo(box, Vec{0, 0}, 5, std::sqrt(2.0));
  CHECK_THROWS_AS(olo.feed(Vec{1, 1}), ProtocolError);
  olo.next();
  olo.feed(Vec{1, 1});
  CHECK_THROWS_AS(olo.feed(Vec{1, 1}), ProtocolError);
  CHECK_THROWS_AS(FtrlOptimizer(box, Vec{0, 0}, 0, 1.0), ArgumentError);
}

TEST_CASE("FTRL: constant reward converges to the LP optimum") {
  HPolytope simplex = HPolytope::sum_band(4, 0.0, 1.0);
  const Vec d{0.3, -0.2, 0.9, 0.5};
  const int L = 400;
  const double diam = std::sqrt(2.0), G = l2_norm(d);
  FtrlOptimizer olo(simplex.system(), Vec(4, 0.0), L, diam, G);
  Vec last;
  for (int t = 0; t < L; ++t) {
    last = olo.next();
    CHECK(simplex.violation(last) <= 1e-8);
    olo.feed(d);
  }
  LinearProgram lp;
  static_cast<LinearSystem&>(lp) = simplex.system();
  lp.objective = d;
  double best = solve_lp(lp).objective;
  CHECK(best - dot(d, last) <= diam * G / std::sqrt(L) + 1e-9);
}

TEST_CASE("FTRL: regret on random sign rewards over the unit box") {
  Rng rng(5);
  const int n = 6, L = 1000;
  LinearSystem box = HPolytope::unit_box(n).system();
  const double diam = std::sqrt(n), G = std::sqrt(n);
  FtrlOptimizer olo(box, Vec(n, 0.5), L, diam, G);
  std::vector<Vec> played, rewards;
  Vec total(n, 0.0);
  for (int t = 0; t < L; ++t) {
    played.push_back(olo.next());
    Vec d(n);
    for (double& v : d) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) total[j] += d[j];
    rewards.push_back(d);
    olo.feed(d);
  }
  // Best fixed point of the box: 1 where the total is positive.
  double best = 0.0, got = 0.0;
  for (int j = 0; j < n; ++j) best += std::max(total[j], 0.0);
  for (int t = 0; t < L; ++t) got += dot(rewards[t], played[t]);
  CHECK(best - got <= olo.regret_bound());
  CHECK(regret(box, played, rewards) == doctest::Approx(best - got).epsilon(1e-9));
}

TEST_CASE("FTRL: adversarial drift on the simplex stays within the bound") {
  HPolytope simplex = HPolytope::sum_band(3, 0.0, 1.0);
  const int L = 300;
  FtrlOptimizer olo(simplex.system(), Vec(3, 0.0), L, std::sqrt(2.0), 1.0);
  std::vector<Vec> played, rewards;
  for (int t = 0; t < L; ++t) {
    Vec u = olo.next();
    played.push_back(u);
    // Reward the coordinate the learner currently plays least.
    Vec d(3, 0.0);
    int k = static_cast<int>(std::min_element(u.begin(), u.end()) - u.begin());
    d[k] = 1.0;
    rewards.push_back(d);
    olo.feed(d);
  }
  CHECK(regret(simplex.system(), played, rewards) <= olo.regret_bound() + 1e-6);
}

TEST_CASE("FTRL: warm-up estimate of G'") {
  LinearSystem box = HPolytope::unit_box(2).system();
  FtrlOptimizer olo(box, Vec{0, 0}, 8, 2.0);
  CHECK(olo.eta() == 0.0);
  olo.next();
  olo.feed(Vec{0, 0});
  CHECK(olo.eta() == 0.0);
  olo.next();
  olo.feed(Vec{3, 4});
  CHECK(olo.grad_bound() == doctest::Approx(5.0));
  CHECK(olo.eta() == doctest::Approx(2.0 / (5.0 * 4.0)));
}

TEST_CASE("doubling wrapper keeps regret within the epoch sum") {
  Rng rng(8);
  const int n = 4, L = 500;
  LinearSystem box = HPolytope::unit_box(n).system();
  DoublingOlo olo(box, Vec(n, 0.5), std::sqrt(n), std::sqrt(n));
  std::vector<Vec> played, rewards;
  for (int t = 0; t < L; ++t) {
    played.push_back(olo.next());
    Vec d(n);
    for (double& v : d) v = rng.uniform(-1, 1) + 0.2;
    rewards.push_back(d);
    olo.feed(d);
  }
  CHECK(olo.rounds() == L);
  // Sum over epochs 1, 2, 4, ... of D G sqrt(2 len).
  double bound = 0.0;
  for (int len = 1, done = 0; done < L; done += len, len *= 2) bound += n * std::sqrt(2.0 * len);
  CHECK(regret(box, played, rewards) <= bound);
}

TEST_CASE("Hedge examples") {
  Hedge single(1, 10);
  single.update(Vec{0.3});
  CHECK(single.distribution() == Vec{1.0});

  Hedge flat(4, 50);
  for (int t = 0; t < 50; ++t) flat.update(Vec(4, 0.7));
  for (double w : flat.distribution()) CHECK(w == doctest::Approx(0.25).epsilon(1e-14));

  const int L = 1000;
  Hedge two(2, L);
  double expected = 0.0;
  for (int t = 0; t < L; ++t) {
    expected += two.distribution()[0];
    two.update(Vec{1.0, 0.0});
    CHECK(two.distribution()[0] + two.distribution()[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(expected >= L - std::sqrt(L / 2.0 * std::log(2.0)) - 1.0);
  CHECK(two.eta() == doctest::Approx(std::sqrt(8.0 * std::log(2.0) / L)));

  CHECK_THROWS_AS(two.update(Vec{1.1, 0.0}), ArgumentError);
  CHECK_THROWS_AS(two.update(Vec{-0.01, 0.0}), ArgumentError);
  CHECK_NOTHROW(two.update(Vec{1.0 + 1e-10, -1e-10}));
}

TEST_CASE("online hybrid: single stage with t_s = 0") {
  Rng rng(3);
  const std::size_t n = 3;
  Decomposition dec(HPolytope::sum_band(n, 0.2, 0.2), HPolytope::sum_band(n, 0.0, 0.6));
  OnlineHybrid alg(dec, 1.0, 0.0, 20, 1.0);
  REQUIRE(alg.stages() == 1);
  // Independent copy of the stage optimiser, fed the same vectors.
  Vec anchor(2 * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) anchor[j] = dec.y0()[j];
  FtrlOptimizer mirror(dec.joint_system(), anchor, 20, std::sqrt(2.0 * n), 1.0);
  const Vec y0 = dec.y0().coords();
  for (int ell = 0; ell < 20; ++ell) {
    Vec w = alg.step();
    Vec u = mirror.next();
    Vec b(u.begin() + n, u.end());
    Vec expect = psum(y0, b);
    for (std::size_t j = 0; j < n; ++j) CHECK(w[j] == doctest::Approx(expect[j]).epsilon(1e-12));
    auto F = random_quadratic(n, rng);
    alg.feedback(*F);
    mirror.feed(alg.last_feedback()[0]);
  }
}

TEST_CASE("online hybrid: protocol, feedback shape and norms") {
  Rng rng(17);
  const std::size_t n = 4;
  Decomposition dec(HPolytope::sum_band(n, 0.3, 0.3), HPolytope::sum_band(n, 0.0, 0.7));
  OnlineHybrid zero(dec, 0.1, 0.0, 5);
  CHECK_THROWS_AS(zero.feedback(*random_quadratic(n, rng)), ProtocolError);
  zero.step();
  CHECK_THROWS_AS(zero.step(), ProtocolError);
  zero.feedback(*random_quadratic(n, rng));
  for (const Vec& g : zero.last_feedback())
    for (std::size_t j = 0; j < n; ++j) CHECK(g[j] == 0.0);

  OnlineHybrid alg(dec, 0.1, 0.5, 30);
  REQUIRE(alg.phase_one_stages() == 5);
  for (int ell = 0; ell < 30; ++ell) {
    Vec w = alg.step();
    CHECK(alg.last_check().violations == 0);
    CHECK(dec.membership_residual(w) <= 1e-8);
    auto F = random_quadratic(n, rng);
    alg.feedback(*F);
    // G from the points the feedback was actually evaluated at.
    double G = 0.0;
    for (int i = 0; i < alg.stages(); ++i) {
      const Vec& y = alg.stored_y()[i];
      const Vec& z = alg.stored_z()[i];
      G = std::max({G, l2_norm(F->gradient(psum(y, z))), l2_norm(F->gradient(z))});
    }
    for (int i = 0; i < alg.phase_one_stages(); ++i)
      CHECK(l2_norm(alg.last_feedback()[i]) <= std::sqrt(5.0) * std::exp(2.0) * G + 1e-9);
  }
}

TEST_CASE("online runs: empty, determinism, feasibility") {
  Rng rng(21);
  const std::size_t n = 3;
  Decomposition dec(HPolytope::sum_band(n, 0.1, 0.1), HPolytope::sum_band(n, 0.0, 0.9));
  CHECK(run_online_experiment({}, dec, 0.1).records.empty());
  CHECK(run_online_baseline({}, dec, 0.1).records.empty());

  auto stream = random_stream(n, 25, rng);
  OnlineOptions opt;
  opt.t_s = 0.3;
  OnlineRun a = run_online_experiment(stream, dec, 0.1, opt);
  OnlineRun b = run_online_experiment(stream, dec, 0.1, opt);
  std::ostringstream sa, sb;
  write_online_csv(sa, a);
  write_online_csv(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(a.violations == 0);
  CHECK(a.records.size() == 25);
  CHECK(sa.str().rfind("ell,mode,t_s,value_raw,value_norm,cum_value,feasibility_residual\n", 0) == 0);

  OnlineRun base = run_online_baseline(stream, dec, 0.1);
  CHECK(base.violations == 0);
  for (const auto& r : base.records) CHECK(r.feasibility_residual <= 1e-8);
}

TEST_CASE("meta mode is close to the best fixed expert") {
  Rng rng(34);
  const std::size_t n = 3;
  Decomposition dec(HPolytope::sum_band(n, 0.2, 0.2), HPolytope::sum_band(n, 0.0, 0.8));
  const int L = 60;
  auto stream = random_stream(n, L, rng);
  const double eps = 0.25;
  OnlineOptions meta;
  meta.mode = OnlineMode::kMeta;
  OnlineRun run = run_online_experiment(stream, dec, eps, meta);
  double meta_norm = 0.0;
  for (const auto& r : run.records) {
    meta_norm += r.value_norm;
    double s = 0.0;
    for (double w : r.weights) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  const int K = 5;  // grid 0, 1/4, ..., 1
  double best = 0.0;
  for (int k = 0; k < K; ++k) {
    OnlineOptions fixed;
    fixed.t_s = k * eps;
    double v = 0.0;
    for (const auto& r : run_online_experiment(stream, dec, eps, fixed).records) v += r.value_norm;
    best = std::max(best, v);
  }
  CHECK(meta_norm >= best - std::sqrt(L * std::log(K) / 2.0) - 1e-9);

  std::ostringstream os;
  write_online_csv(os, run);
  CHECK(os.str().find(",expert_weights,expected_value") != std::string::npos);
}

TEST_CASE("baseline on a singleton body is constant") {
  Rng rng(2);
  const std::size_t n = 3;
  // N = {x : x = (0.2, 0.3, 0.1)} and D = {0}.
  std::vector<DenseRow> rows;
  for (std::size_t j = 0; j < n; ++j) {
    DenseRow r;
    r.a.assign(n, 0.0);
    r.a[j] = 1.0;
    r.b = 0.1 * (j == 0 ? 2 : j == 1 ? 3 : 1);
    r.eq = true;
    rows.push_back(r);
  }
  Decomposition dec(HPolytope(n, rows, false), HPolytope::origin(n));
  auto stream = random_stream(n, 10, rng);
  OnlineRun run = run_online_baseline(stream, dec, 0.1);
  for (std::size_t l = 0; l < stream.size(); ++l)
    CHECK(run.records[l].value_raw == doctest::Approx(stream[l]->value(Vec{0.2, 0.3, 0.1})).epsilon(1e-7));
}

TEST_CASE("constant stream approaches the offline value") {
  Rng rng(55);
  const std::size_t n = 3;
  Decomposition dec(HPolytope::origin(n), HPolytope::sum_band(n, 0.0, 1.0));
  auto F = random_quadratic(n, rng);
  const int L = 500;
  std::vector<ObjectivePtr> stream(L, F);
  const double eps = 1.0 / 30;
  OnlineOptions opt;
  opt.t_s = 0.0;
  OnlineRun run = run_online_experiment(stream, dec, eps, opt);
  Trace off = run_alg2(*F, dec, eps, 0.0);
  const double online_avg = run.cumulative() / L / F->value_upper();
  const double offline = off.iters.back().F_w / F->value_upper();
  CHECK(std::abs(online_avg - offline) <= 0.05);
}
