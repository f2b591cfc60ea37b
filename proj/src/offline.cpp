#include "drsub/offline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "drsub/errors.hpp"
#include "json.hpp"

namespace drsub {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kAlg1: return "alg1";
    case Variant::kAlg2: return "alg2";
    case Variant::kAlg3: return "alg3";
    case Variant::kFwDown: return "fw_down";
    case Variant::kFwGeneral: return "fw_general";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::kAlg1, Variant::kAlg2, Variant::kAlg3, Variant::kFwDown, Variant::kFwGeneral})
    if (to_string(v) == s) return v;
  throw ArgumentError("unknown solver variant '" + s + "'");
}

double snap_epsilon(double eps) {
  if (!(eps > 0.0 && eps < 1.0) && eps != 1.0) throw ArgumentError("epsilon must lie in (0,1]");
  return 1.0 / std::ceil(1.0 / eps - 1e-9);
}

double snap_epsilon_hybrid(double eps) {
  double e = snap_epsilon(eps);
  return std::min(e, 1.0 / 30.0);
}

double snap_t_s(double t_s, double eps) {
  if (!(t_s >= 0.0 && t_s <= 1.0)) throw ArgumentError("t_s must lie in [0,1]");
  return eps * std::floor(t_s / eps + 1e-9);
}

Vec Trace::best_so_far() const {
  Vec out;
  out.reserve(iters.size());
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& it : iters) {
    best = std::max(best, it.F_w);
    out.push_back(best);
  }
  return out;
}

namespace {

int iteration_count(double eps) { return static_cast<int>(std::lround(1.0 / eps)); }

// LP solutions can sit a rounding error outside their bounds.
Vec clean(const Vec& x, std::size_t from, std::size_t n, const Vec& upper) {
  Vec out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = std::clamp(x[from + j], 0.0, upper[from + j]);
  return out;
}

void record(Trace& t, const Objective& F, int i, Vec y, Vec z, double lp, Vec a, Vec b, Vec c) {
  Iterate it;
  it.i = i;
  it.w = psum(y, z);
  it.F_w = F.value(it.w);
  it.F_z = F.value(z);
  it.y = std::move(y);
  it.z = std::move(z);
  it.lp_value = lp;
  it.a = std::move(a);
  it.b = std::move(b);
  it.c = std::move(c);

  // Norm bounds on the iterate just recorded.
  double shrink = std::pow(1.0 - t.step, i);
  double zb = 1.0 - shrink, wb = 1.0 - shrink * (1.0 - t.m);
  double zn = linf_norm(it.z), wn = linf_norm(it.w);
  if (zn > zb + 1e-9) {
    t.violations.push_back("i=" + std::to_string(i) + ": |z|_inf " + std::to_string(zn) +
                           " exceeds " + std::to_string(zb));
  }
  if (wn > wb + 1e-9) {
    t.violations.push_back("i=" + std::to_string(i) + ": |w|_inf " + std::to_string(wn) +
                           " exceeds " + std::to_string(wb));
  }
  t.iters.push_back(std::move(it));
}

void finish(Trace& t) {
  t.best_index = t.first_admissible;
  t.best_value = t.iters[t.first_admissible].F_w;
  for (int i = t.first_admissible + 1; i < static_cast<int>(t.iters.size()); ++i) {
    if (t.iters[i].F_w > t.best_value) {
      t.best_value = t.iters[i].F_w;
      t.best_index = i;
    }
  }
}

// z + eps (1 - z) (.) b
Vec measured_step(const Vec& z, const Vec& b, double eps) {
  Vec out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] + eps * (1.0 - z[j]) * b[j];
  return out;
}

Vec mix(const Vec& y, const Vec& a, double eps) {
  Vec out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) out[j] = (1.0 - eps) * y[j] + eps * a[j];
  return out;
}

Trace start_trace(Variant v, double eps, double step, double t_s, double m) {
  Trace t;
  t.variant = v;
  t.epsilon = eps;
  t.step = step;
  t.t_s = t_s;
  t.m = m;
  return t;
}

const double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

// --- Alg. 1 --------------------------------------------------------------------

Trace run_alg1(const Objective& F, const Decomposition& dec, double epsilon, double F_p1) {
  check_same_size(F.dim(), dec.dim(), "run_alg1");
  if (!(F_p1 >= 0.0)) throw ArgumentError("run_alg1: F_p1 must be >= 0");
  const double eps = snap_epsilon(epsilon);
  const int K = iteration_count(eps);
  const int n = static_cast<int>(dec.dim());
  Trace t = start_trace(Variant::kAlg1, eps, eps, 0.0, dec.m());

  Vec y = dec.y0().coords(), z(n, 0.0);
  record(t, F, 0, y, z, kNaN, {}, {}, {});
  for (int i = 1; i <= K; ++i) {
    Vec w = psum(y, z);
    Vec gw = F.gradient(w), gz = F.gradient(z);
    double Fz = F.value(z);
    double rhs = std::pow(1.0 - eps, i - 1) * F_p1 - Fz;

    LinearProgram lp(2 * n, 1.0);
    dec.general().append_rows(lp, 0);
    dec.down().append_rows(lp, n);
    SparseRow growth;
    for (int j = 0; j < n; ++j) growth.add(n + j, (1.0 - z[j]) * gz[j]);
    growth.sense = Sense::kGreaterEqual;
    growth.rhs = rhs;
    const int growth_row = static_cast<int>(lp.rows.size());
    lp.rows.push_back(growth);
    for (int j = 0; j < n; ++j) {
      SparseRow r;
      r.add(j, 1.0);
      r.add(n + j, 1.0 - y[j]);
      r.rhs = 1.0;
      lp.rows.push_back(std::move(r));
    }
    for (int j = 0; j < n; ++j) {
      double s = gw[j] * (1.0 - z[j]);
      lp.objective[j] = s;
      lp.objective[n + j] = s * (1.0 - y[j]);
    }
    LpResult res;
    try {
      res = solve_lp(lp);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("run_alg1: iteration " + std::to_string(i) +
                                ": the growth constraint <b (.) (1 - z), grad F(z)> >= " + std::to_string(rhs) +
                                " cannot be met; F_p1 is too large",
                            growth_row, e.residual());
    }
    Vec a = clean(res.x, 0, n, lp.upper), b = clean(res.x, n, n, lp.upper);
    double lhs = growth.eval(Vec(res.x));
    if (lhs < rhs - 1e-7) {
      t.violations.push_back("i=" + std::to_string(i) + ": growth constraint short by " +
                             std::to_string(rhs - lhs));
    }
    y = mix(y, a, eps);
    z = measured_step(z, b, eps);
    record(t, F, i, y, z, res.objective, std::move(a), std::move(b), {});
  }
  t.first_admissible = 0;
  finish(t);
  return t;
}

// --- Alg. 2 --------------------------------------------------------------------

Trace run_alg2(const Objective& F, const Decomposition& dec, double epsilon, double t_s_in) {
  check_same_size(F.dim(), dec.dim(), "run_alg2");
  const double eps = snap_epsilon_hybrid(epsilon);
  const int K = iteration_count(eps);
  const int K1 = static_cast<int>(std::lround(snap_t_s(t_s_in, eps) / eps));
  const double t_s = static_cast<double>(K1) / K;
  const int n = static_cast<int>(dec.dim());
  const double m = dec.m();
  Trace t = start_trace(Variant::kAlg2, eps, eps, t_s, m);

  const LinearSystem joint = dec.joint_system();
  const LinearSystem down = dec.down().system();
  Vec y = dec.y0().coords(), z(n, 0.0);
  record(t, F, 0, y, z, kNaN, {}, {}, {});
  for (int i = 1; i <= K; ++i) {
    Vec w = psum(y, z);
    Vec gw = F.gradient(w);
    if (i <= K1) {
      const double ti = static_cast<double>(i) / K;
      const double e2 = std::exp(2.0 * ti), e1 = (1.0 - m) * std::exp(ti) * (t_s - ti);
      Vec gz = F.gradient(z);
      LinearProgram lp(joint, Vec(2 * n));
      for (int j = 0; j < n; ++j) {
        double s = gw[j] * (1.0 - z[j]);
        lp.objective[j] = e2 * s;
        lp.objective[n + j] = e2 * s * (1.0 - y[j]) + e1 * gz[j] * (1.0 - z[j]);
      }
      LpResult res = solve_lp(lp);
      Vec a = clean(res.x, 0, n, lp.upper), b = clean(res.x, n, n, lp.upper);
      y = mix(y, a, eps);
      z = measured_step(z, b, eps);
      record(t, F, i, y, z, res.objective, std::move(a), std::move(b), {});
    } else {
      LinearProgram lp(down, Vec(n));
      for (int j = 0; j < n; ++j) lp.objective[j] = gw[j] * (1.0 - z[j]) * (1.0 - y[j]);
      LpResult res = solve_lp(lp);
      Vec b = clean(res.x, 0, n, lp.upper);
      z = measured_step(z, b, eps);
      record(t, F, i, y, z, res.objective, y, std::move(b), {});
    }
  }
  t.first_admissible = K1;
  finish(t);
  return t;
}

// --- Alg. 3 --------------------------------------------------------------------

Trace run_alg3(const Objective& F, const Decomposition& dec, double epsilon, double t_s_in) {
  check_same_size(F.dim(), dec.dim(), "run_alg3");
  const double eps = snap_epsilon_hybrid(epsilon);
  const int K = iteration_count(eps);
  const int K1 = static_cast<int>(std::lround(snap_t_s(t_s_in, eps) / eps));
  const double t_s = static_cast<double>(K1) / K;
  const int n = static_cast<int>(dec.dim());
  const double m = dec.m();
  Trace t = start_trace(Variant::kAlg3, eps, eps, t_s, m);

  Vec y = dec.y0().coords(), z(n, 0.0);
  record(t, F, 0, y, z, kNaN, {}, {}, {});
  for (int i = 1; i <= K; ++i) {
    Vec w = psum(y, z);
    Vec gw = F.gradient(w);
    Vec a, b, c;
    double lp_value;
    if (i <= K1) {
      const double ti = static_cast<double>(i) / K;
      const double e2 = std::exp(2.0 * ti), e1 = (1.0 - m) * std::exp(ti) * (t_s - ti);
      Vec gz = F.gradient(z);
      LinearProgram lp(3 * n, 1.0);
      dec.general().append_rows(lp, 0);
      dec.down().append_rows(lp, n);
      for (int j = 0; j < n; ++j) {
        // b_j <= (1 - z_j)(1 - a_j)
        SparseRow r;
        r.add(n + j, 1.0);
        r.add(j, 1.0 - z[j]);
        r.rhs = 1.0 - z[j];
        lp.rows.push_back(std::move(r));
        lp.upper[2 * n + j] = z[j];
        double bc = e2 * gw[j] * (1.0 - y[j]) + e1 * gz[j];
        lp.objective[j] = e2 * gw[j] * (1.0 - z[j]);
        lp.objective[n + j] = bc;
        lp.objective[2 * n + j] = -bc;
      }
      LpResult res = solve_lp(lp);
      a = clean(res.x, 0, n, lp.upper);
      b = clean(res.x, n, n, lp.upper);
      c = clean(res.x, 2 * n, n, lp.upper);
      lp_value = res.objective;
    } else {
      LinearProgram lp(2 * n, 1.0);
      dec.down().append_rows(lp, 0);
      for (int j = 0; j < n; ++j) {
        lp.upper[j] = std::max(0.0, 1.0 - z[j]);
        lp.upper[n + j] = z[j];
        double s = gw[j] * (1.0 - y[j]);
        lp.objective[j] = s;
        lp.objective[n + j] = -s;
      }
      LpResult res = solve_lp(lp);
      a = y;
      b = clean(res.x, 0, n, lp.upper);
      c = clean(res.x, n, n, lp.upper);
      lp_value = res.objective;
    }
    y = mix(y, a, eps);
    Vec zn(n);
    for (int j = 0; j < n; ++j) zn[j] = z[j] + eps * (b[j] - c[j]);
    z = std::move(zn);
    record(t, F, i, y, z, lp_value, std::move(a), std::move(b), std::move(c));
  }
  t.first_admissible = 0;
  finish(t);
  return t;
}

// --- baselines -----------------------------------------------------------------

Trace run_fw_downclosed(const Objective& F, const HPolytope& D, double epsilon, FwRule rule) {
  check_same_size(F.dim(), D.dim(), "run_fw_downclosed");
  if (!D.down_closed()) throw ArgumentError("run_fw_downclosed: body must be down-closed");
  const double eps = snap_epsilon(epsilon);
  const int K = iteration_count(eps);
  const int n = static_cast<int>(D.dim());
  Trace t = start_trace(Variant::kFwDown, eps, eps, 0.0, 0.0);

  const LinearSystem sys = D.system();
  const Vec zero(n, 0.0);
  Vec z(n, 0.0);
  record(t, F, 0, zero, z, kNaN, {}, {}, {});
  for (int i = 1; i <= K; ++i) {
    Vec g = F.gradient(z);
    LinearProgram lp(sys, Vec(n));
    if (rule == FwRule::kBian) {
      for (int j = 0; j < n; ++j) {
        lp.upper[j] = std::max(0.0, 1.0 - z[j]);
        lp.objective[j] = g[j];
      }
    } else {
      for (int j = 0; j < n; ++j) lp.objective[j] = g[j] * (1.0 - z[j]);
    }
    LpResult res = solve_lp(lp);
    Vec b = clean(res.x, 0, n, lp.upper);
    if (rule == FwRule::kBian) {
      for (int j = 0; j < n; ++j) z[j] += eps * b[j];
    } else {
      z = measured_step(z, b, eps);
    }
    record(t, F, i, zero, z, res.objective, {}, std::move(b), {});
  }
  t.first_admissible = K;
  finish(t);
  return t;
}

Trace run_fw_general(const Objective& F, const Decomposition& dec, double epsilon) {
  check_same_size(F.dim(), dec.dim(), "run_fw_general");
  const double eps = snap_epsilon(epsilon);
  const int K = iteration_count(eps);
  const double step = std::log(2.0) * eps;
  const int n = static_cast<int>(dec.dim());
  Vec x = dec.min_linf_point_of_sum();
  Trace t = start_trace(Variant::kFwGeneral, eps, step, 0.0, linf_norm(x));
  const Vec zero(n, 0.0);
  record(t, F, 0, x, zero, kNaN, {}, {}, {});
  for (int i = 1; i <= K; ++i) {
    Vec g = F.gradient(x);
    Vec v = dec.maximize_over_sum(g);
    double lp = dot(g, v);
    x = mix(x, v, step);
    record(t, F, i, x, zero, lp, std::move(v), {}, {});
  }
  t.first_admissible = K;
  finish(t);
  return t;
}

// --- grid drivers --------------------------------------------------------------

namespace {

template <class Run>
GridResult run_grid(const Objective& F, const Decomposition& dec, double epsilon, int threads, Run run) {
  const double eps = snap_epsilon_hybrid(epsilon);
  const int K = iteration_count(eps);
  std::vector<std::optional<Trace>> traces(K + 1);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int k; (k = next.fetch_add(1)) <= K;) {
      try {
        traces[k] = run(F, dec, eps, static_cast<double>(k) / K);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  int workers = std::clamp(threads, 1, K + 1);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  GridResult out;
  int best = 0;
  for (int k = 0; k <= K; ++k) {
    out.values.push_back(traces[k]->best_value);
    if (traces[k]->best_value > traces[best]->best_value) best = k;
  }
  out.t_s = traces[best]->t_s;
  out.best = std::move(*traces[best]);
  return out;
}

}  // namespace

GridResult run_alg2_grid(const Objective& F, const Decomposition& dec, double epsilon, int threads) {
  return run_grid(F, dec, epsilon, threads, run_alg2);
}

GridResult run_alg3_grid(const Objective& F, const Decomposition& dec, double epsilon, int threads) {
  return run_grid(F, dec, epsilon, threads, run_alg3);
}

// --- verification --------------------------------------------------------------

int verify_trace(Trace& t, const Decomposition& dec, bool lp_checks, double tol) {
  const std::size_t before = t.violations.size();
  auto flag = [&](int i, const std::string& what, double r) {
    t.violations.push_back("i=" + std::to_string(i) + ": " + what + " residual " + std::to_string(r));
  };
  const bool hybrid = t.variant == Variant::kAlg1 || t.variant == Variant::kAlg2 || t.variant == Variant::kAlg3;
  for (const auto& it : t.iters) {
    if (hybrid) {
      double r = dec.general().violation(it.y);
      if (r > tol) flag(it.i, "y in N", r);
    }
    if (t.variant != Variant::kFwGeneral) {
      double r = dec.down().scaled_violation(it.z, t.epsilon * it.i);
      if (r > tol) flag(it.i, "z in eps*i*D", r);
    }
    if (lp_checks) {
      double r = dec.membership_residual(it.w);
      if (r > tol) flag(it.i, "w in K", r);
    }
  }
  return static_cast<int>(t.violations.size() - before);
}

PotentialReport potential_check(const Trace& t, double beta, double diameter) {
  PotentialReport rep;
  const double eps = t.epsilon, m = t.m, ts = t.t_s;
  const int K1 = static_cast<int>(std::lround(ts / eps));
  if (m >= 1.0) return rep;
  for (int i = 0; i <= K1 && i < static_cast<int>(t.iters.size()); ++i) {
    const double ti = eps * i;
    const auto& it = t.iters[i];
    rep.phi.push_back(std::exp(2.0 * (ti - ts)) * it.F_w +
                      (1.0 - m) * (1.0 - eps) * std::exp(ti - 2.0 * ts) * (ts - ti) * it.F_z);
  }
  const double smooth = 25.0 * eps * eps * beta * diameter * diameter / (1.0 - m);
  for (std::size_t i = 1; i < rep.phi.size(); ++i) {
    double allowed = rep.phi[i - 1] - (smooth + 15.0 * eps * eps * rep.phi[i - 1]);
    double shortfall = allowed - rep.phi[i];
    if (shortfall > 1e-12) {
      ++rep.violations;
      rep.worst = std::max(rep.worst, shortfall);
    }
  }
  return rep;
}

// --- approximation bound ---------------------------------------------------------

double theorem1_value(double F_o, double F_p1, double F_p2, double m, double t_s, double T) {
  return (1.0 - m) * ((T - t_s) * std::exp(-T) * F_p2 + t_s * t_s * std::exp(-t_s - T) / 2.0 * F_p1 +
                      (std::exp(-T) - std::exp(-t_s - T)) * F_o);
}

BoundResult theorem1_bound(double F_o, double F_p1, double F_p2, double m, double grid_step) {
  if (F_o < 0.0 || F_p1 < 0.0 || F_p2 < 0.0) throw ArgumentError("theorem1_bound: values must be >= 0");
  if (!(m >= 0.0 && m < 1.0)) throw ArgumentError("theorem1_bound: m must lie in [0,1)");
  if (!(grid_step > 0.0 && grid_step <= 1.0)) throw ArgumentError("theorem1_bound: grid_step must lie in (0,1]");
  const int k = static_cast<int>(std::ceil(1.0 / grid_step - 1e-9));
  BoundResult out;
  out.value = -1.0;
  for (int a = 0; a <= k; ++a) {
    double ts = std::min(1.0, a * grid_step);
    for (int b = a; b <= k; ++b) {
      double T = std::min(1.0, b * grid_step);
      double v = theorem1_value(F_o, F_p1, F_p2, m, ts, T);
      if (v > out.value) {
        out.value = v;
        out.t_s = ts;
        out.T = T;
      }
    }
  }
  out.note = "O(eps) coefficient terms and the O(eps beta D^2 / (1 - m)) term are not included";
  return out;
}

// --- reference optimum ---------------------------------------------------------

OptEstimate reference_opt(const Objective& F, const Decomposition& dec, const std::vector<Vec>& candidates,
                          int starts, Rng& rng, int iterations) {
  const std::size_t n = dec.dim();
  check_same_size(F.dim(), n, "reference_opt");
  OptEstimate best;
  best.value = -std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    double v = F.value(c);
    if (v > best.value) {
      best.value = v;
      best.point = c;
    }
  }
  Projector proj(dec.joint_system());
  auto to_x = [n](const Vec& u) {
    Vec x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = std::clamp(u[j] + u[n + j], 0.0, 1.0);
    return x;
  };
  const double beta = std::max(F.beta(), 1e-12);
  for (int s = 0; s < starts; ++s) {
    Vec u(2 * n);
    for (double& v : u) v = rng.uniform();
    u = proj.project(u);
    Vec x = to_x(u);
    double fx = F.value(x);
    double eta = 1.0 / (2.0 * beta);
    for (int it = 0; it < iterations && eta > 1e-14; ++it) {
      Vec g = F.gradient(x);
      Vec trial(2 * n);
      for (std::size_t j = 0; j < n; ++j) {
        trial[j] = u[j] + eta * g[j];
        trial[n + j] = u[n + j] + eta * g[j];
      }
      trial = proj.project(trial);
      Vec xt = to_x(trial);
      double ft = F.value(xt);
      if (ft > fx) {
        double moved = l2_distance(xt, x);
        u = std::move(trial);
        x = std::move(xt);
        fx = ft;
        eta *= 1.5;
        if (moved < 1e-10) break;
      } else {
        eta *= 0.5;
      }
    }
    if (fx > best.value) {
      best.value = fx;
      best.point = x;
      best.from_search = true;
    }
  }
  return best;
}

// --- serialization -------------------------------------------------------------

void write_trace_csv(std::ostream& os, const Trace& t, bool header) {
  if (header) os << "variant,seed,eps,t_s,i,F_w,F_z,best_so_far\n";
  Vec bsf = t.best_so_far();
  std::ostringstream line;
  line.precision(17);
  for (std::size_t k = 0; k < t.iters.size(); ++k) {
    const auto& it = t.iters[k];
    line.str("");
    line << to_string(t.variant) << ',' << t.seed << ',' << t.epsilon << ',' << t.t_s << ',' << it.i << ','
         << it.F_w << ',' << it.F_z << ',' << bsf[k] << '\n';
    os << line.str();
  }
}

std::string trace_summary_json(const Trace& t) {
  nlohmann::json j;
  j["variant"] = to_string(t.variant);
  j["seed"] = t.seed;
  j["eps"] = t.epsilon;
  j["t_s"] = t.t_s;
  j["best_value"] = t.best_value;
  j["best_index"] = t.best_index;
  j["best_point"] = t.best_point();
  j["invariant_violations"] = t.violations.size();
  return j.dump();
}

}  // namespace drsub
