#include "drsub/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "drsub/errors.hpp"

namespace drsub {

HPolytope::HPolytope(std::size_t n, std::vector<DenseRow> rows, bool down_closed)
    : n_(n), dense_(std::move(rows)), down_closed_(down_closed) {
  if (n_ == 0) throw ArgumentError("HPolytope: dimension must be positive");
  rows_.reserve(dense_.size());
  for (const auto& r : dense_) {
    check_same_size(r.a.size(), n_, "HPolytope row");
    if (!std::isfinite(r.b)) throw ArgumentError("HPolytope: non-finite offset");
    SparseRow s;
    for (std::size_t j = 0; j < n_; ++j) s.add(static_cast<int>(j), r.a[j]);
    s.rhs = r.b;
    s.sense = r.eq ? Sense::kEqual : Sense::kLessEqual;
    rows_.push_back(std::move(s));
  }
  double resid = lp_infeasibility(system());
  if (resid > 1e-9) throw InfeasibleError("HPolytope: empty body", -1, resid);
  if (down_closed_) {
    Vec zero(n_, 0.0);
    double v = violation(zero);
    if (v > tol::kFeasibility) {
      throw ArgumentError("HPolytope: declared down-closed but the origin is infeasible");
    }
  }
}

HPolytope HPolytope::unit_box(std::size_t n) { return HPolytope(n, {}, true); }

HPolytope HPolytope::origin(std::size_t n) {
  return HPolytope(n, {DenseRow{Vec(n, 1.0), 0.0, true}}, true);
}

HPolytope HPolytope::sum_band(std::size_t n, double lo, double hi) {
  if (lo > hi) throw ArgumentError("sum_band: lo > hi");
  std::vector<DenseRow> rows;
  if (lo == hi) {
    rows.push_back({Vec(n, 1.0), lo, true});
  } else {
    rows.push_back({Vec(n, 1.0), hi, false});
    if (lo > 0.0) rows.push_back({Vec(n, -1.0), -lo, false});
  }
  return HPolytope(n, std::move(rows), lo <= 0.0);
}

double HPolytope::violation(std::span<const double> x) const { return scaled_violation(x, 1.0); }

double HPolytope::scaled_violation(std::span<const double> x, double scale) const {
  check_same_size(x.size(), n_, "HPolytope::violation");
  double worst = 0.0;
  for (const auto& r : rows_) {
    double lhs = r.eval(x);
    double v = r.sense == Sense::kEqual ? std::abs(lhs - scale * r.rhs) : lhs - scale * r.rhs;
    worst = std::max(worst, v);
  }
  for (double v : x) {
    worst = std::max(worst, -v);
    worst = std::max(worst, v - scale);
  }
  return worst;
}

void HPolytope::append_rows(LinearSystem& sys, int offset) const {
  for (const auto& r : rows_) {
    SparseRow s = r;
    for (int& j : s.index) j += offset;
    sys.rows.push_back(std::move(s));
  }
}

LinearSystem HPolytope::system() const {
  LinearSystem sys(static_cast<int>(n_), 1.0);
  append_rows(sys, 0);
  return sys;
}

std::pair<Point, double> min_linf_point(const HPolytope& P) {
  const int n = static_cast<int>(P.dim());
  LinearProgram lp(n + 1, 1.0);
  P.append_rows(lp, 0);
  for (int i = 0; i < n; ++i) {
    SparseRow r;
    r.add(i, 1.0);
    r.add(n, -1.0);
    r.rhs = 0.0;
    lp.rows.push_back(std::move(r));
  }
  lp.objective[n] = -1.0;
  LpResult res = solve_lp(lp);
  Vec x(res.x.begin(), res.x.begin() + n);
  Point p = Point::clamped(std::move(x));
  double t = linf_norm(p);
  return {std::move(p), t};
}

DownClosedReport validate_down_closed(const HPolytope& P, int samples, Rng& rng) {
  DownClosedReport rep;
  const int n = static_cast<int>(P.dim());
  LinearProgram lp(P.system(), Vec(n, 0.0));
  for (int s = 0; s < samples; ++s) {
    // Convex combination of two random LP vertices: feasible, usually not
    // a vertex itself.
    Vec x(n, 0.0);
    double w = rng.uniform();
    for (int k = 0; k < 2; ++k) {
      for (double& c : lp.objective) c = rng.normal();
      Vec v = solve_lp(lp).x;
      double coef = k == 0 ? w : 1.0 - w;
      for (int j = 0; j < n; ++j) x[j] += coef * v[j];
    }
    Vec y(n);
    for (int j = 0; j < n; ++j) y[j] = rng.uniform() * x[j];
    double v = P.violation(y);
    ++rep.samples;
    if (v > tol::kFeasibility) {
      ++rep.violations;
      rep.max_violation = std::max(rep.max_violation, v);
    }
  }
  return rep;
}

// --- projection -----------------------------------------------------------

// The projection of y is x(lambda) = clamp(y - A' lambda, 0, u) at the dual
// optimum. Each row update maximises the dual exactly along one multiplier,
// with the box folded into a piecewise-linear root find; this is Hildreth's
// row-action scheme without a separate box block. Every few sweeps the
// current active set is solved as an equality system and kept only if it
// passes a full KKT check, which finishes ill-conditioned cases that plain
// sweeps approach slowly.

namespace {

constexpr int kPolishEvery = 5;

// Root of psi(t) = <a, clamp(r - t a, 0, u)> - b, which is nonincreasing in t.
// Returns the smallest root; saturates at the extreme breakpoint when psi
// never crosses zero.
double row_root(const SparseRow& row, const Vec& r, const Vec& u) {
  struct Event {
    double t;
    double slope;
  };
  std::vector<Event> ev;
  ev.reserve(2 * row.index.size());
  double v = -row.rhs;  // psi at t -> -infinity
  for (std::size_t k = 0; k < row.index.size(); ++k) {
    const int j = row.index[k];
    const double a = row.value[k];
    const double t_lo = r[j] / a, t_hi = (r[j] - u[j]) / a;
    if (a > 0.0) v += a * u[j];
    const double first = std::min(t_lo, t_hi), second = std::max(t_lo, t_hi);
    ev.push_back({first, -a * a});
    ev.push_back({second, a * a});
  }
  if (ev.empty()) return 0.0;
  std::sort(ev.begin(), ev.end(), [](const Event& x, const Event& y) { return x.t < y.t; });
  if (v <= 0.0) return ev.front().t;
  double slope = 0.0;
  double t_prev = ev.front().t;
  for (const Event& e : ev) {
    double next = v + slope * (e.t - t_prev);
    if (next <= 0.0 && slope < 0.0) return t_prev + v / (-slope);
    v = next;
    t_prev = e.t;
    slope += e.slope;
  }
  return ev.back().t;
}

}  // namespace

Projector::Projector(LinearSystem system, ProjectionOptions options)
    : sys_(std::move(system)), opt_(options) {
  for (double u : sys_.upper)
    if (!std::isfinite(u) || u < 0.0) throw ArgumentError("Projector: upper bounds must be finite and >= 0");
  row_norm2_.reserve(sys_.rows.size());
  for (const auto& r : sys_.rows) {
    double s = 0.0;
    for (double v : r.value) s += v * v;
    row_norm2_.push_back(s);
  }
  reset();
}

void Projector::reset() { lambda_.assign(sys_.rows.size(), 0.0); }

namespace {

Vec unclamped(const LinearSystem& sys, std::span<const double> y, const Vec& lambda) {
  Vec r(y.begin(), y.end());
  for (std::size_t k = 0; k < sys.rows.size(); ++k) {
    if (lambda[k] == 0.0) continue;
    const auto& row = sys.rows[k];
    for (std::size_t t = 0; t < row.index.size(); ++t) r[row.index[t]] -= lambda[k] * row.value[t];
  }
  return r;
}

Vec clamp_to(const Vec& r, const Vec& u) {
  Vec x(r.size());
  for (std::size_t j = 0; j < r.size(); ++j) x[j] = std::clamp(r[j], 0.0, u[j]);
  return x;
}

double row_residual(const LinearSystem& sys, const Vec& x) {
  double resid = 0.0;
  for (const auto& row : sys.rows) resid = std::max(resid, row.violation(x));
  return resid;
}

// Solves the equations of the current active set for the multipliers and
// returns false unless the result is a KKT point to within tol. Rows that
// touch no free variable keep their multiplier, since it cannot move x.
// Dependent rows and rows whose multiplier comes out with the wrong sign are
// dropped one at a time.
bool polish(const LinearSystem& sys, std::span<const double> y, Vec& lambda, const Vec& r, double tol) {
  const std::size_t n = r.size();
  std::vector<char> free(n);
  for (std::size_t j = 0; j < n; ++j) free[j] = r[j] > 0.0 && r[j] < sys.upper[j];
  Vec fixed_x(n);
  for (std::size_t j = 0; j < n; ++j) fixed_x[j] = std::clamp(r[j], 0.0, sys.upper[j]);

  Vec cand = lambda;
  std::vector<int> S;
  for (std::size_t k = 0; k < sys.rows.size(); ++k) {
    if (sys.rows[k].sense != Sense::kEqual && lambda[k] == 0.0) continue;
    bool touches = false;
    for (int j : sys.rows[k].index) touches = touches || free[j];
    if (touches) S.push_back(static_cast<int>(k));
  }
  if (S.empty()) return false;

  Vec dense(n, 0.0);
  for (std::size_t attempt = 0; !S.empty() && attempt <= sys.rows.size(); ++attempt) {
    const std::size_t s = S.size();
    std::vector<Vec> G(s, Vec(s + 1, 0.0));
    for (std::size_t p = 0; p < s; ++p) {
      const auto& rp = sys.rows[S[p]];
      double rhs = -rp.rhs;
      for (std::size_t t = 0; t < rp.index.size(); ++t) {
        const int j = rp.index[t];
        if (free[j]) {
          dense[j] = rp.value[t];
          rhs += rp.value[t] * y[j];
        } else {
          rhs += rp.value[t] * fixed_x[j];
        }
      }
      for (std::size_t q = 0; q < s; ++q) {
        const auto& rq = sys.rows[S[q]];
        double g = 0.0;
        for (std::size_t t = 0; t < rq.index.size(); ++t) g += dense[rq.index[t]] * rq.value[t];
        G[p][q] = g;
      }
      G[p][s] = rhs;
      for (int j : rp.index) dense[j] = 0.0;
    }
    // Symmetric positive semidefinite, so elimination in order with a
    // relative pivot test finds a maximal independent subset.
    double scale = 0.0;
    for (std::size_t p = 0; p < s; ++p) scale = std::max(scale, G[p][p]);
    std::vector<char> keep(s, 1);
    std::vector<Vec> E = G;
    for (std::size_t c = 0; c < s; ++c) {
      if (E[c][c] <= 1e-11 * scale) {
        keep[c] = 0;
        continue;
      }
      for (std::size_t p = c + 1; p < s; ++p) {
        if (!keep[p]) continue;
        const double f = E[p][c] / E[c][c];
        if (f == 0.0) continue;
        for (std::size_t q = c; q <= s; ++q) E[p][q] -= f * E[c][q];
      }
    }
    Vec sol(s, 0.0);
    for (std::size_t c = s; c-- > 0;) {
      if (!keep[c]) continue;
      double v = E[c][s];
      for (std::size_t q = c + 1; q < s; ++q)
        if (keep[q]) v -= E[c][q] * sol[q];
      sol[c] = v / E[c][c];
    }
    // Most wrongly signed multiplier, if any.
    std::size_t worst = s;
    double worst_v = tol;
    for (std::size_t p = 0; p < s; ++p) {
      const Sense sense = sys.rows[S[p]].sense;
      const double bad = sense == Sense::kLessEqual ? -sol[p] : sense == Sense::kGreaterEqual ? sol[p] : 0.0;
      if (bad > worst_v) {
        worst_v = bad;
        worst = p;
      }
    }
    if (worst < s) {
      cand[S[worst]] = 0.0;
      S.erase(S.begin() + static_cast<std::ptrdiff_t>(worst));
      continue;
    }
    for (std::size_t p = 0; p < s; ++p) {
      const Sense sense = sys.rows[S[p]].sense;
      double v = keep[p] ? sol[p] : 0.0;
      if (sense == Sense::kLessEqual) v = std::max(v, 0.0);
      if (sense == Sense::kGreaterEqual) v = std::min(v, 0.0);
      cand[S[p]] = v;
    }
    Vec x = clamp_to(unclamped(sys, y, cand), sys.upper);
    for (std::size_t k = 0; k < sys.rows.size(); ++k) {
      if (sys.rows[k].violation(x) > tol) return false;
      if (cand[k] != 0.0 && std::abs(sys.rows[k].eval(x) - sys.rows[k].rhs) > tol) return false;
    }
    lambda = std::move(cand);
    return true;
  }
  return false;
}

}  // namespace

Vec Projector::project(std::span<const double> y) {
  const int n = sys_.num_vars;
  check_same_size(y.size(), static_cast<std::size_t>(n), "Projector::project");
  const std::size_t m = sys_.rows.size();
  const Vec& u = sys_.upper;

  Vec r = unclamped(sys_, y, lambda_);
  if (m == 0) {
    last_sweeps_ = 0;
    last_residual_ = 0.0;
    return clamp_to(r, u);
  }
  double resid = 0.0;
  for (int sweep = 1; sweep <= opt_.max_iters; ++sweep) {
    double move = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const auto& row = sys_.rows[k];
      if (row_norm2_[k] == 0.0) continue;
      const double old = lambda_[k];
      if (old != 0.0)
        for (std::size_t t = 0; t < row.index.size(); ++t) r[row.index[t]] += old * row.value[t];
      double lam = row_root(row, r, u);
      if (row.sense == Sense::kLessEqual) lam = std::max(0.0, lam);
      else if (row.sense == Sense::kGreaterEqual) lam = std::min(0.0, lam);
      // Dual moves that stay inside the clamped region leave x alone and can
      // drift on degenerate systems, so progress is measured on x.
      for (std::size_t t = 0; t < row.index.size(); ++t) {
        const int j = row.index[t];
        const double before = std::clamp(r[j] - old * row.value[t], 0.0, u[j]);
        r[j] -= lam * row.value[t];
        move = std::max(move, std::abs(std::clamp(r[j], 0.0, u[j]) - before));
      }
      lambda_[k] = lam;
    }
    if (sweep % kPolishEvery == 0) {
      r = unclamped(sys_, y, lambda_);  // shed accumulated rounding
      if (polish(sys_, y, lambda_, r, opt_.tol)) {
        Vec x = clamp_to(unclamped(sys_, y, lambda_), u);
        last_sweeps_ = sweep;
        last_residual_ = row_residual(sys_, x);
        return x;
      }
    }
    Vec x = clamp_to(r, u);
    resid = row_residual(sys_, x);
    if (resid <= opt_.tol && move <= opt_.tol) {
      last_sweeps_ = sweep;
      last_residual_ = resid;
      return x;
    }
  }
  last_sweeps_ = opt_.max_iters;
  last_residual_ = resid;
  throw ConvergenceError("project: no convergence after " + std::to_string(opt_.max_iters) +
                             " sweeps (residual " + std::to_string(resid) + ")",
                         resid);
}

Vec project(const LinearSystem& sys, std::span<const double> y, const ProjectionOptions& opt) {
  Projector p(sys, opt);
  return p.project(y);
}

Point project(const HPolytope& P, std::span<const double> y, const ProjectionOptions& opt) {
  return Point::clamped(project(P.system(), y, opt));
}

// --- decomposition ------------------------------------------------------------

struct Decomposition::Cache {
  std::once_flag once;
  double diameter = 0.0;
};

Decomposition::Decomposition(HPolytope general, HPolytope down_closed)
    : N_(std::move(general)), D_(std::move(down_closed)), cache_(std::make_shared<Cache>()) {
  check_same_size(N_.dim(), D_.dim(), "Decomposition");
  if (!D_.down_closed()) throw ArgumentError("Decomposition: D must be declared down-closed");
  auto [y0, m] = min_linf_point(N_);
  y0_ = std::move(y0);
  m_ = m;
  if (m_ >= 1.0 - 1e-12) {
    warnings_.push_back("m = 1: every approximation guarantee is vacuous");
  }
}

LinearSystem Decomposition::joint_system() const {
  const int n = static_cast<int>(dim());
  LinearSystem sys(2 * n, 1.0);
  N_.append_rows(sys, 0);
  D_.append_rows(sys, n);
  for (int j = 0; j < n; ++j) {
    SparseRow r;
    r.add(j, 1.0);
    r.add(n + j, 1.0);
    r.rhs = 1.0;
    sys.rows.push_back(std::move(r));
  }
  return sys;
}

Vec Decomposition::maximize_over_sum(std::span<const double> c) const {
  const int n = static_cast<int>(dim());
  check_same_size(c.size(), dim(), "maximize_over_sum");
  LinearProgram lp(joint_system(), Vec(2 * n));
  for (int j = 0; j < n; ++j) lp.objective[j] = lp.objective[n + j] = c[j];
  Vec ab = solve_lp(lp).x;
  Vec x(n);
  for (int j = 0; j < n; ++j) x[j] = std::min(1.0, ab[j] + ab[n + j]);
  return x;
}

Vec Decomposition::min_linf_point_of_sum() const {
  const int n = static_cast<int>(dim());
  LinearSystem sys = joint_system();
  LinearProgram lp(2 * n + 1, 1.0);
  lp.rows = std::move(sys.rows);
  for (int j = 0; j < n; ++j) {
    SparseRow r;
    r.add(j, 1.0);
    r.add(n + j, 1.0);
    r.add(2 * n, -1.0);
    r.rhs = 0.0;
    lp.rows.push_back(std::move(r));
  }
  lp.objective[2 * n] = -1.0;
  Vec ab = solve_lp(lp).x;
  Vec x(n);
  for (int j = 0; j < n; ++j) x[j] = std::min(1.0, ab[j] + ab[n + j]);
  return x;
}

double Decomposition::diameter_upper() const {
  std::call_once(cache_->once, [this] {
    const int n = static_cast<int>(dim());
    LinearProgram lp(joint_system(), Vec(2 * n, 0.0));
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      std::fill(lp.objective.begin(), lp.objective.end(), 0.0);
      lp.objective[i] = lp.objective[n + i] = 1.0;
      Vec hi = solve_lp(lp).x;
      lp.objective[i] = lp.objective[n + i] = -1.0;
      Vec lo = solve_lp(lp).x;
      double range = std::min(1.0, hi[i] + hi[n + i]) - std::min(1.0, lo[i] + lo[n + i]);
      s += range * range;
    }
    cache_->diameter = std::sqrt(s);
  });
  return cache_->diameter;
}

double Decomposition::membership_residual(std::span<const double> w) const {
  const int n = static_cast<int>(dim());
  check_same_size(w.size(), dim(), "membership_residual");
  double box = 0.0;
  for (double v : w) box = std::max({box, -v, v - 1.0});
  LinearSystem sys(2 * n, 1.0);
  N_.append_rows(sys, 0);
  D_.append_rows(sys, n);
  for (int j = 0; j < n; ++j) {
    SparseRow r;
    r.add(j, 1.0);
    r.add(n + j, 1.0);
    r.sense = Sense::kEqual;
    r.rhs = std::clamp(w[j], 0.0, 1.0);
    sys.rows.push_back(std::move(r));
  }
  return std::max(box, lp_infeasibility(sys));
}

}  // namespace drsub
