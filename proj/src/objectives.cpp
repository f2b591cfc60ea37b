#include "drsub/objectives.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

#include "drsub/errors.hpp"

namespace drsub {

// --- quadratic -----------------------------------------------------------------

QuadraticObjective::QuadraticObjective(Matrix H, Vec h, double c, bool check_dr)
    : H_(std::move(H)), h_(std::move(h)), c_(c) {
  check_same_size(H_.n, h_.size(), "QuadraticObjective");
  if (!std::isfinite(c_)) throw ArgumentError("QuadraticObjective: offset must be finite");
  for (std::size_t i = 0; i < H_.n; ++i) {
    for (std::size_t j = 0; j < H_.n; ++j) {
      double v = H_(i, j);
      if (!std::isfinite(v)) throw ArgumentError("QuadraticObjective: non-finite H entry");
      if (v != H_(j, i)) throw ArgumentError("QuadraticObjective: H must be symmetric");
      if (check_dr && v > 0.0) throw ArgumentError("QuadraticObjective: H must be entrywise <= 0");
    }
  }
}

double QuadraticObjective::value(std::span<const double> x) const {
  check_same_size(x.size(), dim(), "QuadraticObjective::value");
  const std::size_t n = dim();
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &H_.data[i * n];
    double hx = 0.0;
    for (std::size_t j = 0; j < n; ++j) hx += row[j] * x[j];
    quad += x[i] * (0.5 * hx + h_[i]);
  }
  return quad + c_;
}

Vec QuadraticObjective::gradient(std::span<const double> x) const {
  check_same_size(x.size(), dim(), "QuadraticObjective::gradient");
  const std::size_t n = dim();
  Vec g(h_);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &H_.data[i * n];
    for (std::size_t j = 0; j < n; ++j) g[i] += row[j] * x[j];
  }
  return g;
}

double QuadraticObjective::beta() const {
  double s = 0.0;
  for (double v : H_.data) s += v * v;
  return std::sqrt(s);
}

// x'Hx <= 0 on the non-negative orthant, so only the linear part can add.
double QuadraticObjective::value_upper() const {
  double s = c_;
  for (double v : h_) s += std::max(v, 0.0);
  return s;
}

// --- revenue -------------------------------------------------------------------

RevenueObjective::RevenueObjective(std::size_t n, std::span<const Edge> edges, double p)
    : n_(n), p_(p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("RevenueObjective: p must lie in (0,1)");
  log_q_ = std::log1p(-p);
  std::map<std::pair<int, int>, double> w;
  for (const Edge& e : edges) {
    if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n || static_cast<std::size_t>(e.v) >= n)
      throw ArgumentError("RevenueObjective: edge endpoint out of range");
    if (!(e.w >= 0.0) || !std::isfinite(e.w)) throw ArgumentError("RevenueObjective: negative edge weight");
    if (e.u == e.v) continue;  // w_ii = 0 by definition
    w[{std::min(e.u, e.v), std::max(e.u, e.v)}] += e.w;
  }
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const auto& [key, weight] : w) {
    if (weight == 0.0) continue;
    adj[key.first].push_back({key.second, weight});
    adj[key.second].push_back({key.first, weight});
    total_weight_ += 2.0 * weight;
  }
  offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(adj[i].begin(), adj[i].end());
    offsets_[i + 1] = offsets_[i] + static_cast<int>(adj[i].size());
    for (auto [j, v] : adj[i]) {
      nbr_.push_back(j);
      wt_.push_back(v);
    }
  }
}

double RevenueObjective::value(std::span<const double> x) const {
  check_same_size(x.size(), n_, "RevenueObjective::value");
  Vec qx(n_);
  for (std::size_t i = 0; i < n_; ++i) qx[i] = std::exp(log_q_ * x[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double adv = 1.0 - qx[i];
    if (adv == 0.0) continue;
    double acc = 0.0;
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) acc += wt_[k] * qx[nbr_[k]];
    s += adv * acc;
  }
  return s;
}

Vec RevenueObjective::gradient(std::span<const double> x) const {
  check_same_size(x.size(), n_, "RevenueObjective::gradient");
  Vec qx(n_);
  for (std::size_t i = 0; i < n_; ++i) qx[i] = std::exp(log_q_ * x[i]);
  Vec g(n_, 0.0);
  for (std::size_t k = 0; k < n_; ++k) {
    double out = 0.0;  // k as the advocate
    double in = 0.0;   // k as the buyer
    for (int t = offsets_[k]; t < offsets_[k + 1]; ++t) {
      int j = nbr_[t];
      out += wt_[t] * qx[j];
      in += wt_[t] * (1.0 - qx[j]);
    }
    g[k] = -log_q_ * qx[k] * (out - in);
  }
  return g;
}

// Gershgorin on the Hessian: |diag| <= ln^2 q deg_k, |off| <= 2 ln^2 q w_kj.
double RevenueObjective::beta() const {
  double worst = 0.0;
  for (std::size_t k = 0; k < n_; ++k) {
    double deg = 0.0;
    for (int t = offsets_[k]; t < offsets_[k + 1]; ++t) deg += wt_[t];
    worst = std::max(worst, 3.0 * deg);
  }
  return log_q_ * log_q_ * worst;
}

// --- location ------------------------------------------------------------------

LocationObjective::LocationObjective(Matrix M, Vec d) : M_(std::move(M)), d_(std::move(d)) {
  check_same_size(M_.n, d_.size(), "LocationObjective");
  const std::size_t n = M_.n;
  for (double v : M_.data)
    if (!std::isfinite(v) || v < 0.0) throw ArgumentError("LocationObjective: similarities must be finite and >= 0");
  for (double v : d_)
    if (!std::isfinite(v)) throw ArgumentError("LocationObjective: non-finite distance");
  order_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& o = order_[i];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0);
    const double* row = &M_.data[i * n];
    std::sort(o.begin(), o.end(), [row](int a, int b) {
      if (row[a] != row[b]) return row[a] > row[b];
      return a > b;
    });
  }
}

double LocationObjective::value(std::span<const double> x) const {
  const std::size_t n = dim();
  check_same_size(x.size(), n, "LocationObjective::value");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &M_.data[i * n];
    double keep = 1.0;  // probability that nothing better was picked
    double s = 0.0;
    for (int j : order_[i]) {
      s += keep * x[j] * row[j];
      keep *= 1.0 - x[j];
      if (keep == 0.0) break;
    }
    total += s;
  }
  double cost = 0.0;
  for (std::size_t j = 0; j < n; ++j) cost += x[j] * d_[j];
  return total / static_cast<double>(n) - cost;
}

Vec LocationObjective::gradient(std::span<const double> x) const {
  const std::size_t n = dim();
  check_same_size(x.size(), n, "LocationObjective::gradient");
  Vec g(n, 0.0);
  Vec prefix(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &M_.data[i * n];
    const auto& o = order_[i];
    double keep = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      prefix[k] = keep;
      keep *= 1.0 - x[o[k]];
    }
    // rest = value collected below position k given position k was skipped
    double rest = 0.0;
    for (std::size_t k = n; k-- > 0;) {
      int j = o[k];
      g[j] += inv_n * prefix[k] * (row[j] - rest);
      rest = x[j] * row[j] + (1.0 - x[j]) * rest;
    }
  }
  for (std::size_t j = 0; j < n; ++j) g[j] -= d_[j];
  return g;
}

double LocationObjective::beta() const {
  double mx = 0.0;
  for (double v : M_.data) mx = std::max(mx, v);
  return static_cast<double>(dim()) * mx;
}

double LocationObjective::value_upper() const {
  const std::size_t n = dim();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = 0.0;
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, M_(i, j));
    s += mx;
  }
  return s / static_cast<double>(n);
}

double LocationObjective::set_value(const std::vector<bool>& S) const {
  const std::size_t n = dim();
  check_same_size(S.size(), n, "LocationObjective::set_value");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (S[j]) mx = std::max(mx, M_(i, j));
    total += mx;
  }
  double cost = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (S[j]) cost += d_[j];
  return total / static_cast<double>(n) - cost;
}

// --- generators ----------------------------------------------------------------

QpDistribution parse_qp_distribution(const std::string& s) {
  if (s == "uniform") return QpDistribution::kUniform;
  if (s == "exponential") return QpDistribution::kExponential;
  throw ArgumentError("unknown QP distribution '" + s + "'");
}

std::string to_string(QpDistribution d) {
  return d == QpDistribution::kUniform ? "uniform" : "exponential";
}

Vec upper_bounds(const std::vector<Vec>& A, std::span<const double> b) {
  check_same_size(A.size(), b.size(), "upper_bounds");
  if (A.empty()) throw ArgumentError("upper_bounds: no rows");
  const std::size_t n = A[0].size();
  Vec u(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < A.size(); ++i) {
    check_same_size(A[i].size(), n, "upper_bounds");
    for (std::size_t j = 0; j < n; ++j)
      if (A[i][j] > 0.0) u[j] = std::min(u[j], b[i] / A[i][j]);
  }
  return u;
}

double qp_offset(const Matrix& H, std::span<const double> h, std::span<const double> u) {
  const std::size_t n = H.n;
  check_same_size(h.size(), n, "qp_offset");
  check_same_size(u.size(), n, "qp_offset");
  if (n > kMaxEnumerationDim)
    throw ArgumentError("qp_offset: vertex enumeration limited to n <= 20");
  // Gray-code walk: one coordinate flips per step, Hx is updated in O(n).
  Vec x(n, 0.0), Hx(n, 0.0);
  double q = 0.0;
  double best = 0.0;
  const std::uint64_t count = std::uint64_t{1} << n;
  for (std::uint64_t k = 1; k < count; ++k) {
    std::size_t j = static_cast<std::size_t>(std::countr_zero(k));
    double delta = x[j] == 0.0 ? u[j] : -u[j];
    q += delta * (Hx[j] + h[j]) + 0.5 * H(j, j) * delta * delta;
    x[j] += delta;
    for (std::size_t i = 0; i < n; ++i) Hx[i] += H(i, j) * delta;
    best = std::min(best, q);
  }
  return -best;
}

QpInstance make_qp_instance(std::size_t n, std::size_t m_rows, QpDistribution dist,
                            std::uint64_t seed) {
  if (n == 0 || m_rows == 0) throw ArgumentError("make_qp_instance: n and m_rows must be positive");
  if (n > kMaxEnumerationDim) throw ArgumentError("make_qp_instance: n must be <= 20");
  Rng rng(seed);
  Rng rH = rng.split(0), rA = rng.split(1);
  const bool uni = dist == QpDistribution::kUniform;

  Matrix H(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double v = uni ? -rH.uniform() : -rH.exponential(1.0);
      H(i, j) = v;
      H(j, i) = v;
    }
  std::vector<Vec> A(m_rows, Vec(n));
  for (auto& row : A)
    for (double& a : row) a = uni ? rA.uniform(0.01, 1.01) : rA.exponential(0.25) + 0.01;
  Vec b(m_rows, 1.0);
  Vec u = upper_bounds(A, b);

  Vec h(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) h[j] -= 0.1 * H(i, j) * u[i];
  double M = qp_offset(H, h, u);
  double c = M + 0.1 * std::abs(M);

  Matrix Hs(n);
  Vec hs(n);
  for (std::size_t i = 0; i < n; ++i) {
    hs[i] = u[i] * h[i];
    for (std::size_t j = i; j < n; ++j) Hs(i, j) = Hs(j, i) = u[i] * H(i, j) * u[j];
  }
  std::vector<DenseRow> rows;
  rows.reserve(m_rows);
  for (const auto& row : A) {
    DenseRow r;
    r.a.resize(n);
    for (std::size_t j = 0; j < n; ++j) r.a[j] = row[j] * u[j];
    r.b = 1.0;
    rows.push_back(std::move(r));
  }
  HPolytope K(n, std::move(rows), true);
  return QpInstance{std::make_shared<QuadraticObjective>(std::move(Hs), std::move(hs), c),
                    Decomposition(HPolytope::origin(n), std::move(K)),
                    std::move(H),
                    std::move(h),
                    std::move(A),
                    std::move(u),
                    M};
}

std::vector<std::shared_ptr<const LocationObjective>> make_location_stream(std::size_t n, int users, Rng& rng) {
  if (n == 0) throw ArgumentError("make_location_stream: n must be positive");
  if (users < 0) throw ArgumentError("make_location_stream: users must be >= 0");
  constexpr int kFeatures = 8;
  constexpr double kWidthKm = 300.0, kHeightKm = 200.0;
  std::vector<Vec> feat(n, Vec(kFeatures));
  Vec px(n), py(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& f : feat[i]) f = rng.normal();
    px[i] = rng.uniform(0.0, kWidthKm);
    py[i] = rng.uniform(0.0, kHeightKm);
  }
  Matrix M(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (int k = 0; k < kFeatures; ++k) d2 += (feat[i][k] - feat[j][k]) * (feat[i][k] - feat[j][k]);
      M(i, j) = std::exp(-d2 / (2.0 * kFeatures));
    }
  std::vector<std::shared_ptr<const LocationObjective>> out;
  out.reserve(users);
  for (int u = 0; u < users; ++u) {
    double ux = rng.uniform(0.0, kWidthKm), uy = rng.uniform(0.0, kHeightKm);
    Vec d(n);
    for (std::size_t j = 0; j < n; ++j) {
      double km = std::hypot(px[j] - ux, py[j] - uy);
      d[j] = std::min(1.0, km / 200.0) / static_cast<double>(n);
    }
    out.push_back(std::make_shared<LocationObjective>(M, std::move(d)));
  }
  return out;
}

std::shared_ptr<const LocationObjective> make_location_instance(std::size_t n, Rng& rng) {
  return make_location_stream(n, 1, rng).front();
}

std::vector<Edge> erdos_renyi(std::size_t n, double p_edge, Rng& rng) {
  if (!(p_edge >= 0.0 && p_edge <= 1.0)) throw ArgumentError("erdos_renyi: p_edge must lie in [0,1]");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < p_edge) edges.push_back({static_cast<int>(i), static_cast<int>(j), 1.0});
  return edges;
}

// --- verification --------------------------------------------------------------

double fd_gradient_check(const Objective& obj, std::span<const double> x, double step) {
  Vec g = obj.gradient(x);
  Vec xp(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t j = 0; j < xp.size(); ++j) {
    double keep = xp[j];
    xp[j] = keep + step;
    double fp = obj.value(xp);
    xp[j] = keep - step;
    double fm = obj.value(xp);
    xp[j] = keep;
    double num = (fp - fm) / (2.0 * step);
    worst = std::max(worst, std::abs(g[j] - num) / (1.0 + std::abs(num)));
  }
  return worst;
}

namespace {

Vec uniform_vec(std::size_t n, Rng& rng) {
  Vec v(n);
  for (double& t : v) t = rng.uniform();
  return v;
}

void note(int& counter, double& worst, double excess) {
  if (excess > 0.0) {
    ++counter;
    worst = std::max(worst, excess);
  }
}

}  // namespace

DrReport dr_probe(const Objective& obj, int pairs, Rng& rng, double tol) {
  const std::size_t n = obj.dim();
  DrReport rep;
  for (int s = 0; s < pairs; ++s) {
    Vec y = uniform_vec(n, rng);
    Vec x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = y[j] * rng.uniform();
    Vec gx = obj.gradient(x), gy = obj.gradient(y);
    double fx = obj.value(x), fy = obj.value(y);
    double scale = 1.0 + std::abs(fx) + std::abs(fy);
    for (std::size_t j = 0; j < n; ++j) {
      double ex = gy[j] - gx[j] - tol * (1.0 + std::abs(gx[j]));
      if (ex > 0.0) {
        note(rep.gradient_violations, rep.worst, ex);
        break;
      }
    }
    Vec v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = y[j] - x[j];
    note(rep.upper_violations, rep.worst, (fy - fx) - dot(gx, v) - tol * scale);
    note(rep.lower_violations, rep.worst, dot(gy, v) - (fy - fx) - tol * scale);

    // F(x (+) r) >= (1 - |r|_inf) F(x) with r a shrunken independent point.
    Vec r = uniform_vec(n, rng);
    double shrink = rng.uniform();
    for (double& t : r) t *= shrink;
    double fpx = obj.value(psum(x, r));
    note(rep.norm_bound_violations, rep.worst, (1.0 - linf_norm(r)) * fx - fpx - tol * scale);
    ++rep.pairs;
  }
  return rep;
}

SubsetBound subset_bound(const Objective& obj, std::span<const Point> xs, std::span<const double> p) {
  check_same_size(xs.size(), p.size(), "subset_bound");
  const std::size_t r = xs.size();
  if (r == 0 || r > 20) throw ArgumentError("subset_bound: need 1 <= r <= 20");
  const std::size_t n = obj.dim();
  std::vector<Point> scaled;
  scaled.reserve(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw ArgumentError("subset_bound: p must lie in [0,1]");
    check_same_size(xs[i].size(), n, "subset_bound");
    Vec v(xs[i].coords());
    for (double& t : v) t *= p[i];
    scaled.emplace_back(std::move(v));
  }
  SubsetBound out;
  out.lhs = obj.value(psum_fold(scaled));
  for (std::uint64_t S = 0; S < (std::uint64_t{1} << r); ++S) {
    double prob = 1.0;
    Vec acc(n, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      if (S >> i & 1) {
        prob *= p[i];
        acc = psum(acc, xs[i].coords());
      } else {
        prob *= 1.0 - p[i];
      }
    }
    out.rhs += prob * obj.value(acc);
  }
  return out;
}

double sampled_lipschitz(const Objective& obj, int pairs, Rng& rng) {
  const std::size_t n = obj.dim();
  double worst = 0.0;
  for (int s = 0; s < pairs; ++s) {
    Vec x = uniform_vec(n, rng);
    Vec y(n);
    // Alternate far pairs and close ones, where curvature dominates.
    double radius = (s % 2 == 0) ? 1.0 : 1e-3;
    for (std::size_t j = 0; j < n; ++j) y[j] = std::clamp(x[j] + radius * rng.uniform(-1.0, 1.0), 0.0, 1.0);
    double dist = l2_distance(x, y);
    if (dist == 0.0) continue;
    worst = std::max(worst, l2_distance(obj.gradient(x), obj.gradient(y)) / dist);
  }
  return worst;
}

}  // namespace drsub
