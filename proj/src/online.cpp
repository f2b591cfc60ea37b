#include "drsub/online.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"

#include "drsub/errors.hpp"
#include "drsub/offline.hpp"
#include "parallel.hpp"

namespace drsub {

// --- FTRL ----------------------------------------------------------------------

FtrlOptimizer::FtrlOptimizer(LinearSystem body, Vec anchor, int horizon, double diameter, double grad_bound)
    : proj_(std::move(body)),
      anchor_(std::move(anchor)),
      sum_(anchor_.size(), 0.0),
      horizon_(horizon),
      diameter_(diameter),
      grad_bound_(grad_bound) {
  check_same_size(anchor_.size(), static_cast<std::size_t>(proj_.system().num_vars), "FtrlOptimizer");
  if (horizon < 1) throw ArgumentError("FtrlOptimizer: horizon must be >= 1");
  if (!(diameter > 0.0)) throw ArgumentError("FtrlOptimizer: diameter must be > 0");
  if (grad_bound > 0.0) eta_ = diameter_ / (grad_bound_ * std::sqrt(2.0 * horizon_));
}

const Vec& FtrlOptimizer::next() {
  if (!fresh_) {
    Vec target = anchor_;
    for (std::size_t j = 0; j < target.size(); ++j) target[j] += eta_ * sum_[j];
    point_ = proj_.project(target);
    fresh_ = true;
  }
  pending_ = true;
  return point_;
}

void FtrlOptimizer::feed(std::span<const double> d) {
  if (!pending_) throw ProtocolError("FtrlOptimizer: feed() without a preceding next()");
  check_same_size(d.size(), anchor_.size(), "FtrlOptimizer::feed");
  pending_ = false;
  ++rounds_;
  if (eta_ == 0.0) {
    // Warm-up estimate of G'. Until a non-zero reward arrives eta stays 0,
    // which is harmless because the accumulated sum is zero too.
    const double g = l2_norm(d);
    if (g > 0.0) {
      grad_bound_ = g;
      eta_ = diameter_ / (grad_bound_ * std::sqrt(2.0 * horizon_));
    }
  }
  bool moved = false;
  for (std::size_t j = 0; j < d.size(); ++j) {
    sum_[j] += d[j];
    moved = moved || d[j] != 0.0;
  }
  if (moved) fresh_ = false;
}

double FtrlOptimizer::regret_bound() const {
  return diameter_ * grad_bound_ * std::sqrt(2.0 * horizon_);
}

DoublingOlo::DoublingOlo(LinearSystem body, Vec anchor, double diameter, double grad_bound)
    : body_(std::move(body)), anchor_(std::move(anchor)), diameter_(diameter), grad_bound_(grad_bound) {
  start_epoch();
}

void DoublingOlo::start_epoch() {
  cur_ = std::make_unique<FtrlOptimizer>(body_, anchor_, epoch_len_, diameter_, grad_bound_);
}

const Vec& DoublingOlo::next() { return cur_->next(); }

void DoublingOlo::feed(std::span<const double> d) {
  cur_->feed(d);
  ++rounds_;
  if (cur_->rounds() == epoch_len_) {
    epoch_len_ *= 2;
    start_epoch();
  }
}

// --- Hedge ---------------------------------------------------------------------

Hedge::Hedge(int experts, int horizon) {
  if (experts < 1) throw ArgumentError("Hedge: need at least one expert");
  if (horizon < 1) throw ArgumentError("Hedge: horizon must be >= 1");
  logw_.assign(experts, 0.0);
  w_.assign(experts, 1.0 / experts);
  eta_ = std::sqrt(8.0 * std::log(static_cast<double>(experts)) / horizon);
}

void Hedge::update(std::span<const double> rewards) {
  check_same_size(rewards.size(), w_.size(), "Hedge::update");
  for (double r : rewards)
    if (!(r >= -1e-9 && r <= 1.0 + 1e-9)) throw ArgumentError("Hedge: reward outside [0,1]");
  for (std::size_t k = 0; k < w_.size(); ++k) logw_[k] += eta_ * std::clamp(rewards[k], 0.0, 1.0);
  const double top = *std::max_element(logw_.begin(), logw_.end());
  double total = 0.0;
  for (std::size_t k = 0; k < w_.size(); ++k) total += (w_[k] = std::exp(logw_[k] - top));
  for (double& w : w_) w /= total;
}

// --- Algorithm 4 -----------------------------------------------------------------

namespace {

// (a, b) with a + b <= 1 coordinatewise: each coordinate pair lies in a
// triangle of diameter sqrt 2.
double joint_diameter(std::size_t n) { return std::sqrt(2.0 * static_cast<double>(n)); }

Vec joint_anchor(const Decomposition& dec) {
  Vec u(2 * dec.dim(), 0.0);
  const Vec& y0 = dec.y0().coords();
  std::copy(y0.begin(), y0.end(), u.begin());
  return u;
}

}  // namespace

OnlineHybrid::OnlineHybrid(const Decomposition& dec, double epsilon, double t_s, int horizon, double grad_bound)
    : dec_(&dec), eps_(snap_epsilon(epsilon)), m_(dec.m()), n_(static_cast<int>(dec.dim())) {
  K_ = static_cast<int>(std::lround(1.0 / eps_));
  K1_ = static_cast<int>(std::lround(snap_t_s(t_s, eps_) / eps_));
  t_s_ = static_cast<double>(K1_) / K_;
  const LinearSystem body = dec.joint_system();
  const Vec anchor = joint_anchor(dec);
  const double diam = joint_diameter(dec.dim());
  olo_.reserve(K_);
  for (int i = 0; i < K_; ++i) olo_.emplace_back(body, anchor, horizon, diam, grad_bound);
}

Vec OnlineHybrid::step() {
  if (awaiting_) throw ProtocolError("OnlineHybrid: step() before feedback for the previous step");
  const int n = n_;
  Vec y = dec_->y0().coords(), z(n, 0.0);
  ys_.assign(K_, {});
  zs_.assign(K_, {});
  check_ = {};
  for (int i = 1; i <= K_; ++i) {
    ys_[i - 1] = y;
    zs_[i - 1] = z;
    const Vec& u = olo_[i - 1].next();
    for (int j = 0; j < n; ++j) {
      const double b = std::clamp(u[n + j], 0.0, 1.0);
      if (i <= K1_) y[j] = (1.0 - eps_) * y[j] + eps_ * std::clamp(u[j], 0.0, 1.0);
      z[j] += eps_ * (1.0 - z[j]) * b;
    }
    // Stage invariants: y in N, z in eps i D, and the two norm bounds.
    const double shrink = std::pow(1.0 - eps_, i);
    double worst = std::max(dec_->general().violation(y), dec_->down().scaled_violation(z, eps_ * i));
    worst = std::max(worst, linf_norm(z) - (1.0 - shrink));
    worst = std::max(worst, linf_norm(psum(y, z)) - (1.0 - shrink * (1.0 - m_)));
    check_.residual = std::max(check_.residual, worst);
    if (worst > 1e-8) ++check_.violations;
  }
  awaiting_ = true;
  return psum(y, z);
}

void OnlineHybrid::feedback(const Objective& F, double scale) {
  if (!awaiting_ || static_cast<int>(ys_.size()) != K_)
    throw ProtocolError("OnlineHybrid: feedback() without a preceding step()");
  check_same_size(F.dim(), static_cast<std::size_t>(n_), "OnlineHybrid::feedback");
  const int n = n_;
  last_g_.assign(K_, Vec(2 * n, 0.0));
  for (int i = 1; i <= K_; ++i) {
    const Vec& y = ys_[i - 1];
    const Vec& z = zs_[i - 1];
    const Vec gw = F.gradient(psum(y, z));
    Vec& g = last_g_[i - 1];
    if (i <= K1_) {
      const double ti = eps_ * i;
      const double e2 = std::exp(2.0 * ti), e1 = (1.0 - m_) * std::exp(ti) * (t_s_ - ti);
      const Vec gz = F.gradient(z);
      for (int j = 0; j < n; ++j) {
        const double s = e2 * gw[j] * (1.0 - z[j]);
        g[j] = scale * s;
        g[n + j] = scale * (s * (1.0 - y[j]) + e1 * gz[j] * (1.0 - z[j]));
      }
    } else {
      for (int j = 0; j < n; ++j) g[n + j] = scale * gw[j] * (1.0 - z[j]) * (1.0 - y[j]);
    }
    olo_[i - 1].feed(g);
  }
  awaiting_ = false;
}

// --- runners -------------------------------------------------------------------------

std::string to_string(OnlineMode m) {
  switch (m) {
    case OnlineMode::kFixed: return "fixed";
    case OnlineMode::kMeta: return "meta";
    case OnlineMode::kBaseline: return "baseline";
  }
  return "?";
}

namespace {

std::size_t stream_dim(const std::vector<ObjectivePtr>& stream, const Decomposition& dec) {
  for (const auto& f : stream) {
    if (!f) throw ArgumentError("online stream: null objective");
    check_same_size(f->dim(), dec.dim(), "online stream");
  }
  return dec.dim();
}

double normalizer(const Objective& F) {
  const double u = F.value_upper();
  return u > 0.0 ? u : 1.0;
}

void push_record(OnlineRun& run, int ell, double t_s, double raw, double upper, double resid) {
  OnlineRecord r;
  r.ell = ell;
  r.t_s = t_s;
  r.value_raw = raw;
  r.value_norm = raw / upper;
  r.cum_value = (run.records.empty() ? 0.0 : run.records.back().cum_value) + raw;
  r.feasibility_residual = resid;
  run.records.push_back(std::move(r));
}

}  // namespace

OnlineRun run_online_experiment(const std::vector<ObjectivePtr>& stream, const Decomposition& dec,
                                double epsilon, const OnlineOptions& options) {
  stream_dim(stream, dec);
  OnlineRun run;
  run.mode = options.mode;
  run.epsilon = snap_epsilon(epsilon);
  const int L = static_cast<int>(stream.size());
  if (L == 0) return run;

  if (options.mode == OnlineMode::kFixed) {
    OnlineHybrid alg(dec, epsilon, options.t_s, L, options.grad_bound);
    for (int ell = 1; ell <= L; ++ell) {
      const Objective& F = *stream[ell - 1];
      const double upper = normalizer(F);
      Vec w = alg.step();
      push_record(run, ell, alg.t_s(), F.value(w), upper, alg.last_check().residual);
      run.violations += alg.last_check().violations;
      if (options.comparator) run.records.back().comparator_value = F.value(*options.comparator);
      alg.feedback(F, 1.0 / upper);
    }
    return run;
  }
  if (options.mode != OnlineMode::kMeta) throw ArgumentError("run_online_experiment: mode must be fixed or meta");

  const int K = static_cast<int>(std::lround(1.0 / run.epsilon));
  std::vector<OnlineHybrid> experts;
  experts.reserve(K + 1);
  for (int k = 0; k <= K; ++k)
    experts.emplace_back(dec, epsilon, static_cast<double>(k) / K, L, options.grad_bound);
  Hedge hedge(K + 1, L);
  Vec values(K + 1), rewards(K + 1);
  for (int ell = 1; ell <= L; ++ell) {
    const Objective& F = *stream[ell - 1];
    const double upper = normalizer(F);
    detail::parallel_for(K + 1, options.threads, [&](int k) {
      Vec w = experts[k].step();
      values[k] = F.value(w);
      experts[k].feedback(F, 1.0 / upper);
    });
    const Vec p = hedge.distribution();
    double expected = 0.0, resid = 0.0;
    for (int k = 0; k <= K; ++k) {
      expected += p[k] * values[k];
      rewards[k] = std::clamp(values[k] / upper, 0.0, 1.0);
      resid = std::max(resid, experts[k].last_check().residual);
      run.violations += experts[k].last_check().violations;
    }
    hedge.update(rewards);
    push_record(run, ell, std::nan(""), expected, upper, resid);
    run.records.back().weights = p;
    if (options.comparator) run.records.back().comparator_value = F.value(*options.comparator);
  }
  return run;
}

OnlineRun run_online_baseline(const std::vector<ObjectivePtr>& stream, const Decomposition& dec,
                              double epsilon, double grad_bound) {
  const std::size_t n = stream_dim(stream, dec);
  OnlineRun run;
  run.mode = OnlineMode::kBaseline;
  run.epsilon = snap_epsilon(epsilon);
  const int L = static_cast<int>(stream.size());
  if (L == 0) return run;
  const int K = static_cast<int>(std::lround(1.0 / run.epsilon));
  const double step = std::log(2.0) * run.epsilon;

  const LinearSystem body = dec.joint_system();
  const Vec anchor = joint_anchor(dec);
  std::vector<FtrlOptimizer> olo;
  olo.reserve(K);
  for (int i = 0; i < K; ++i) olo.emplace_back(body, anchor, L, joint_diameter(n), grad_bound);
  const Vec x0 = dec.min_linf_point_of_sum();

  std::vector<Vec> xs(K);
  Vec g(2 * n);
  for (int ell = 1; ell <= L; ++ell) {
    const Objective& F = *stream[ell - 1];
    const double upper = normalizer(F);
    Vec x = x0;
    for (int i = 0; i < K; ++i) {
      xs[i] = x;
      const Vec& u = olo[i].next();
      for (std::size_t j = 0; j < n; ++j) {
        const double v = std::clamp(u[j] + u[n + j], 0.0, 1.0);
        x[j] = (1.0 - step) * x[j] + step * v;
      }
    }
    push_record(run, ell, std::nan(""), F.value(x), upper, dec.membership_residual(x));
    if (run.records.back().feasibility_residual > 1e-8) ++run.violations;
    for (int i = 0; i < K; ++i) {
      const Vec d = F.gradient(xs[i]);
      for (std::size_t j = 0; j < n; ++j) g[j] = g[n + j] = d[j] / upper;
      olo[i].feed(g);
    }
  }
  return run;
}

void write_online_csv(std::ostream& os, const OnlineRun& run, bool header) {
  const bool meta = run.mode == OnlineMode::kMeta;
  const bool comp = !run.records.empty() && run.records.front().comparator_value.has_value();
  if (header) {
    os << "ell,mode,t_s,value_raw,value_norm,cum_value,feasibility_residual";
    if (meta) os << ",expert_weights,expected_value";
    if (comp) os << ",comparator_value";
    os << '\n';
  }
  const auto old = os.precision(17);
  for (const auto& r : run.records) {
    os << r.ell << ',' << to_string(run.mode) << ',';
    if (!std::isnan(r.t_s)) os << r.t_s;
    os << ',' << r.value_raw << ',' << r.value_norm << ',' << r.cum_value << ',' << r.feasibility_residual;
    if (meta) {
      // JSON array inside a quoted CSV field; inner quotes are not needed.
      os << ",\"" << nlohmann::json(r.weights).dump() << "\"," << r.value_raw;
    }
    if (comp) os << ',' << r.comparator_value.value_or(std::nan(""));
    os << '\n';
  }
  os.precision(old);
}

double estimate_gradient_bound(const Objective& F, const Decomposition& dec, int samples, Rng& rng) {
  const std::size_t n = dec.dim();
  double best = 0.0;
  // Random points of D and of K: projections of uniform box points.
  const LinearSystem down = dec.down().system();
  Projector pd(down);
  const LinearSystem joint = dec.joint_system();
  Projector pk(joint);
  Vec y(n), yy(2 * n);
  for (int s = 0; s < samples; ++s) {
    for (double& v : y) v = rng.uniform(-0.5, 1.5);
    best = std::max(best, l2_norm(F.gradient(pd.project(y))));
    for (double& v : yy) v = rng.uniform(-0.5, 1.0);
    Vec ab = pk.project(yy);
    Vec x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = std::clamp(ab[j] + ab[n + j], 0.0, 1.0);
    best = std::max(best, l2_norm(F.gradient(x)));
  }
  return best;
}

}  // namespace drsub
