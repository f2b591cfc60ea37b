#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drsub/objectives.hpp"
#include "drsub/polytope.hpp"

namespace drsub {

/// Quadratic-regularised follow-the-leader with lazy projection:
/// next() = project(body, anchor + eta * sum of fed rewards).
/// eta = D' / (G' sqrt(2L)). When G' is not declared it is taken from the
/// norm of the first non-zero reward.
class FtrlOptimizer {
 public:
  FtrlOptimizer(LinearSystem body, Vec anchor, int horizon, double diameter, double grad_bound = 0.0);

  /// Point for the current round. Repeated calls before feed() return the
  /// same point.
  const Vec& next();
  /// Reward vector for the current round. Throws ProtocolError unless next()
  /// was called since the previous feed.
  void feed(std::span<const double> d);

  int dim() const noexcept { return static_cast<int>(anchor_.size()); }
  int rounds() const noexcept { return rounds_; }
  int horizon() const noexcept { return horizon_; }
  double diameter() const noexcept { return diameter_; }
  double grad_bound() const noexcept { return grad_bound_; }
  /// 0 until G' is known.
  double eta() const noexcept { return eta_; }
  /// D' G' sqrt(2L).
  double regret_bound() const;

 private:
  Projector proj_;
  Vec anchor_, sum_, point_;
  int horizon_;
  double diameter_;
  double grad_bound_;
  double eta_ = 0.0;
  int rounds_ = 0;
  bool pending_ = false;  // next() issued, awaiting feed()
  bool fresh_ = false;    // point_ matches sum_
};

/// Doubling trick for unknown horizons: epochs of length 1, 2, 4, ..., each
/// with a fresh FtrlOptimizer tuned to its length.
class DoublingOlo {
 public:
  DoublingOlo(LinearSystem body, Vec anchor, double diameter, double grad_bound);
  const Vec& next();
  void feed(std::span<const double> d);
  int rounds() const noexcept { return rounds_; }

 private:
  void start_epoch();
  LinearSystem body_;
  Vec anchor_;
  double diameter_, grad_bound_;
  int epoch_len_ = 1;
  int rounds_ = 0;
  std::unique_ptr<FtrlOptimizer> cur_;
};

/// Full-information multiplicative weights, eta = sqrt(8 ln K / L).
class Hedge {
 public:
  Hedge(int experts, int horizon);
  /// Weights to play this round (before the update).
  const Vec& distribution() const noexcept { return w_; }
  /// Rewards in [0,1]; ArgumentError beyond 1e-9 outside it.
  void update(std::span<const double> rewards);
  double eta() const noexcept { return eta_; }
  int experts() const noexcept { return static_cast<int>(w_.size()); }

 private:
  Vec logw_, w_;
  double eta_;
};

/// Invariant checks of one online step.
struct StepCheck {
  double residual = 0.0;  // worst membership / norm-bound excess over all stages
  int violations = 0;     // stages exceeding tol
};

/// Algorithm 4 for a single t_s: one FtrlOptimizer per stage over the joint
/// body {(a, b) : a in N, b in D, a + b <= 1}.
class OnlineHybrid {
 public:
  /// `grad_bound` <= 0 means estimate G' from the first feedback.
  OnlineHybrid(const Decomposition& dec, double epsilon, double t_s, int horizon, double grad_bound = 0.0);

  /// Output for the next round. ProtocolError if feedback() is outstanding.
  Vec step();
  /// Feeds the stage gradients of F (times `scale`) evaluated at the stored
  /// iterates. ProtocolError unless step() came first.
  void feedback(const Objective& F, double scale = 1.0);

  double epsilon() const noexcept { return eps_; }
  double t_s() const noexcept { return t_s_; }
  int stages() const noexcept { return K_; }
  int phase_one_stages() const noexcept { return K1_; }
  const StepCheck& last_check() const noexcept { return check_; }
  /// Feedback vectors of the last feedback() call, for inspection.
  const std::vector<Vec>& last_feedback() const noexcept { return last_g_; }
  /// Stage iterates (y, z) before each stage, from the last step().
  const std::vector<Vec>& stored_y() const noexcept { return ys_; }
  const std::vector<Vec>& stored_z() const noexcept { return zs_; }

 private:
  const Decomposition* dec_;
  double eps_, t_s_, m_;
  int K_, K1_, n_;
  std::vector<FtrlOptimizer> olo_;
  std::vector<Vec> ys_, zs_, last_g_;
  StepCheck check_;
  bool awaiting_ = false;
};

enum class OnlineMode { kFixed, kMeta, kBaseline };
std::string to_string(OnlineMode m);

struct OnlineRecord {
  int ell = 0;
  double t_s = 0.0;
  double value_raw = 0.0;   // F(w), or the Hedge-expected value in meta mode
  double value_norm = 0.0;  // value_raw / value_upper
  double cum_value = 0.0;   // running sum of value_raw
  double feasibility_residual = 0.0;
  Vec weights;              // meta mode only
  std::optional<double> comparator_value;
};

struct OnlineRun {
  OnlineMode mode = OnlineMode::kFixed;
  double epsilon = 0.0;
  std::vector<OnlineRecord> records;
  int violations = 0;

  double cumulative() const { return records.empty() ? 0.0 : records.back().cum_value; }
};

struct OnlineOptions {
  OnlineMode mode = OnlineMode::kFixed;  // kBaseline is rejected here
  double t_s = 0.0;                      // fixed mode only
  double grad_bound = 0.0;               // G'; <= 0 estimates from the first feedback
  int threads = 1;                       // meta-mode experts
  std::optional<Vec> comparator;         // fixed point to score alongside
};

/// Algorithm 4 over a stream, either for one t_s or Hedge over the t_s grid.
OnlineRun run_online_experiment(const std::vector<ObjectivePtr>& stream, const Decomposition& dec,
                                double epsilon, const OnlineOptions& options = {});

/// Meta-Frank-Wolfe over K: stage i plays v from an FTRL over the joint body
/// with reward (d, d) and x <- (1 - ln2 eps) x + ln2 eps v, starting from the
/// min-l-inf point.
OnlineRun run_online_baseline(const std::vector<ObjectivePtr>& stream, const Decomposition& dec,
                              double epsilon, double grad_bound = 0.0);

void write_online_csv(std::ostream& os, const OnlineRun& run, bool header = true);

/// Max gradient norm of F over random points of D and of K, the G of the
/// online regret bounds.
double estimate_gradient_bound(const Objective& F, const Decomposition& dec, int samples, Rng& rng);

}  // namespace drsub
