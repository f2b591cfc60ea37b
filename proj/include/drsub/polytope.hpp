#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "drsub/lp.hpp"
#include "drsub/rng.hpp"
#include "drsub/vecmath.hpp"

namespace drsub {

/// A halfspace <a, x> <= b, or a hyperplane <a, x> = b when `eq` is set.
struct DenseRow {
  Vec a;
  double b = 0.0;
  bool eq = false;
};

/// {x in [0,1]^n : Ax <= b} with equality rows allowed. Non-emptiness is
/// certified at construction by a phase-one LP. A declared down-closed body
/// must contain the origin.
class HPolytope {
 public:
  HPolytope(std::size_t n, std::vector<DenseRow> rows, bool down_closed);

  static HPolytope unit_box(std::size_t n);
  /// The singleton {0}, written as sum(x) = 0.
  static HPolytope origin(std::size_t n);
  /// {x : lo <= sum(x) <= hi} in the box; equality when lo == hi. Down-closed
  /// exactly when lo <= 0.
  static HPolytope sum_band(std::size_t n, double lo, double hi);

  std::size_t dim() const noexcept { return n_; }
  bool down_closed() const noexcept { return down_closed_; }
  const std::vector<DenseRow>& dense_rows() const noexcept { return dense_; }
  const std::vector<SparseRow>& rows() const noexcept { return rows_; }

  /// Max violation of the rows and of the unit box.
  double violation(std::span<const double> x) const;
  /// Violation of membership in scale * P (rows <a,x> <= scale*b, box x <= scale).
  double scaled_violation(std::span<const double> x, double scale) const;
  bool contains(std::span<const double> x, double tol = tol::kMembership) const {
    return violation(x) <= tol;
  }

  /// Copies the rows into `sys`, shifting variable indices by `offset`.
  void append_rows(LinearSystem& sys, int offset) const;
  LinearSystem system() const;

 private:
  std::size_t n_;
  std::vector<DenseRow> dense_;
  std::vector<SparseRow> rows_;
  bool down_closed_;
};

std::pair<Point, double> min_linf_point(const HPolytope& P);

struct DownClosedReport {
  int samples = 0;
  int violations = 0;
  double max_violation = 0.0;
};

/// Samples feasible x from random-objective LPs, then y uniform in [0, x],
/// and counts y that fall outside P.
DownClosedReport validate_down_closed(const HPolytope& P, int samples, Rng& rng);

struct ProjectionOptions {
  int max_iters = 10000;   // full sweeps
  double tol = 1e-10;      // row violation and per-sweep change of the multipliers
};

/// Euclidean projection onto a LinearSystem with finite upper bounds, by
/// Hildreth-style dual coordinate ascent (one multiplier per row, box handled
/// inside each row step) plus an active-set finishing step. Multipliers
/// persist between calls, so projecting nearby points warm starts.
class Projector {
 public:
  explicit Projector(LinearSystem system, ProjectionOptions options = {});

  Vec project(std::span<const double> y);
  void reset();

  const LinearSystem& system() const noexcept { return sys_; }
  int last_sweeps() const noexcept { return last_sweeps_; }
  double last_residual() const noexcept { return last_residual_; }
  const Vec& lambda() const noexcept { return lambda_; }

 private:
  LinearSystem sys_;
  ProjectionOptions opt_;
  Vec row_norm2_;
  Vec lambda_;
  int last_sweeps_ = 0;
  double last_residual_ = 0.0;
};

Vec project(const LinearSystem& sys, std::span<const double> y, const ProjectionOptions& opt = {});
Point project(const HPolytope& P, std::span<const double> y, const ProjectionOptions& opt = {});

/// K = (N + D) cap [0,1]^n with N general and D down-closed.
class Decomposition {
 public:
  Decomposition(HPolytope general, HPolytope down_closed);

  std::size_t dim() const noexcept { return N_.dim(); }
  const HPolytope& general() const noexcept { return N_; }
  const HPolytope& down() const noexcept { return D_; }
  /// min over N of the l-infinity norm, attained at y0().
  double m() const noexcept { return m_; }
  const Point& y0() const noexcept { return y0_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// sqrt(sum_i (hi_i - lo_i)^2) over per-coordinate ranges of K. Computed
  /// on first use by 2n LPs and cached.
  double diameter_upper() const;

  /// Variables (a, b) in R^{2n}: a in N, b in D, a + b <= 1.
  LinearSystem joint_system() const;
  /// Max over K of <c, x>, returned as the point x = a + b.
  Vec maximize_over_sum(std::span<const double> c) const;
  /// Point of K with minimum l-infinity norm.
  Vec min_linf_point_of_sum() const;

  /// Phase-one residual of {a in N, b in D, a + b = w} plus box violation of w.
  double membership_residual(std::span<const double> w) const;

 private:
  HPolytope N_;
  HPolytope D_;
  Point y0_;
  double m_ = 0.0;
  std::vector<std::string> warnings_;
  struct Cache;
  std::shared_ptr<Cache> cache_;
};

}  // namespace drsub
