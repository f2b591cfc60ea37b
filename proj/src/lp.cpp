#include "drsub/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drsub/errors.hpp"

namespace drsub {

double SparseRow::violation(std::span<const double> x) const {
  double lhs = eval(x);
  switch (sense) {
    case Sense::kLessEqual:
      return std::max(0.0, lhs - rhs);
    case Sense::kGreaterEqual:
      return std::max(0.0, rhs - lhs);
    case Sense::kEqual:
      return std::abs(lhs - rhs);
  }
  return 0.0;
}

double LinearSystem::violation(std::span<const double> x) const {
  check_same_size(x.size(), static_cast<std::size_t>(num_vars), "LinearSystem::violation");
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.violation(x));
  for (int j = 0; j < num_vars; ++j) {
    worst = std::max(worst, -x[j]);
    worst = std::max(worst, x[j] - upper[j]);
  }
  return worst;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tableau in "transformed" coordinates: every nonbasic column sits at 0. A
// column whose variable sits at its upper bound is stored flipped
// (x = u - x'), so the ratio test only ever deals with lower bounds of
// entering variables.
class Tableau {
 public:
  Tableau(const LinearProgram& lp, const LpOptions& opt) : opt_(opt) {
    n_ = lp.num_vars;
    m_ = static_cast<int>(lp.rows.size());
    check_same_size(lp.objective.size(), static_cast<std::size_t>(n_), "solve_lp objective");
    check_same_size(lp.upper.size(), static_cast<std::size_t>(n_), "solve_lp upper");

    // Column layout: structural | one slack per inequality | artificials.
    int slacks = 0;
    for (const auto& r : lp.rows) slacks += (r.sense != Sense::kEqual);
    std::vector<int> slack_col(m_, -1);
    std::vector<double> slack_sign(m_, 0.0);
    std::vector<double> row_sign(m_, 1.0);
    std::vector<bool> needs_art(m_, false);
    int next_slack = n_;
    int arts = 0;
    for (int r = 0; r < m_; ++r) {
      const auto& row = lp.rows[r];
      if (row.sense != Sense::kEqual) {
        slack_col[r] = next_slack++;
        slack_sign[r] = row.sense == Sense::kLessEqual ? 1.0 : -1.0;
      }
      if (row.rhs < 0.0) row_sign[r] = -1.0;
      bool slack_basic = slack_col[r] >= 0 && slack_sign[r] * row_sign[r] > 0.0;
      needs_art[r] = !slack_basic;
      arts += needs_art[r];
    }
    first_art_ = n_ + slacks;
    cols_ = first_art_ + arts;

    t_.assign(static_cast<std::size_t>(m_) * cols_, 0.0);
    beta_.assign(m_, 0.0);
    basis_.assign(m_, -1);
    upper_.assign(cols_, kInf);
    flipped_.assign(cols_, false);
    for (int j = 0; j < n_; ++j) {
      double u = lp.upper[j];
      if (u < 0.0) {
        if (u < -opt_.pivot_tol) {
          throw InfeasibleError("solve_lp: negative upper bound on variable " + std::to_string(j),
                                -1, -u);
        }
        u = 0.0;
      }
      upper_[j] = u;
    }

    int next_art = first_art_;
    for (int r = 0; r < m_; ++r) {
      const auto& row = lp.rows[r];
      double s = row_sign[r];
      for (std::size_t k = 0; k < row.index.size(); ++k) {
        int j = row.index[k];
        if (j < 0 || j >= n_) throw DimensionError("solve_lp: row references unknown variable");
        at(r, j) += s * row.value[k];
      }
      beta_[r] = s * row.rhs;
      if (slack_col[r] >= 0) at(r, slack_col[r]) = s * slack_sign[r];
      if (needs_art[r]) {
        at(r, next_art) = 1.0;
        basis_[r] = next_art++;
      } else {
        basis_[r] = slack_col[r];
      }
    }
    art_row_.assign(cols_, -1);
    for (int r = 0; r < m_; ++r)
      if (basis_[r] >= first_art_) art_row_[basis_[r]] = r;

    double cmax = 0.0;
    for (double c : lp.objective) cmax = std::max(cmax, std::abs(c));
    cost_scale_ = std::max(1.0, cmax);
    double bmax = 0.0;
    for (double b : beta_) bmax = std::max(bmax, std::abs(b));
    feas_tol_ = 1e-9 * std::max(1.0, bmax);
    max_iter_ = opt_.max_iterations > 0 ? opt_.max_iterations : 50 * (m_ + cols_) + 1000;
  }

  // Phase one: minimize the sum of artificials. Returns that minimum.
  double phase_one() {
    if (first_art_ == cols_) return 0.0;
    Vec cost(cols_, 0.0);
    for (int j = first_art_; j < cols_; ++j) cost[j] = -1.0;
    run(cost, /*allow_artificial=*/true, 1.0);
    double total = 0.0;
    for (int r = 0; r < m_; ++r)
      if (basis_[r] >= first_art_) total += value_of_basic(r);
    return total;
  }

  int worst_artificial_row() const {
    int worst = -1;
    double best = 0.0;
    for (int r = 0; r < m_; ++r) {
      if (basis_[r] >= first_art_ && value_of_basic(r) > best) {
        best = value_of_basic(r);
        worst = art_row_[basis_[r]];
      }
    }
    return worst;
  }

  void phase_two(const Vec& objective) {
    // Artificials are pinned to zero from here on.
    for (int j = first_art_; j < cols_; ++j) upper_[j] = 0.0;
    Vec cost(cols_, 0.0);
    std::copy(objective.begin(), objective.end(), cost.begin());
    run(cost, /*allow_artificial=*/false, cost_scale_);
  }

  Vec solution() const {
    Vec x(n_, 0.0);
    for (int r = 0; r < m_; ++r)
      if (basis_[r] < n_) x[basis_[r]] = beta_[r];
    for (int j = 0; j < n_; ++j) {
      if (flipped_[j]) x[j] = upper_[j] - x[j];
      x[j] = std::max(0.0, x[j]);
      if (std::isfinite(upper_[j])) x[j] = std::min(upper_[j], x[j]);
    }
    return x;
  }

  double feas_tol() const { return feas_tol_; }
  int iterations() const { return iterations_; }

 private:
  double& at(int r, int c) { return t_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return t_[static_cast<std::size_t>(r) * cols_ + c]; }

  double value_of_basic(int r) const {
    int j = basis_[r];
    return flipped_[j] ? upper_[j] - beta_[r] : beta_[r];
  }

  void run(const Vec& cost, bool allow_artificial, double scale) {
    std::vector<bool> is_basic(cols_, false);
    for (int r = 0; r < m_; ++r) is_basic[basis_[r]] = true;

    // Reduced costs in transformed coordinates.
    auto tcost = [&](int j) { return flipped_[j] ? -cost[j] : cost[j]; };
    Vec d(cols_);
    for (int j = 0; j < cols_; ++j) d[j] = tcost(j);
    for (int r = 0; r < m_; ++r) {
      double cb = tcost(basis_[r]);
      if (cb == 0.0) continue;
      const double* row = &t_[static_cast<std::size_t>(r) * cols_];
      for (int j = 0; j < cols_; ++j) d[j] -= cb * row[j];
    }

    const double dtol = 1e-11 * scale;
    bool bland = false;
    int streak = 0;
    for (;;) {
      if (++iterations_ > max_iter_) {
        throw SolverError("solve_lp: iteration guard exceeded (" + std::to_string(max_iter_) +
                          " pivots); possible cycling");
      }
      int enter = -1;
      double best_d = dtol;
      for (int j = 0; j < cols_; ++j) {
        if (is_basic[j]) continue;
        if (!allow_artificial && j >= first_art_) continue;
        if (upper_[j] == 0.0) continue;
        if (d[j] > best_d) {
          enter = j;
          best_d = d[j];
          if (bland) break;
        }
      }
      if (enter < 0) return;

      // Ratio test.
      int leave = -1;
      bool leave_at_upper = false;
      double leave_piv = 0.0;
      double best_ratio = kInf;
      for (int r = 0; r < m_; ++r) {
        double a = at(r, enter);
        if (std::abs(a) <= opt_.pivot_tol) continue;
        double ratio;
        bool to_upper = false;
        if (a > 0.0) {
          ratio = std::max(0.0, beta_[r]) / a;
        } else {
          double ub = upper_[basis_[r]];
          if (!std::isfinite(ub)) continue;
          ratio = std::max(0.0, ub - beta_[r]) / (-a);
          to_upper = true;
        }
        bool take;
        if (leave < 0 || ratio < best_ratio - 1e-12) {
          take = true;
        } else if (ratio <= best_ratio + 1e-12) {
          // Tie: Bland prefers the smallest basic index, Dantzig the
          // largest pivot magnitude.
          take = bland ? basis_[r] < basis_[leave] : std::abs(a) > std::abs(leave_piv);
        } else {
          take = false;
        }
        if (take) {
          best_ratio = std::min(best_ratio, ratio);
          leave = r;
          leave_at_upper = to_upper;
          leave_piv = a;
        }
      }
      double limit = best_ratio;
      if (leave >= 0 && !(best_ratio < upper_[enter])) leave = -1;

      if (leave < 0) {
        if (!std::isfinite(upper_[enter])) throw SolverError("solve_lp: unbounded objective");
        flip_nonbasic(enter, d);
        streak = 0;
        continue;
      }
      if (leave_at_upper) flip_basic(leave);
      if (limit <= 1e-12) {
        if (++streak >= opt_.degenerate_streak_limit) bland = true;
      } else {
        streak = 0;
      }
      is_basic[basis_[leave]] = false;
      pivot(leave, enter, d);
      is_basic[enter] = true;
    }
  }

  void flip_nonbasic(int j, Vec& d) {
    double u = upper_[j];
    for (int r = 0; r < m_; ++r) {
      double& a = at(r, j);
      beta_[r] -= a * u;
      a = -a;
    }
    d[j] = -d[j];
    flipped_[j] = !flipped_[j];
  }

  void flip_basic(int r) {
    int j = basis_[r];
    double* row = &t_[static_cast<std::size_t>(r) * cols_];
    for (int c = 0; c < cols_; ++c)
      if (c != j) row[c] = -row[c];
    beta_[r] = upper_[j] - beta_[r];
    flipped_[j] = !flipped_[j];
  }

  void pivot(int r, int j, Vec& d) {
    double* prow = &t_[static_cast<std::size_t>(r) * cols_];
    double inv = 1.0 / prow[j];
    for (int c = 0; c < cols_; ++c) prow[c] *= inv;
    beta_[r] *= inv;
    prow[j] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &t_[static_cast<std::size_t>(i) * cols_];
      double f = row[j];
      if (f == 0.0) continue;
      for (int c = 0; c < cols_; ++c) row[c] -= f * prow[c];
      row[j] = 0.0;
      beta_[i] -= f * beta_[r];
    }
    double f = d[j];
    if (f != 0.0) {
      for (int c = 0; c < cols_; ++c) d[c] -= f * prow[c];
      d[j] = 0.0;
    }
    basis_[r] = j;
  }

  LpOptions opt_;
  int n_ = 0, m_ = 0, cols_ = 0, first_art_ = 0;
  std::vector<double> t_;
  Vec beta_;
  std::vector<int> basis_;
  Vec upper_;
  std::vector<bool> flipped_;
  std::vector<int> art_row_;
  double cost_scale_ = 1.0;
  double feas_tol_ = 1e-9;
  int max_iter_ = 0;
  int iterations_ = 0;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const LpOptions& options) {
  Tableau tab(lp, options);
  double infeas = tab.phase_one();
  if (infeas > tab.feas_tol()) {
    int row = tab.worst_artificial_row();
    throw InfeasibleError("solve_lp: infeasible (phase-one residual " + std::to_string(infeas) +
                              ", certificate row " + std::to_string(row) + ")",
                          row, infeas);
  }
  tab.phase_two(lp.objective);
  LpResult res;
  res.x = tab.solution();
  res.objective = dot(lp.objective, res.x);
  res.iterations = tab.iterations();
  return res;
}

double lp_infeasibility(const LinearSystem& system, const LpOptions& options) {
  LinearProgram lp(system, Vec(system.num_vars, 0.0));
  Tableau tab(lp, options);
  return std::max(0.0, tab.phase_one());
}

}  // namespace drsub
