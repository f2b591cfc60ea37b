#pragma once

#include <limits>
#include <vector>

#include "drsub/vecmath.hpp"

namespace drsub {

enum class Sense { kLessEqual, kEqual, kGreaterEqual };

/// One linear constraint <a, x> (sense) rhs with `a` stored sparsely.
struct SparseRow {
  std::vector<int> index;
  Vec value;
  Sense sense = Sense::kLessEqual;
  double rhs = 0.0;

  void add(int j, double v) {
    if (v != 0.0) {
      index.push_back(j);
      value.push_back(v);
    }
  }
  double eval(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < index.size(); ++k) s += value[k] * x[index[k]];
    return s;
  }
  /// Amount by which x violates the row (0 when satisfied).
  double violation(std::span<const double> x) const;
};

/// {x : rows hold, 0 <= x <= upper}. Upper bounds may be +inf.
struct LinearSystem {
  int num_vars = 0;
  Vec upper;
  std::vector<SparseRow> rows;

  explicit LinearSystem(int n = 0, double ub = std::numeric_limits<double>::infinity())
      : num_vars(n), upper(n, ub) {}

  /// Largest violation over rows and bounds.
  double violation(std::span<const double> x) const;
};

/// maximize <objective, x> over a LinearSystem.
struct LinearProgram : LinearSystem {
  Vec objective;

  explicit LinearProgram(int n = 0, double ub = std::numeric_limits<double>::infinity())
      : LinearSystem(n, ub), objective(n, 0.0) {}
  LinearProgram(LinearSystem system, Vec c) : LinearSystem(std::move(system)), objective(std::move(c)) {}
};

struct LpOptions {
  double pivot_tol = 1e-10;
  /// Consecutive degenerate pivots tolerated under Dantzig pricing before
  /// switching permanently to Bland's rule.
  int degenerate_streak_limit = 30;
  int max_iterations = 0;  // 0 = automatic, proportional to tableau size
};

struct LpResult {
  Vec x;
  double objective = 0.0;
  int iterations = 0;
};

/// Dense two-phase primal simplex with bounded variables. Throws
/// InfeasibleError (with the offending row) or SolverError.
LpResult solve_lp(const LinearProgram& lp, const LpOptions& options = {});

/// Optimal phase-one value: the minimum total constraint violation that the
/// artificial variables must absorb. Zero (up to rounding) iff feasible.
double lp_infeasibility(const LinearSystem& system, const LpOptions& options = {});

}  // namespace drsub
