#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drsub/objectives.hpp"
#include "drsub/polytope.hpp"

namespace drsub {

enum class Variant { kAlg1, kAlg2, kAlg3, kFwDown, kFwGeneral };
std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

/// Update rule for the down-closed Frank-Wolfe baseline. `kBian` is the
/// published method (b <= 1 - z, z += eps b); `kMeasured` is measured
/// continuous greedy (z += eps (1 - z) (.) b).
enum class FwRule { kBian, kMeasured };

/// 1/ceil(1/eps), for Alg. 1 and the baselines.
double snap_epsilon(double eps);
/// Also enforces eps <= 1/30.
double snap_epsilon_hybrid(double eps);
/// eps * floor(t_s / eps), tolerant of rounding in t_s.
double snap_t_s(double t_s, double eps);

struct Iterate {
  int i = 0;
  Vec y, z, w;     // w = y (+) z
  double F_w = 0.0;
  double F_z = 0.0;
  double lp_value = 0.0;  // NaN at i = 0
  Vec a, b, c;     // LP solution that produced this iterate (empty at i = 0)
};

struct Trace {
  Variant variant = Variant::kAlg2;
  double epsilon = 0.0;  // effective, after snapping
  double step = 0.0;     // move length per iteration (ln 2 * eps for fw_general)
  double t_s = 0.0;
  double m = 0.0;        // l-inf norm of the starting y (of x for fw_general)
  std::uint64_t seed = 0;
  std::vector<Iterate> iters;
  int first_admissible = 0;  // output is the best F_w over [first_admissible, last]
  int best_index = 0;
  double best_value = 0.0;
  std::vector<std::string> violations;

  const Vec& best_point() const { return iters.at(best_index).w; }
  /// Running max of F_w over all recorded i.
  Vec best_so_far() const;
};

/// Alg. 1. Throws InfeasibleError at the first iteration whose growth
/// constraint cannot be met (F_p1 too large).
Trace run_alg1(const Objective& F, const Decomposition& dec, double epsilon, double F_p1);
Trace run_alg2(const Objective& F, const Decomposition& dec, double epsilon, double t_s);
Trace run_alg3(const Objective& F, const Decomposition& dec, double epsilon, double t_s);
Trace run_fw_downclosed(const Objective& F, const HPolytope& D, double epsilon,
                        FwRule rule = FwRule::kBian);
Trace run_fw_general(const Objective& F, const Decomposition& dec, double epsilon);

struct GridResult {
  Trace best;
  double t_s = 0.0;
  Vec values;  // output value for each grid t_s = k * eps
};

/// Every grid t_s, best output kept. `threads` > 1 runs t_s values concurrently.
GridResult run_alg2_grid(const Objective& F, const Decomposition& dec, double epsilon, int threads = 1);
GridResult run_alg3_grid(const Objective& F, const Decomposition& dec, double epsilon, int threads = 1);

/// Membership checks on every iterate: y in N, z in eps*i*D (row checks) and
/// w in (N + D) cap box (LP residual, skipped when `lp_checks` is false).
/// Appends messages to trace.violations and returns how many were added.
int verify_trace(Trace& trace, const Decomposition& dec, bool lp_checks = true, double tol = 1e-8);

struct PotentialReport {
  Vec phi;          // phi(0..eps^{-1} t_s)
  int violations = 0;
  double worst = 0.0;  // largest shortfall below the allowed decrease
};
/// Recomputes the phase-one potential of an Alg. 2 trace and checks its
/// approximate monotonicity.
PotentialReport potential_check(const Trace& trace, double beta, double diameter);

/// (1-m)[(T - t_s)e^{-T} F_p2 + t_s^2 e^{-t_s-T}/2 F_p1 + (e^{-T} - e^{-t_s-T}) F_o]
double theorem1_value(double F_o, double F_p1, double F_p2, double m, double t_s, double T);

struct BoundResult {
  double value = 0.0;
  double t_s = 0.0;
  double T = 0.0;
  std::string note;
};
/// Max of theorem1_value over t_s <= T on a grid; O(eps) terms dropped.
BoundResult theorem1_bound(double F_o, double F_p1, double F_p2, double m, double grid_step);

struct OptEstimate {
  double value = 0.0;
  Vec point;
  bool from_search = false;  // true if a gradient-ascent start beat every candidate
};
/// Reference optimum: max of the candidate points and `starts` projected
/// gradient ascent runs over the joint (a, b) body with objective F(a + b).
OptEstimate reference_opt(const Objective& F, const Decomposition& dec,
                          const std::vector<Vec>& candidates, int starts, Rng& rng,
                          int iterations = 200);

void write_trace_csv(std::ostream& os, const Trace& t, bool header = true);
std::string trace_summary_json(const Trace& t);

}  // namespace drsub
