#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drsub/objectives.hpp"
#include "drsub/offline.hpp"
#include "drsub/online.hpp"
#include "drsub/polytope.hpp"

namespace drsub {

// --- graphs ----------------------------------------------------------------------

/// Undirected weighted graph. Each unordered pair appears once in `edges`
/// (u < v) with duplicate input lines summed.
struct Graph {
  std::size_t n = 0;
  std::vector<Edge> edges;
  int self_loops = 0;    // dropped
  int duplicates = 0;    // lines merged into an earlier edge
  bool one_based = false;
};

/// Edge list, one "u v [w]" per line; '#' and '%' start comments. Ids are
/// taken as 1-based when the smallest id seen is 1, else 0-based. n is the
/// largest id + 1 after that shift, so isolated vertices below it survive.
/// Throws ConfigError with the line number on malformed lines and negative
/// weights.
Graph parse_graph(std::istream& in, const std::string& source = "<input>");
Graph ingest_graph(const std::string& path);

/// Per step, the subgraph induced by a fresh uniform subset of `size`
/// vertices, kept in dimension g.n with zero weight elsewhere.
std::vector<ObjectivePtr> sample_subgraph_stream(const Graph& g, std::size_t size, int L, double p, Rng& rng);

// --- constraints -----------------------------------------------------------------

/// N = {sum x = 0.1}, D = {sum x <= 0.9}; K is the band 0.1 <= sum x <= 1.
Decomposition revenue_constraint(std::size_t n);
/// N = {sum x = 1}, D = {sum x <= 1}.
Decomposition location_constraint(std::size_t n);

/// Samples box points and counts those where membership in (N + D) cap box
/// disagrees with lo <= sum x <= hi. Points within `margin` of either
/// boundary are skipped.
int band_cross_check(const Decomposition& dec, double lo, double hi, int samples, Rng& rng,
                     double margin = 1e-6);

// --- JSON ------------------------------------------------------------------------

/// {"n": 3, "rows": [{"a": [..], "b": 1.0, "eq": false}], "down_closed": true}
std::string polytope_to_json(const HPolytope& P);
HPolytope polytope_from_json(const std::string& text);
/// {"N": polytope, "D": polytope}
std::string decomposition_to_json(const Decomposition& dec);
Decomposition decomposition_from_json(const std::string& text);
/// H, h, c, A, b, u and the offset M of a generated QP.
std::string qp_instance_to_json(const QpInstance& inst);

// --- experiments -----------------------------------------------------------------

enum class Experiment { kQpOffline, kRevenueOffline, kRevenueOnline, kLocationOnline };
std::string to_string(Experiment e);

struct ExperimentConfig {
  Experiment experiment = Experiment::kQpOffline;
  std::vector<std::string> solvers;
  double epsilon = 0.01;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> n{8};      // QP dimensions, or location sites (first entry)
  double m_rows_ratio = 1.0;          // QP rows = round(ratio * n)
  QpDistribution dist = QpDistribution::kUniform;
  double p = 1e-4;                    // revenue advocate probability
  std::string graph;                  // edge list; empty means synthetic
  std::size_t graph_nodes = 200;      // synthetic Erdos-Renyi size
  double p_edge = 0.05;
  std::size_t subgraph = 50;
  int L = 200;
  double t_s = 0.0;                   // fixed-mode Alg. 4 only
  int opt_starts = 50;                // reference OPT restarts (QP)
  std::string out = "out";
  int threads = 1;
};

/// Parses and validates; unknown fields, wrong types and bad values throw
/// ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& c);

struct RunSummary {
  std::vector<std::string> files;  // written, relative to config.out
  int cells = 0;
  int failed_cells = 0;
  int violations = 0;
  std::string summary_json;
  std::string manifest_json;
};

/// Runs every (instance, solver) cell and writes CSVs, summary.json and
/// manifest.json under config.out. A failing cell is recorded in the
/// manifest and the rest proceed. `dry_run` only echoes the config.
RunSummary run(const ExperimentConfig& config, bool dry_run = false);

// --- invariant suite ---------------------------------------------------------------

struct InvariantReport {
  int instances = 0;
  int traces = 0;
  int iterates = 0;
  int online_steps = 0;
  std::vector<std::string> violations;
};

/// Seeded instances of every objective family with n <= n_max, every
/// offline solver plus a short Alg. 4 stream, checking membership of every
/// iterate and the norm bounds.
InvariantReport run_invariant_suite(int per_family, std::size_t n_max, double epsilon, std::uint64_t seed,
                                    int threads = 1);

}  // namespace drsub
