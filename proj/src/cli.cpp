#include "drsub/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "drsub/errors.hpp"
#include "drsub/lp.hpp"
#include "parallel.hpp"

namespace drsub {

using nlohmann::json;

// --- graphs ----------------------------------------------------------------------

namespace {

std::string at_line(const std::string& source, int line) {
  return source + ":" + std::to_string(line) + ": ";
}

bool parse_id(std::string_view tok, long long& out) {
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && p == tok.data() + tok.size();
}

bool parse_real(std::string_view tok, double& out) {
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && p == tok.data() + tok.size();
}

}  // namespace

Graph parse_graph(std::istream& in, const std::string& source) {
  struct Raw {
    long long u, v;
    double w;
  };
  std::vector<Raw> raw;
  long long lowest = -1;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (auto c = line.find_first_of("#%"); c != std::string::npos) line.erase(c);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() < 2) throw ConfigError(at_line(source, lineno) + "expected 'u v [w]'");
    Raw r{0, 0, 1.0};
    if (!parse_id(tok[0], r.u) || !parse_id(tok[1], r.v) || r.u < 0 || r.v < 0)
      throw ConfigError(at_line(source, lineno) + "vertex ids must be non-negative integers");
    // Further columns (timestamps in some dumps) are ignored.
    if (tok.size() >= 3) {
      if (!parse_real(tok[2], r.w) || !std::isfinite(r.w))
        throw ConfigError(at_line(source, lineno) + "bad weight '" + tok[2] + "'");
      if (r.w < 0.0) throw ConfigError(at_line(source, lineno) + "negative weight " + tok[2]);
    }
    const long long lo = std::min(r.u, r.v);
    lowest = lowest < 0 ? lo : std::min(lowest, lo);
    raw.push_back(r);
  }
  Graph g;
  if (raw.empty()) return g;
  g.one_based = lowest == 1;
  const long long shift = g.one_based ? 1 : 0;
  std::map<std::pair<long long, long long>, std::size_t> seen;
  long long top = 0;
  for (const Raw& r : raw) {
    const long long u = r.u - shift, v = r.v - shift;
    top = std::max({top, u, v});
    if (u == v) {
      ++g.self_loops;
      continue;
    }
    auto key = std::minmax(u, v);
    auto [it, fresh] = seen.emplace(key, g.edges.size());
    if (fresh) {
      g.edges.push_back({static_cast<int>(key.first), static_cast<int>(key.second), r.w});
    } else {
      g.edges[it->second].w += r.w;
      ++g.duplicates;
    }
  }
  g.n = static_cast<std::size_t>(top + 1);
  return g;
}

Graph ingest_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file '" + path + "'");
  return parse_graph(in, path);
}

std::vector<ObjectivePtr> sample_subgraph_stream(const Graph& g, std::size_t size, int L, double p, Rng& rng) {
  if (size > g.n) throw ArgumentError("sample_subgraph_stream: subgraph larger than the graph");
  if (L < 0) throw ArgumentError("sample_subgraph_stream: L must be >= 0");
  std::vector<ObjectivePtr> out;
  out.reserve(L);
  std::vector<int> perm(g.n);
  std::vector<char> in(g.n);
  std::vector<Edge> kept;
  for (int l = 0; l < L; ++l) {
    std::iota(perm.begin(), perm.end(), 0);
    std::fill(in.begin(), in.end(), 0);
    // Partial Fisher-Yates: the first `size` entries are a uniform subset.
    for (std::size_t k = 0; k < size; ++k) {
      std::size_t r = k + static_cast<std::size_t>(rng.below(g.n - k));
      std::swap(perm[k], perm[r]);
      in[perm[k]] = 1;
    }
    kept.clear();
    for (const Edge& e : g.edges)
      if (in[e.u] && in[e.v]) kept.push_back(e);
    out.push_back(std::make_shared<RevenueObjective>(g.n, kept, p));
  }
  return out;
}

// --- constraints -----------------------------------------------------------------

Decomposition revenue_constraint(std::size_t n) {
  if (n == 0) throw ArgumentError("revenue_constraint: n must be >= 1");
  return Decomposition(HPolytope::sum_band(n, 0.1, 0.1), HPolytope::sum_band(n, 0.0, 0.9));
}

Decomposition location_constraint(std::size_t n) {
  if (n == 0) throw ArgumentError("location_constraint: n must be >= 1");
  return Decomposition(HPolytope::sum_band(n, 1.0, 1.0), HPolytope::sum_band(n, 0.0, 1.0));
}

int band_cross_check(const Decomposition& dec, double lo, double hi, int samples, Rng& rng, double margin) {
  const std::size_t n = dec.dim();
  int mismatches = 0;
  Vec x(n);
  for (int s = 0; s < samples; ++s) {
    // Random direction on the simplex scaled to a target sum around the band.
    const double target = rng.uniform(0.0, std::min(1.5 * hi, static_cast<double>(n)));
    double total = 0.0;
    for (double& v : x) total += (v = rng.exponential(1.0));
    double sum = 0.0;
    for (double& v : x) sum += (v = std::min(1.0, v * target / total));
    if (std::abs(sum - lo) < margin || std::abs(sum - hi) < margin) continue;
    const bool truth = sum >= lo && sum <= hi;
    const bool member = dec.membership_residual(x) <= 1e-8;
    if (truth != member) ++mismatches;
  }
  return mismatches;
}

// --- JSON ------------------------------------------------------------------------

namespace {

json polytope_json(const HPolytope& P) {
  json rows = json::array();
  for (const DenseRow& r : P.dense_rows()) rows.push_back({{"a", r.a}, {"b", r.b}, {"eq", r.eq}});
  return {{"n", P.dim()}, {"rows", rows}, {"down_closed", P.down_closed()}};
}

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

HPolytope polytope_from(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "n" && it.key() != "rows" && it.key() != "down_closed")
      throw ConfigError(where + ": unknown field '" + it.key() + "'");
  const auto n = get_field<std::size_t>(j, "n", where);
  const bool dc = get_field<bool>(j, "down_closed", where);
  std::vector<DenseRow> rows;
  const json& jr = j.contains("rows") ? j.at("rows") : json::array();
  if (!jr.is_array()) throw ConfigError(where + ": 'rows' must be an array");
  for (std::size_t k = 0; k < jr.size(); ++k) {
    const std::string rw = where + ".rows[" + std::to_string(k) + "]";
    DenseRow r;
    r.a = get_field<Vec>(jr[k], "a", rw);
    r.b = get_field<double>(jr[k], "b", rw);
    r.eq = jr[k].contains("eq") ? get_field<bool>(jr[k], "eq", rw) : false;
    if (r.a.size() != n) throw ConfigError(rw + ": 'a' must have n entries");
    rows.push_back(std::move(r));
  }
  return HPolytope(n, std::move(rows), dc);
}

json parse_text(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string polytope_to_json(const HPolytope& P) { return polytope_json(P).dump(); }

HPolytope polytope_from_json(const std::string& text) {
  return polytope_from(parse_text(text, "polytope"), "polytope");
}

std::string decomposition_to_json(const Decomposition& dec) {
  return json{{"N", polytope_json(dec.general())}, {"D", polytope_json(dec.down())}}.dump();
}

Decomposition decomposition_from_json(const std::string& text) {
  json j = parse_text(text, "decomposition");
  if (!j.is_object() || !j.contains("N") || !j.contains("D") || j.size() != 2)
    throw ConfigError("decomposition: expected exactly the fields 'N' and 'D'");
  return Decomposition(polytope_from(j.at("N"), "N"), polytope_from(j.at("D"), "D"));
}

std::string qp_instance_to_json(const QpInstance& inst) {
  const Matrix& H = inst.H_orig;
  std::vector<Vec> Hrows(H.n, Vec(H.n));
  for (std::size_t i = 0; i < H.n; ++i)
    for (std::size_t j = 0; j < H.n; ++j) Hrows[i][j] = H(i, j);
  json j;
  j["n"] = H.n;
  j["H"] = Hrows;
  j["h"] = inst.h_orig;
  j["c"] = inst.objective->c();
  j["A"] = inst.A_orig;
  j["b"] = Vec(inst.A_orig.size(), 1.0);
  j["u"] = inst.u;
  j["offset_M"] = inst.offset_M;
  return j.dump(2);
}

// --- config ----------------------------------------------------------------------

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::kQpOffline: return "qp-offline";
    case Experiment::kRevenueOffline: return "revenue-offline";
    case Experiment::kRevenueOnline: return "revenue-online";
    case Experiment::kLocationOnline: return "location-online";
  }
  return "?";
}

namespace {

Experiment parse_experiment(const std::string& s) {
  for (auto e : {Experiment::kQpOffline, Experiment::kRevenueOffline, Experiment::kRevenueOnline,
                 Experiment::kLocationOnline})
    if (to_string(e) == s) return e;
  throw ConfigError("config: unknown experiment '" + s + "'");
}

bool is_online(Experiment e) { return e == Experiment::kRevenueOnline || e == Experiment::kLocationOnline; }

const std::set<std::string>& allowed_solvers(Experiment e) {
  static const std::set<std::string> offline{"alg2", "alg3", "fw_down", "fw_general"};
  static const std::set<std::string> online{"alg4", "alg4_fixed", "baseline"};
  return is_online(e) ? online : offline;
}

std::vector<std::string> default_solvers(Experiment e) {
  switch (e) {
    case Experiment::kQpOffline: return {"alg3", "fw_down", "fw_general"};
    case Experiment::kRevenueOffline: return {"alg2", "alg3", "fw_general"};
    default: return {"alg4", "baseline"};
  }
}

template <class T>
T num(const json& j, const char* key, T lo, T hi) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(std::string("config: '") + key + "' must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(std::string("config: '") + key + "' must be an integer");
  }
  T x = v.get<T>();
  if (!(x >= lo && x <= hi)) throw ConfigError(std::string("config: '") + key + "' out of range");
  return x;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j = parse_text(text, "config");
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known{"experiment", "solvers", "epsilon",    "seeds", "n",
                                           "m_rows_ratio", "dist",  "p",          "graph", "graph_nodes",
                                           "p_edge",     "subgraph", "L",         "t_s",   "opt_starts",
                                           "out",        "threads"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("config: unknown field '" + it.key() + "'");
  if (!j.contains("experiment")) throw ConfigError("config: missing field 'experiment'");

  ExperimentConfig c;
  try {
    c.experiment = parse_experiment(j.at("experiment").get<std::string>());
    c.solvers = j.contains("solvers") ? j.at("solvers").get<std::vector<std::string>>() : default_solvers(c.experiment);
    if (j.contains("seeds")) {
      const json& s = j.at("seeds");
      c.seeds = s.is_array() ? s.get<std::vector<std::uint64_t>>() : std::vector<std::uint64_t>{s.get<std::uint64_t>()};
    }
    if (j.contains("n")) {
      const json& s = j.at("n");
      c.n = s.is_array() ? s.get<std::vector<std::size_t>>() : std::vector<std::size_t>{s.get<std::size_t>()};
    }
    if (j.contains("dist")) c.dist = parse_qp_distribution(j.at("dist").get<std::string>());
    if (j.contains("graph")) c.graph = j.at("graph").get<std::string>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
  } catch (const json::exception&) {
    throw ConfigError("config: a field has the wrong type");
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (j.contains("epsilon")) c.epsilon = num<double>(j, "epsilon", 1e-6, 1.0);
  if (j.contains("m_rows_ratio")) c.m_rows_ratio = num<double>(j, "m_rows_ratio", 1e-9, 1e9);
  if (j.contains("p")) c.p = num<double>(j, "p", 1e-300, 1.0 - 1e-12);
  if (j.contains("graph_nodes")) c.graph_nodes = num<std::size_t>(j, "graph_nodes", 2, 1u << 20);
  if (j.contains("p_edge")) c.p_edge = num<double>(j, "p_edge", 0.0, 1.0);
  if (j.contains("subgraph")) c.subgraph = num<std::size_t>(j, "subgraph", 1, 1u << 20);
  if (j.contains("L")) c.L = num<int>(j, "L", 1, 10'000'000);
  if (j.contains("t_s")) c.t_s = num<double>(j, "t_s", 0.0, 1.0);
  if (j.contains("opt_starts")) c.opt_starts = num<int>(j, "opt_starts", 0, 1'000'000);
  if (j.contains("threads")) c.threads = num<int>(j, "threads", 1, 1024);

  if (c.solvers.empty()) throw ConfigError("config: 'solvers' must not be empty");
  for (const auto& s : c.solvers)
    if (!allowed_solvers(c.experiment).count(s))
      throw ConfigError("config: solver '" + s + "' is not available for " + to_string(c.experiment));
  if (c.seeds.empty()) throw ConfigError("config: 'seeds' must not be empty");
  if (c.n.empty()) throw ConfigError("config: 'n' must not be empty");
  for (std::size_t n : c.n) {
    if (n == 0) throw ConfigError("config: 'n' entries must be >= 1");
    if (c.experiment == Experiment::kQpOffline && n > kMaxEnumerationDim)
      throw ConfigError("config: qp-offline needs n <= " + std::to_string(kMaxEnumerationDim));
  }
  if (c.graph.empty() && (c.experiment == Experiment::kRevenueOnline) && c.subgraph > c.graph_nodes)
    throw ConfigError("config: 'subgraph' exceeds 'graph_nodes'");
  if (c.out.empty()) throw ConfigError("config: 'out' must not be empty");
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["solvers"] = c.solvers;
  j["epsilon"] = c.epsilon;
  j["seeds"] = c.seeds;
  j["n"] = c.n;
  j["m_rows_ratio"] = c.m_rows_ratio;
  j["dist"] = to_string(c.dist);
  j["p"] = c.p;
  j["graph"] = c.graph;
  j["graph_nodes"] = c.graph_nodes;
  j["p_edge"] = c.p_edge;
  j["subgraph"] = c.subgraph;
  j["L"] = c.L;
  j["t_s"] = c.t_s;
  j["opt_starts"] = c.opt_starts;
  j["out"] = c.out;
  j["threads"] = c.threads;
  return j.dump(2);
}

// --- run -------------------------------------------------------------------------

namespace {

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

double effective_epsilon(const std::string& solver, double eps) {
  if (solver == "alg2" || solver == "alg3") return snap_epsilon_hybrid(eps);
  return snap_epsilon(eps);
}

struct CellOutcome {
  std::string instance;
  std::string solver;
  std::string error;  // empty on success
  double value = 0.0;
  int violations = 0;
};

struct Stats {
  double mean = 0.0, std = 0.0;
  int count = 0;
};

Stats stats(const Vec& v) {
  Stats s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= s.count;
  if (s.count > 1) {
    for (double x : v) s.std += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(s.std / (s.count - 1));
  }
  return s;
}

std::string error_text(const std::exception& e) { return e.what(); }

// The solver output of an offline cell, re-validated before it is written.
Trace run_offline_solver(const std::string& solver, const Objective& F, const Decomposition& dec, double eps) {
  if (solver == "alg2") return run_alg2_grid(F, dec, eps).best;
  if (solver == "alg3") return run_alg3_grid(F, dec, eps).best;
  if (solver == "fw_down") {
    // K = D exactly when N = {0}, i.e. max of sum(x) over N is zero.
    LinearProgram lp;
    static_cast<LinearSystem&>(lp) = dec.general().system();
    lp.objective.assign(dec.dim(), 1.0);
    if (solve_lp(lp).objective > 1e-9) throw ArgumentError("fw_down needs N = {0}");
    return run_fw_downclosed(F, dec.down(), eps, FwRule::kBian);
  }
  if (solver == "fw_general") return run_fw_general(F, dec, eps);
  throw ArgumentError("unknown offline solver '" + solver + "'");
}

struct OfflineInstance {
  std::string label;
  std::size_t n = 0, m_rows = 0;
  std::uint64_t seed = 0;
};

struct OfflineCell {
  std::vector<CellOutcome> outcomes;
  std::vector<Trace> traces;  // parallel to outcomes; empty Trace on failure
  double ref_opt = std::nan("");
};

}  // namespace

RunSummary run(const ExperimentConfig& config, bool dry_run) {
  RunSummary summary;
  json manifest;
  manifest["config"] = json::parse(config_to_json(config));
  manifest["config_hash"] = fnv1a_hex(config_to_json(config));
  manifest["seeds"] = config.seeds;
  json eff = json::object();
  for (const auto& s : config.solvers) eff[s] = effective_epsilon(s, config.epsilon);
  manifest["effective_epsilon"] = eff;
  if (dry_run) {
    manifest["dry_run"] = true;
    summary.manifest_json = manifest.dump(2);
    return summary;
  }

  namespace fs = std::filesystem;
  fs::create_directories(config.out);
  auto write_file = [&](const std::string& name, const std::string& body) {
    std::ofstream os(fs::path(config.out) / name, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + (fs::path(config.out) / name).string() + "'");
    os << body;
    summary.files.push_back(name);
  };

  json cells = json::array();
  json groups = json::array();
  const Experiment ex = config.experiment;

  if (!is_online(ex)) {
    std::vector<OfflineInstance> inst;
    if (ex == Experiment::kQpOffline) {
      for (std::size_t n : config.n)
        for (auto seed : config.seeds) {
          auto rows = static_cast<std::size_t>(std::max(1.0, std::round(config.m_rows_ratio * n)));
          inst.push_back({"n=" + std::to_string(n) + ",seed=" + std::to_string(seed), n, rows, seed});
        }
    } else {
      for (auto seed : config.seeds) inst.push_back({"seed=" + std::to_string(seed), 0, 0, seed});
    }
    std::vector<OfflineCell> out(inst.size());
    std::optional<Graph> shared_graph;
    if (ex == Experiment::kRevenueOffline && !config.graph.empty()) shared_graph = ingest_graph(config.graph);

    detail::parallel_for(static_cast<int>(inst.size()), config.threads, [&](int k) {
      const OfflineInstance& I = inst[k];
      OfflineCell& cell = out[k];
      std::shared_ptr<const Objective> F;
      std::optional<Decomposition> dec;
      try {
        if (ex == Experiment::kQpOffline) {
          QpInstance q = make_qp_instance(I.n, I.m_rows, config.dist, I.seed);
          F = q.objective;
          dec.emplace(q.decomposition);
        } else {
          Graph g;
          if (shared_graph) {
            g = *shared_graph;
          } else {
            Rng grng = Rng(I.seed).split(1);
            g.n = config.graph_nodes;
            g.edges = erdos_renyi(g.n, config.p_edge, grng);
          }
          F = std::make_shared<RevenueObjective>(g.n, g.edges, config.p);
          dec.emplace(revenue_constraint(g.n));
        }
      } catch (const std::exception& e) {
        for (const auto& s : config.solvers) {
          cell.outcomes.push_back({I.label, s, "instance: " + error_text(e)});
          cell.traces.emplace_back();
        }
        return;
      }
      std::vector<Vec> candidates;
      for (const auto& s : config.solvers) {
        CellOutcome oc{I.label, s, {}};
        Trace t;
        try {
          t = run_offline_solver(s, *F, *dec, config.epsilon);
          const double resid = dec->membership_residual(t.best_point());
          if (resid > 1e-8) ++oc.violations;
          oc.value = t.best_value;
          candidates.push_back(t.best_point());
        } catch (const std::exception& e) {
          oc.error = error_text(e);
        }
        cell.outcomes.push_back(std::move(oc));
        cell.traces.push_back(std::move(t));
      }
      if (ex == Experiment::kQpOffline) {
        try {
          Rng orng = Rng(I.seed).split(7);
          cell.ref_opt = reference_opt(*F, *dec, candidates, config.opt_starts, orng).value;
        } catch (const std::exception&) {
          // Ratios stay NaN; the solver cells themselves succeeded.
        }
      }
    });

    std::ostringstream csv, traces;
    std::map<std::pair<std::size_t, std::string>, Vec> by_group;
    if (ex == Experiment::kQpOffline) {
      csv << "n,m_rows,seed,solver,eps,t_s,value,ref_opt,ratio,violations\n";
    } else {
      csv << "seed,solver,eps,t_s,value,violations\n";
    }
    csv.precision(17);
    bool header = true;
    for (std::size_t k = 0; k < inst.size(); ++k) {
      const OfflineInstance& I = inst[k];
      for (std::size_t s = 0; s < out[k].outcomes.size(); ++s) {
        const CellOutcome& oc = out[k].outcomes[s];
        ++summary.cells;
        summary.violations += oc.violations;
        json cj{{"instance", oc.instance}, {"solver", oc.solver}, {"status", oc.error.empty() ? "ok" : "failed"}};
        if (!oc.error.empty()) {
          cj["error"] = oc.error;
          ++summary.failed_cells;
          cells.push_back(cj);
          continue;
        }
        cells.push_back(cj);
        const Trace& t = out[k].traces[s];
        if (ex == Experiment::kQpOffline) {
          const double ratio = oc.value / out[k].ref_opt;
          csv << I.n << ',' << I.m_rows << ',' << I.seed << ',' << oc.solver << ',' << t.epsilon << ',' << t.t_s
              << ',' << oc.value << ',' << out[k].ref_opt << ',' << ratio << ',' << oc.violations << '\n';
          by_group[{I.n, oc.solver}].push_back(ratio);
        } else {
          csv << I.seed << ',' << oc.solver << ',' << t.epsilon << ',' << t.t_s << ',' << oc.value << ','
              << oc.violations << '\n';
          by_group[{0, oc.solver}].push_back(oc.value);
          Trace tagged = t;
          tagged.seed = I.seed;
          write_trace_csv(traces, tagged, header);
          header = false;
        }
      }
    }
    for (const auto& [key, vals] : by_group) {
      Stats st = stats(vals);
      json g{{"solver", key.second}, {"mean", st.mean}, {"std", st.std}, {"count", st.count}};
      if (ex == Experiment::kQpOffline) {
        g["n"] = key.first;
        g["metric"] = "ratio_vs_reference_opt";
      } else {
        g["metric"] = "best_value";
      }
      groups.push_back(g);
    }
    const std::string stem = ex == Experiment::kQpOffline ? "qp_offline" : "revenue_offline";
    write_file(stem + ".csv", csv.str());
    if (ex == Experiment::kRevenueOffline) write_file(stem + "_traces.csv", traces.str());
  } else {
    // One cell per (seed, solver); streams are rebuilt per cell from the seed
    // so cells stay independent.
    struct OnlineCell {
      std::uint64_t seed;
      std::string solver;
      OnlineRun run;
      std::string error;
    };
    std::vector<OnlineCell> out;
    for (auto seed : config.seeds)
      for (const auto& s : config.solvers) out.push_back({seed, s, {}, {}});
    std::optional<Graph> shared_graph;
    if (ex == Experiment::kRevenueOnline && !config.graph.empty()) shared_graph = ingest_graph(config.graph);

    detail::parallel_for(static_cast<int>(out.size()), config.threads, [&](int k) {
      OnlineCell& cell = out[k];
      try {
        std::vector<ObjectivePtr> stream;
        std::optional<Decomposition> dec;
        if (ex == Experiment::kRevenueOnline) {
          Graph g;
          if (shared_graph) {
            g = *shared_graph;
          } else {
            Rng grng = Rng(cell.seed).split(1);
            g.n = config.graph_nodes;
            g.edges = erdos_renyi(g.n, config.p_edge, grng);
          }
          Rng srng = Rng(cell.seed).split(2);
          stream = sample_subgraph_stream(g, config.subgraph, config.L, config.p, srng);
          dec.emplace(revenue_constraint(g.n));
        } else {
          Rng lrng = Rng(cell.seed).split(3);
          for (auto& f : make_location_stream(config.n.front(), config.L, lrng)) stream.push_back(f);
          dec.emplace(location_constraint(config.n.front()));
        }
        if (cell.solver == "baseline") {
          cell.run = run_online_baseline(stream, *dec, config.epsilon);
        } else {
          OnlineOptions opt;
          opt.mode = cell.solver == "alg4" ? OnlineMode::kMeta : OnlineMode::kFixed;
          opt.t_s = config.t_s;
          cell.run = run_online_experiment(stream, *dec, config.epsilon, opt);
        }
      } catch (const std::exception& e) {
        cell.error = error_text(e);
      }
    });
    std::map<std::string, Vec> by_solver;
    const std::string stem = ex == Experiment::kRevenueOnline ? "revenue_online" : "location_online";
    for (const OnlineCell& cell : out) {
      ++summary.cells;
      const std::string label = "seed=" + std::to_string(cell.seed);
      json cj{{"instance", label}, {"solver", cell.solver}, {"status", cell.error.empty() ? "ok" : "failed"}};
      if (!cell.error.empty()) {
        cj["error"] = cell.error;
        ++summary.failed_cells;
        cells.push_back(cj);
        continue;
      }
      cj["violations"] = cell.run.violations;
      cells.push_back(cj);
      summary.violations += cell.run.violations;
      by_solver[cell.solver].push_back(cell.run.cumulative());
      std::ostringstream os;
      write_online_csv(os, cell.run);
      write_file(stem + "_s" + std::to_string(cell.seed) + "_" + cell.solver + ".csv", os.str());
    }
    for (const auto& [solver, vals] : by_solver) {
      Stats st = stats(vals);
      groups.push_back(
          {{"solver", solver}, {"metric", "cumulative_value"}, {"mean", st.mean}, {"std", st.std}, {"count", st.count}});
    }
  }

  json sj{{"experiment", to_string(ex)}, {"groups", groups}};
  summary.summary_json = sj.dump(2);
  manifest["cells"] = cells;
  manifest["failed_cells"] = summary.failed_cells;
  manifest["violations"] = summary.violations;
  write_file("summary.json", summary.summary_json + "\n");
  manifest["files"] = summary.files;
  summary.manifest_json = manifest.dump(2);
  write_file("manifest.json", summary.manifest_json + "\n");
  return summary;
}

// --- invariant suite ---------------------------------------------------------------

InvariantReport run_invariant_suite(int per_family, std::size_t n_max, double epsilon, std::uint64_t seed,
                                    int threads) {
  if (n_max < 3) throw ArgumentError("run_invariant_suite: n_max must be >= 3");
  struct Job {
    int family;  // 0 quadratic, 1 revenue, 2 location
    int index;
  };
  std::vector<Job> jobs;
  for (int f = 0; f < 3; ++f)
    for (int k = 0; k < per_family; ++k) jobs.push_back({f, k});
  std::vector<InvariantReport> parts(jobs.size());

  detail::parallel_for(static_cast<int>(jobs.size()), threads, [&](int jk) {
    const Job job = jobs[jk];
    InvariantReport& rep = parts[jk];
    const std::size_t n = 3 + static_cast<std::size_t>(job.index) % (n_max - 2);
    const std::uint64_t s = seed * 1000 + 100 * job.family + job.index;
    Rng rng(s);
    std::shared_ptr<const Objective> F;
    std::optional<Decomposition> dec;
    std::string fam;
    if (job.family == 0) {
      fam = "quadratic";
      QpInstance q = make_qp_instance(n, n, job.index % 2 ? QpDistribution::kExponential : QpDistribution::kUniform, s);
      F = q.objective;
      dec.emplace(q.decomposition);
    } else if (job.family == 1) {
      fam = "revenue";
      F = std::make_shared<RevenueObjective>(n, erdos_renyi(n, 0.5, rng), 0.3);
      dec.emplace(revenue_constraint(n));
    } else {
      fam = "location";
      F = make_location_instance(n, rng);
      dec.emplace(location_constraint(n));
    }
    rep.instances = 1;
    const std::string tag = fam + " n=" + std::to_string(n) + " seed=" + std::to_string(s) + " ";
    auto check = [&](Trace t) {
      verify_trace(t, *dec, true, 1e-8);
      ++rep.traces;
      rep.iterates += static_cast<int>(t.iters.size());
      for (const auto& v : t.violations) rep.violations.push_back(tag + to_string(t.variant) + ": " + v);
    };
    try {
      check(run_alg1(*F, *dec, epsilon, 0.0));
      for (double t_s : {0.0, 0.5, 1.0}) {
        check(run_alg2(*F, *dec, epsilon, t_s));
        check(run_alg3(*F, *dec, epsilon, t_s));
      }
      if (job.family == 0) check(run_fw_downclosed(*F, dec->down(), epsilon, FwRule::kBian));
      check(run_fw_general(*F, *dec, epsilon));

      OnlineHybrid alg(*dec, epsilon, 0.5, 5);
      for (int l = 0; l < 5; ++l) {
        Vec w = alg.step();
        ++rep.online_steps;
        if (alg.last_check().violations > 0)
          rep.violations.push_back(tag + "alg4: stage invariant residual " +
                                   std::to_string(alg.last_check().residual));
        const double r = dec->membership_residual(w);
        if (r > 1e-8) rep.violations.push_back(tag + "alg4: output residual " + std::to_string(r));
        alg.feedback(*F, 1.0 / std::max(F->value_upper(), 1e-12));
      }
    } catch (const std::exception& e) {
      rep.violations.push_back(tag + "error: " + e.what());
    }
  });

  InvariantReport total;
  for (auto& p : parts) {
    total.instances += p.instances;
    total.traces += p.traces;
    total.iterates += p.iterates;
    total.online_steps += p.online_steps;
    for (auto& v : p.violations) total.violations.push_back(std::move(v));
  }
  return total;
}

}  // namespace drsub
