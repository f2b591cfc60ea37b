#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "drsub/cli.hpp"
#include "drsub/errors.hpp"
#include "drsub/offline.hpp"
#include "drsub/online.hpp"

namespace py = pybind11;
using namespace drsub;

namespace {

using ObjHolder = std::shared_ptr<Objective>;

ObjHolder unconst(std::shared_ptr<const Objective> p) { return std::const_pointer_cast<Objective>(std::move(p)); }

Matrix to_matrix(const std::vector<Vec>& rows) {
  Matrix M(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw DimensionError("matrix must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) M(i, j) = rows[i][j];
  }
  return M;
}

std::vector<Vec> from_matrix(const Matrix& M) {
  std::vector<Vec> rows(M.n, Vec(M.n));
  for (std::size_t i = 0; i < M.n; ++i)
    for (std::size_t j = 0; j < M.n; ++j) rows[i][j] = M(i, j);
  return rows;
}

FwRule parse_rule(const std::string& s) {
  if (s == "bian") return FwRule::kBian;
  if (s == "measured") return FwRule::kMeasured;
  throw ArgumentError("unknown rule '" + s + "' (bian or measured)");
}

std::vector<ObjectivePtr> to_stream(const std::vector<ObjHolder>& s) { return {s.begin(), s.end()}; }

py::dict report_dict(const InvariantReport& r) {
  py::dict d;
  d["instances"] = r.instances;
  d["traces"] = r.traces;
  d["iterates"] = r.iterates;
  d["online_steps"] = r.online_steps;
  d["violations"] = r.violations;
  return d;
}

}  // namespace

PYBIND11_MODULE(_drsub, m) {
  m.doc() = "DR-submodular maximization over N + D decompositions";

  // Argument-type errors derive from ValueError so that callers can catch them
  // the usual way.
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError");
  py::register_exception<SolverError>(m, "SolverError");
  py::register_exception<ConvergenceError>(m, "ConvergenceError");
  py::register_exception<ProtocolError>(m, "ProtocolError");

  m.def("psum", [](const Vec& x, const Vec& y) { return psum(x, y); }, py::arg("x"), py::arg("y"),
        "x + y - x * y, coordinate-wise");

  // polytopes
  py::class_<HPolytope>(m, "HPolytope")
      .def(py::init([](std::size_t n, const std::vector<std::tuple<Vec, double, bool>>& rows, bool down_closed) {
             std::vector<DenseRow> r;
             for (const auto& [a, b, eq] : rows) r.push_back({a, b, eq});
             return HPolytope(n, r, down_closed);
           }),
           py::arg("n"), py::arg("rows"), py::arg("down_closed"),
           "rows are (a, b, eq): a.x <= b, or a.x == b when eq")
      .def_static("unit_box", &HPolytope::unit_box)
      .def_static("origin", &HPolytope::origin)
      .def_static("sum_band", &HPolytope::sum_band, py::arg("n"), py::arg("lo"), py::arg("hi"))
      .def_property_readonly("dim", &HPolytope::dim)
      .def_property_readonly("down_closed", &HPolytope::down_closed)
      .def("contains", [](const HPolytope& P, const Vec& x, double tol) { return P.contains(x, tol); },
           py::arg("x"), py::arg("tol") = 1e-9)
      .def("violation", [](const HPolytope& P, const Vec& x) { return P.violation(x); })
      .def("to_json", &polytope_to_json)
      .def_static("from_json", &polytope_from_json);

  py::class_<Decomposition>(m, "Decomposition")
      .def(py::init<HPolytope, HPolytope>(), py::arg("general"), py::arg("down_closed"))
      .def_property_readonly("dim", &Decomposition::dim)
      .def_property_readonly("m", &Decomposition::m)
      .def_property_readonly("general", &Decomposition::general)
      .def_property_readonly("down", &Decomposition::down)
      .def("membership_residual", [](const Decomposition& d, const Vec& w) { return d.membership_residual(w); })
      .def("maximize_over_sum", [](const Decomposition& d, const Vec& c) { return d.maximize_over_sum(c); })
      .def("to_json", &decomposition_to_json)
      .def_static("from_json", &decomposition_from_json);

  m.def("revenue_constraint", &revenue_constraint, py::arg("n"));
  m.def("location_constraint", &location_constraint, py::arg("n"));

  // objectives
  py::class_<Objective, ObjHolder>(m, "Objective")
      .def_property_readonly("dim", &Objective::dim)
      .def_property_readonly("family", &Objective::family)
      .def("value", [](const Objective& F, const Vec& x) { return F.value(x); })
      .def("gradient", [](const Objective& F, const Vec& x) { return F.gradient(x); })
      .def("beta", &Objective::beta)
      .def("value_upper", &Objective::value_upper);

  py::class_<QuadraticObjective, Objective, std::shared_ptr<QuadraticObjective>>(m, "QuadraticObjective")
      .def(py::init([](const std::vector<Vec>& H, const Vec& h, double c) {
             return std::make_shared<QuadraticObjective>(to_matrix(H), h, c);
           }),
           py::arg("H"), py::arg("h"), py::arg("c"))
      .def_property_readonly("H", [](const QuadraticObjective& q) { return from_matrix(q.H()); })
      .def_property_readonly("h", &QuadraticObjective::h)
      .def_property_readonly("c", &QuadraticObjective::c);

  py::class_<RevenueObjective, Objective, std::shared_ptr<RevenueObjective>>(m, "RevenueObjective")
      .def(py::init([](std::size_t n, const std::vector<std::tuple<int, int, double>>& edges, double p) {
             std::vector<Edge> e;
             for (const auto& [u, v, w] : edges) e.push_back({u, v, w});
             return std::make_shared<RevenueObjective>(n, e, p);
           }),
           py::arg("n"), py::arg("edges"), py::arg("p"))
      .def_property_readonly("num_edges", &RevenueObjective::num_edges);

  py::class_<LocationObjective, Objective, std::shared_ptr<LocationObjective>>(m, "LocationObjective")
      .def(py::init([](const std::vector<Vec>& M, const Vec& d) {
             return std::make_shared<LocationObjective>(to_matrix(M), d);
           }),
           py::arg("M"), py::arg("d"))
      .def("set_value", &LocationObjective::set_value);

  py::class_<QpInstance>(m, "QpInstance")
      .def_property_readonly("objective", [](const QpInstance& q) { return unconst(q.objective); })
      .def_readonly("decomposition", &QpInstance::decomposition)
      .def_readonly("u", &QpInstance::u)
      .def_readonly("offset", &QpInstance::offset_M)
      .def("to_json", &qp_instance_to_json);

  m.def(
      "make_qp_instance",
      [](std::size_t n, std::size_t m_rows, const std::string& dist, std::uint64_t seed) {
        return make_qp_instance(n, m_rows, parse_qp_distribution(dist), seed);
      },
      py::arg("n"), py::arg("m_rows"), py::arg("dist") = "uniform", py::arg("seed") = 1);
  m.def(
      "make_location_instance",
      [](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        return unconst(make_location_instance(n, rng));
      },
      py::arg("n"), py::arg("seed") = 1);
  m.def(
      "erdos_renyi",
      [](std::size_t n, double p_edge, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<std::tuple<int, int, double>> out;
        for (const Edge& e : erdos_renyi(n, p_edge, rng)) out.emplace_back(e.u, e.v, e.w);
        return out;
      },
      py::arg("n"), py::arg("p_edge"), py::arg("seed") = 1);

  // offline
  py::class_<Trace>(m, "Trace")
      .def_property_readonly("variant", [](const Trace& t) { return to_string(t.variant); })
      .def_readonly("epsilon", &Trace::epsilon)
      .def_readonly("t_s", &Trace::t_s)
      .def_readonly("m", &Trace::m)
      .def_readonly("best_value", &Trace::best_value)
      .def_readonly("best_index", &Trace::best_index)
      .def_readonly("violations", &Trace::violations)
      .def_property_readonly("best_point", [](const Trace& t) { return t.best_point(); })
      .def_property_readonly("values", [](const Trace& t) {
        Vec v;
        for (const auto& it : t.iters) v.push_back(it.F_w);
        return v;
      })
      .def_property_readonly("points", [](const Trace& t) {
        std::vector<Vec> w;
        for (const auto& it : t.iters) w.push_back(it.w);
        return w;
      })
      .def("__len__", [](const Trace& t) { return t.iters.size(); });

  m.def("run_alg1", &run_alg1, py::arg("F"), py::arg("dec"), py::arg("epsilon"), py::arg("F_p1"));
  m.def("run_alg2", &run_alg2, py::arg("F"), py::arg("dec"), py::arg("epsilon"), py::arg("t_s"));
  m.def("run_alg3", &run_alg3, py::arg("F"), py::arg("dec"), py::arg("epsilon"), py::arg("t_s"));
  m.def(
      "run_fw_downclosed",
      [](const Objective& F, const HPolytope& D, double eps, const std::string& rule) {
        return run_fw_downclosed(F, D, eps, parse_rule(rule));
      },
      py::arg("F"), py::arg("D"), py::arg("epsilon"), py::arg("rule") = "bian");
  m.def("run_fw_general", &run_fw_general, py::arg("F"), py::arg("dec"), py::arg("epsilon"));
  m.def(
      "run_alg2_grid",
      [](const Objective& F, const Decomposition& dec, double eps) { return run_alg2_grid(F, dec, eps).best; },
      py::arg("F"), py::arg("dec"), py::arg("epsilon"));
  m.def(
      "run_alg3_grid",
      [](const Objective& F, const Decomposition& dec, double eps) { return run_alg3_grid(F, dec, eps).best; },
      py::arg("F"), py::arg("dec"), py::arg("epsilon"));
  m.def("verify_trace", [](Trace t, const Decomposition& dec) { return verify_trace(t, dec); });
  m.def("theorem1_value", &theorem1_value, py::arg("F_o"), py::arg("F_p1"), py::arg("F_p2"), py::arg("m"),
        py::arg("t_s"), py::arg("T"));
  m.def(
      "theorem1_bound",
      [](double F_o, double F_p1, double F_p2, double mm, double step) {
        BoundResult b = theorem1_bound(F_o, F_p1, F_p2, mm, step);
        return py::make_tuple(b.value, b.t_s, b.T);
      },
      py::arg("F_o"), py::arg("F_p1"), py::arg("F_p2"), py::arg("m"), py::arg("grid_step") = 0.01,
      "returns (value, t_s, T)");

  // online
  py::class_<FtrlOptimizer>(m, "FtrlOptimizer")
      .def(py::init([](const HPolytope& body, const Vec& anchor, int horizon, double diameter, double G) {
             return FtrlOptimizer(body.system(), anchor, horizon, diameter, G);
           }),
           py::arg("body"), py::arg("anchor"), py::arg("horizon"), py::arg("diameter"), py::arg("grad_bound") = 0.0)
      .def("next", [](FtrlOptimizer& o) { return o.next(); })
      .def("feed", [](FtrlOptimizer& o, const Vec& d) { o.feed(d); })
      .def_property_readonly("eta", &FtrlOptimizer::eta)
      .def_property_readonly("regret_bound", &FtrlOptimizer::regret_bound)
      .def_property_readonly("rounds", &FtrlOptimizer::rounds);

  py::class_<Hedge>(m, "Hedge")
      .def(py::init<int, int>(), py::arg("experts"), py::arg("horizon"))
      .def_property_readonly("distribution", &Hedge::distribution)
      .def("update", [](Hedge& h, const Vec& r) { h.update(r); })
      .def_property_readonly("eta", &Hedge::eta);

  py::class_<OnlineRun>(m, "OnlineRun")
      .def_property_readonly("mode", [](const OnlineRun& r) { return to_string(r.mode); })
      .def_readonly("epsilon", &OnlineRun::epsilon)
      .def_readonly("violations", &OnlineRun::violations)
      .def_property_readonly("cumulative", &OnlineRun::cumulative)
      .def_property_readonly("values", [](const OnlineRun& r) {
        Vec v;
        for (const auto& rec : r.records) v.push_back(rec.value_raw);
        return v;
      })
      .def_property_readonly("residuals", [](const OnlineRun& r) {
        Vec v;
        for (const auto& rec : r.records) v.push_back(rec.feasibility_residual);
        return v;
      });

  m.def(
      "run_online",
      [](const std::vector<ObjHolder>& stream, const Decomposition& dec, double eps, const std::string& mode,
         double t_s) {
        OnlineOptions opt;
        if (mode == "fixed") {
          opt.mode = OnlineMode::kFixed;
        } else if (mode == "meta") {
          opt.mode = OnlineMode::kMeta;
        } else {
          throw ArgumentError("mode must be 'fixed' or 'meta'");
        }
        opt.t_s = t_s;
        return run_online_experiment(to_stream(stream), dec, eps, opt);
      },
      py::arg("stream"), py::arg("dec"), py::arg("epsilon"), py::arg("mode") = "meta", py::arg("t_s") = 0.0);
  m.def(
      "run_online_baseline",
      [](const std::vector<ObjHolder>& stream, const Decomposition& dec, double eps) {
        return run_online_baseline(to_stream(stream), dec, eps);
      },
      py::arg("stream"), py::arg("dec"), py::arg("epsilon"));

  // experiments
  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::string& out, bool dry_run) {
        ExperimentConfig c = parse_config(config_json);
        if (!out.empty()) c.out = out;
        RunSummary s = run(c, dry_run);
        py::dict d;
        d["files"] = s.files;
        d["cells"] = s.cells;
        d["failed_cells"] = s.failed_cells;
        d["violations"] = s.violations;
        d["summary"] = s.summary_json;
        d["manifest"] = s.manifest_json;
        return d;
      },
      py::arg("config"), py::arg("out") = "", py::arg("dry_run") = false,
      "config is a JSON string; summary and manifest come back as JSON strings");
  m.def(
      "run_invariant_suite",
      [](int per_family, std::size_t n_max, double eps, std::uint64_t seed) {
        return report_dict(run_invariant_suite(per_family, n_max, eps, seed));
      },
      py::arg("per_family") = 2, py::arg("n_max") = 6, py::arg("epsilon") = 0.1, py::arg("seed") = 1);
}
