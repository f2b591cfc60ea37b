#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "drsub/cli.hpp"
#include "drsub/errors.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw drsub::ConfigError(path + ": cannot open");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw drsub::ConfigError(path + ": cannot write");
  os << text << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DR-submodular maximization over N + D decompositions"};
  app.require_subcommand(1);

  // gen-qp
  auto* gen = app.add_subcommand("gen-qp", "Generate a QP instance as JSON");
  std::size_t gen_n = 8;
  std::size_t gen_rows = 0;
  std::string gen_dist = "uniform";
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("-n,--n", gen_n, "Dimension")->check(CLI::Range(1, 1000));
  gen->add_option("--m-rows", gen_rows, "Constraint rows (default n)");
  gen->add_option("--dist", gen_dist, "uniform or exponential");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--out", gen_out, "Output file (default stdout)");

  // run
  auto* runc = app.add_subcommand("run", "Run an experiment from a JSON config");
  std::string config_path;
  std::vector<std::uint64_t> run_seeds;
  std::string run_out;
  int run_threads = 0;
  bool dry_run = false;
  runc->add_option("--config", config_path, "Config file")->required();
  runc->add_option("--seed", run_seeds, "Override the config seeds");
  runc->add_option("--out", run_out, "Override the output directory");
  runc->add_option("--threads", run_threads, "Override the worker count")->check(CLI::Range(1, 256));
  runc->add_flag("--dry-run", dry_run, "Echo the resolved config and exit");

  // ingest-graph
  auto* ing = app.add_subcommand("ingest-graph", "Parse an edge list and report its size");
  std::string graph_path;
  ing->add_option("path", graph_path, "Edge-list file")->required();

  // validate
  auto* val = app.add_subcommand("validate", "Run the invariant suite");
  int per_family = 20;
  std::size_t n_max = 12;
  double val_eps = 0.05;
  std::uint64_t val_seed = 1;
  int val_threads = 1;
  val->add_option("--per-family", per_family, "Instances per objective family")->check(CLI::Range(1, 10000));
  val->add_option("--n-max", n_max, "Largest dimension")->check(CLI::Range(2, 64));
  val->add_option("--epsilon", val_eps, "Step size")->check(CLI::Range(1e-6, 1.0));
  val->add_option("--seed", val_seed, "Seed");
  val->add_option("--threads", val_threads, "Workers")->check(CLI::Range(1, 256));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      auto inst = drsub::make_qp_instance(gen_n, gen_rows == 0 ? gen_n : gen_rows,
                                          drsub::parse_qp_distribution(gen_dist), gen_seed);
      write_or_print(gen_out, drsub::qp_instance_to_json(inst));
    } else if (*runc) {
      drsub::ExperimentConfig cfg = drsub::parse_config(read_file(config_path));
      if (!run_seeds.empty()) cfg.seeds = run_seeds;
      if (!run_out.empty()) cfg.out = run_out;
      if (run_threads > 0) cfg.threads = run_threads;
      drsub::RunSummary s = drsub::run(cfg, dry_run);
      if (dry_run) {
        std::cout << s.manifest_json << '\n';
        return 0;
      }
      std::cout << s.cells << " cells, " << s.failed_cells << " failed, " << s.violations
                << " violations\n";
      for (const auto& f : s.files) std::cout << "  " << cfg.out << '/' << f << '\n';
      if (s.failed_cells > 0 || s.violations > 0) return kExitSolver;
    } else if (*ing) {
      drsub::Graph g = drsub::ingest_graph(graph_path);
      std::cout << "nodes " << g.n << "\nedges " << g.edges.size() << "\nduplicates " << g.duplicates
                << "\nself_loops " << g.self_loops << "\nids " << (g.one_based ? "1-based" : "0-based")
                << '\n';
    } else if (*val) {
      drsub::InvariantReport r = drsub::run_invariant_suite(per_family, n_max, val_eps, val_seed, val_threads);
      std::cout << r.instances << " instances, " << r.traces << " traces, " << r.iterates << " iterates, "
                << r.online_steps << " online steps, " << r.violations.size() << " violations\n";
      for (const auto& v : r.violations) std::cout << "  " << v << '\n';
      if (!r.violations.empty()) return kExitSolver;
    }
  } catch (const drsub::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    // ArgumentError and DimensionError
    std::cerr << "argument error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolver;
  }
  return 0;
}
