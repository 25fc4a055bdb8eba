// rbtr: run, compare and sweep the IRGNM benchmarks from the command line.
//
// Exit codes: 0 ok, 2 configuration error, 3 solver failure, 4 stagnation.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "rbtr/bench.hpp"

namespace fs = std::filesystem;
using namespace rbtr;

namespace {

struct Overrides {
  std::string config_file;
  std::vector<std::string> sets;
  int run = 0, cells = 0, K = 0;
  double delta = 0.0, eps_pod = 0.0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_problem_options(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_file, "key=value configuration file");
  app->add_option("--set", o.sets, "override one key, e.g. --set tr.eta0=0.2 (repeatable)");
  app->add_option("--run", o.run, "benchmark run 1..4");
  app->add_option("--cells", o.cells, "cells per side of the grid");
  app->add_option("--K", o.K, "number of time steps");
  app->add_option("--delta", o.delta, "noise level");
  app->add_option("--eps-pod", o.eps_pod, "POD tolerance of the reduced bases");
  app->add_option("--seed", o.seed, "noise seed")->each([&o](const std::string&) { o.seed_given = true; });
}

RunConfig resolve(const Overrides& o) {
  RunConfig c;
  if (!o.config_file.empty()) c = load_config(o.config_file, c);
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.run) c.run_id = o.run;
  if (o.cells) c.cells = o.cells;
  if (o.K) c.K = o.K;
  if (o.delta > 0.0) c.delta = o.delta;
  if (o.eps_pod > 0.0) c.tr.eps_pod = o.eps_pod;
  if (o.seed_given) c.seed = o.seed;
  return c;
}

fs::path default_dir(const RunConfig& c, const std::string& tag) {
  char name[128];
  std::snprintf(name, sizeof name, "run%d_n%d_K%d_seed%llu_%s", c.run_id, c.cells, c.K,
                static_cast<unsigned long long>(c.seed), tag.c_str());
  return output_root() / name;
}

void report(const std::string& algo, const RunSummary& s, const fs::path& dir) {
  std::printf("%s: %s after %d outer iterations, J = %.6g (target %.6g), %ld FOM solves, %.3f s -> %s\n", algo.c_str(),
              s.converged ? "converged" : "NOT converged", s.outer_iterations, s.J, s.target, s.fom_solves,
              s.wall_time, dir.string().c_str());
}

char eps_tag_buffer[32];
const char* eps_tag(double eps) {
  std::snprintf(eps_tag_buffer, sizeof eps_tag_buffer, "tr_eps%.0e", eps);
  return eps_tag_buffer;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-basis trust-region IRGNM benchmarks"};
  app.require_subcommand(1);

  Overrides run_o;
  std::string run_algo, run_out;
  CLI::App* run = app.add_subcommand("run", "solve one benchmark configuration and write its artifacts");
  add_problem_options(run, run_o);
  run->add_option("--algo", run_algo, "fom, tr or both");
  run->add_option("--out", run_out, "output directory (default under $RBTR_OUTPUT_ROOT)");

  std::string cmp_fom, cmp_tr, cmp_table;
  CLI::App* cmp = app.add_subcommand("compare", "compare a FOM and a TR run directory");
  cmp->add_option("fom_dir", cmp_fom, "directory of the FOM run")->required();
  cmp->add_option("tr_dir", cmp_tr, "directory of the TR run")->required();
  cmp->add_option("--table", cmp_table, "also write the table to this CSV file");

  Overrides sweep_o;
  std::string sweep_out;
  int sweep_points = 6;
  CLI::App* sweep = app.add_subcommand("sweep", "FOM run plus TR runs over a log-spaced POD tolerance grid");
  add_problem_options(sweep, sweep_o);
  sweep->add_option("--points", sweep_points, "number of tolerances between 1e-9 and 1e-14");
  sweep->add_option("--out", sweep_out, "output directory (default under $RBTR_OUTPUT_ROOT)");

  Overrides cfg_o;
  CLI::App* cfg = app.add_subcommand("config", "print the resolved configuration as key=value lines");
  add_problem_options(cfg, cfg_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      RunConfig c = resolve(run_o);
      if (!run_algo.empty()) c.algorithm = run_algo;
      validate(c);
      const fs::path base = run_out.empty() ? default_dir(c, c.algorithm) : fs::path(run_out);
      if (c.algorithm == "both") {
        const RunSummary f = execute(c, "fom", base / "fom");
        report("fom", f, base / "fom");
        const RunSummary t = execute(c, "tr", base / "tr");
        report("tr", t, base / "tr");
        const std::string table = format_table({compare(base / "fom", base / "tr")});
        std::ofstream(base / "comparison.csv") << table;
        std::cout << table;
      } else {
        report(c.algorithm, execute(c, c.algorithm, base), base);
      }
    } else if (*cfg) {
      const RunConfig c = resolve(cfg_o);
      validate(c);
      std::cout << format_config(c);
    } else if (*cmp) {
      const std::string table = format_table({compare(cmp_fom, cmp_tr)});
      if (!cmp_table.empty()) std::ofstream(cmp_table) << table;
      std::cout << table;
    } else if (*sweep) {
      const RunConfig c = resolve(sweep_o);
      validate(c);
      const fs::path base = sweep_out.empty() ? default_dir(c, "sweep") : fs::path(sweep_out);
      report("fom", execute(c, "fom", base / "fom"), base / "fom");
      std::vector<CompareRow> rows;
      for (double eps : eps_grid(sweep_points)) {
        RunConfig ct = c;
        ct.tr.eps_pod = eps;
        const fs::path dir = base / eps_tag(eps);
        report("tr", execute(ct, "tr", dir), dir);
        rows.push_back(compare(base / "fom", dir));
      }
      const std::string table = format_table(rows);
      std::ofstream(base / "comparison.csv") << table;
      std::cout << table;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const StagnationError& e) {
    std::cerr << "stagnation: " << e.what() << "\n";
    return 4;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
