// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "fixtures.hpp"
#include "rbtr/bench.hpp"
#include "trace_checks.hpp"

using namespace rbtr;
using namespace fixture;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string strip_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// The desk instances: Run 1 at the reference desk size, the others smaller.
RunConfig desk_config(int run) {
  RunConfig c;
  c.run_id = run;
  c.cells = run == 1 ? 30 : 16;
  c.K = run == 1 ? 25 : 10;
  c.delta = 1e-5;
  c.seed = 1;
  c.tr.eps_pod = 1e-12;
  return c;
}

struct Desk {
  FomProblem problem;
  Observation data;
};

Desk desk_instance(const RunConfig& c) {
  const RunSetup rs = run_setup(c.run_id);
  FomProblem problem(spec(rs.kind, rs.stationary, c.cells, c.K));
  Observation data = make_noisy_data(problem, exact_parameter(c.run_id, problem.mesh(), c.K), c.delta, c.seed);
  return {std::move(problem), std::move(data)};
}

// Shared results of the desk runs.
struct DeskRuns {
  IrgnmResult fom1;
  double fom1_time = 0.0;
  std::vector<RunConfig> configs;
  std::vector<TrResult> tr;
  std::vector<double> tr_time;
};

Outcome gradient_consistency() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int cases = 0;
  for (Kind kind : {Kind::reaction, Kind::diffusion})
    for (bool stationary : {true, false}) {
      FomProblem pb(spec(kind, stationary, 4, 8));
      const Observation data = noisy_data(pb, rng);
      for (int t = 0; t < 10; ++t) {
        const Matrix q = random_parameter(pb, rng, 1.0, 5.0);
        const Matrix d = oracle::random_matrix(rng, static_cast<int>(pb.size()),
                                               static_cast<int>(pb.parameter_columns()), -1, 1);
        const double h = 1e-5;
        const double fd = (pb.objective(q + h * d, data) - pb.objective(q - h * d, data)) / (2 * h);
        const double ad = pb.parameter_inner(pb.gradient(q, data), d);
        worst = std::max(worst, std::abs(fd - ad) / std::abs(fd));
        ++cases;
      }
    }
  return {worst <= 1e-4, format("%d cases, worst relative error %.2e", cases, worst)};
}

Outcome estimator_soundness() {
  std::mt19937_64 rng(102);
  int ok = 0, total = 0;
  double worst = 0.0;
  for (bool stationary : {true, false}) {
    FomProblem pb(spec(Kind::reaction, stationary, 4, 10));
    const Observation data = noisy_data(pb, rng);
    const Estimator est(pb, data);
    const RomModel rom(pb, data, small_bases(pb, data, rng, 3, 2), pb.constant_parameter(3.0));
    for (int n = 0; n < 50;) {
      const Matrix q_r = random_feasible_coordinates(rom, rng, stationary ? 1.5 : 0.5);
      if (rom.lift(q_r).minCoeff() < 1.0) continue;
      ++n;
      ++total;
      const Estimate e = est.estimate(rom, q_r);
      const double err = std::abs(pb.objective(rom.lift(q_r), data) - e.J_r);
      worst = std::max(worst, err / e.delta_J);
      if (err <= e.delta_J * (1.0 + 1e-12) + 1e-14) ++ok;
    }
  }
  return {ok == total, format("%d/%d bounded (reaction, q >= 1), largest error/bound %.3f", ok, total, worst)};
}

Outcome interpolation() {
  std::mt19937_64 rng(103);
  double worst = 0.0;
  for (Kind kind : {Kind::reaction, Kind::diffusion})
    for (bool stationary : {true, false}) {
      FomProblem pb(spec(kind, stationary, 5, 6));
      const Observation data = noisy_data(pb, rng);
      const Estimator est(pb, data);
      Bases b = small_bases(pb, data, rng, 2, 2);
      const RomModel before(pb, data, b, pb.constant_parameter(3.0));
      const Matrix q = before.lift(random_feasible_coordinates(before, rng, 1.0));
      enrich_after_acceptance(pb, b, pb.evaluate(q, data, true), 1e-14);
      const RomModel after(pb, data, b, pb.constant_parameter(3.0));
      worst = std::max(worst, est.estimate(after, after.restrict_parameter(q)).delta_J);
    }
  return {worst <= 1e-10, format("largest Delta_J at the enrichment point %.2e over 4 model variants", worst)};
}

Outcome pod_contract() {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> unit(0, 1);
  FomProblem pb(spec(Kind::diffusion, true, 6, 2));
  const GramOperator& M = pb.state_product();
  int violations = 0;
  double worst_ratio = 0.0, worst_proj = 0.0;
  auto error2 = [&](const Matrix& modes, const Matrix& s) {
    const Matrix r = s - modes * (modes.transpose() * (M.matrix() * s));
    double e = 0.0;
    for (Index j = 0; j < r.cols(); ++j) e += M.inner(r.col(j), r.col(j));
    return e;
  };
  for (int t = 0; t < 100; ++t) {
    const int count = 3 + t % 15;
    Matrix s = oracle::random_matrix(rng, static_cast<int>(pb.size()), count, -1, 1);
    zero_boundary(pb.mesh(), s);
    for (int j = 0; j < count; ++j) s.col(j) *= std::pow(10.0, -6.0 * unit(rng));
    const double eps = std::pow(10.0, -1.0 - 8.0 * unit(rng)) * std::sqrt((s.transpose() * (M.matrix() * s)).trace());
    const int chunks = 1 + t % 4;
    std::vector<Matrix> parts;
    for (int c = 0, col = 0; c < chunks; ++c) {
      const int w = (count - col) / (chunks - c);
      parts.push_back(s.middleCols(col, w));
      col += w;
    }
    const PodResult p = pod(s, M, eps), h = hapod(parts, M, eps), h1 = hapod({s}, M, eps);
    for (const PodResult* r : {&p, &h, &h1}) {
      const double ratio = error2(r->modes, s) / (eps * eps);
      worst_ratio = std::max(worst_ratio, ratio);
      if (!(ratio < 1.0)) ++violations;
    }
    // single chunk: compare the projectors on random probes
    const Matrix probes = oracle::random_matrix(rng, static_cast<int>(pb.size()), 8, -1, 1);
    const Matrix pp = p.modes * (p.modes.transpose() * (M.matrix() * probes));
    const Matrix ph = h1.modes * (h1.modes.transpose() * (M.matrix() * probes));
    const double diff = p.modes.cols() == h1.modes.cols() ? (pp - ph).norm() / probes.norm() : 1.0;
    worst_proj = std::max(worst_proj, diff);
  }
  return {violations == 0 && worst_proj <= 1e-10,
          format("%d violations in 300 calls, worst error/eps^2 %.3f, single-chunk projector difference %.1e",
                 violations, worst_ratio, worst_proj)};
}

Outcome galerkin_exactness() {
  std::mt19937_64 rng(105);
  double worst = 0.0;
  for (Kind kind : {Kind::reaction, Kind::diffusion})
    for (bool stationary : {true, false}) {
      FomProblem pb(spec(kind, stationary, 3, 5));
      const Observation data = noisy_data(pb, rng);
      const RomModel rom(pb, data, full_bases(pb), pb.constant_parameter(3.0));
      const Matrix q = random_parameter(pb, rng, 1.0, 5.0);
      const Matrix q_r = rom.restrict_parameter(q);
      const Matrix u = pb.solve_primal(q), u_r = rom.solve_primal(q_r);
      const double J = pb.objective(q, data);
      worst = std::max({worst, rel(rom.lift_state(u_r), u),
                        rel(rom.lift_state(rom.solve_adjoint(q_r, u_r)), pb.solve_adjoint(q, u, data)),
                        std::abs(rom.objective(q_r) - J) / J, rel(rom.lift(rom.gradient(q_r)), pb.gradient(q, data))});
    }
  return {worst <= 1e-10, format("largest relative deviation %.2e (states, adjoints, J, gradient)", worst)};
}

Outcome fom_desk(const DeskRuns& runs, const Desk& d1) {
  const IrgnmResult& r = runs.fom1;
  const double target = 0.5 * std::pow(3.5e-5, 2);
  bool monotone = true, bracket = true, exact_J = true;
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    const double J = d1.problem.objective(r.iterates[i], d1.data);
    if (std::abs(J - r.history[i].J) > 1e-12 * J) exact_J = false;
    if (i == 0) continue;
    if (!(r.history[i].J < r.history[i - 1].J)) monotone = false;
    const Matrix& q = r.iterates[i - 1];
    const FomLinearization lin(d1.problem, d1.data, q, d1.problem.solve_primal(q));
    const double two = 2.0 * lin.data_term(r.iterates[i] - q, nullptr);
    if (two < 0.4 * r.history[i - 1].J * (1 - 1e-9) || two > 1.95 * r.history[i - 1].J * (1 + 1e-9)) bracket = false;
  }
  const bool pass = r.converged && r.history.back().J <= target && monotone && bracket && exact_J;
  return {pass, format("%s, %zu outer iterations, J = %.3e <= %.3e, monotone %d, bracket %d, %ld solves, %.1f s",
                       r.converged ? "converged" : "not converged", r.history.size() - 1, r.history.back().J, target,
                       monotone, bracket, r.history.back().fom_solves, runs.fom1_time)};
}

Outcome tr_desk(const DeskRuns& runs) {
  const TrResult& t = runs.tr[0];
  const long fom = runs.fom1.history.back().fom_solves, tr = t.history.back().fom_solves;
  const double speedup = runs.fom1_time / runs.tr_time[0];
  const bool pass = t.converged && t.history.back().J <= t.target && 10 * tr < fom && speedup >= 2.0;
  return {pass, format("%s, %ld vs %ld solves (%.2f%%), %.2f s vs %.2f s, speedup %.2f",
                       t.converged ? "converged" : "not converged", tr, fom, 100.0 * tr / fom, runs.tr_time[0],
                       runs.fom1_time, speedup)};
}

Outcome reconstruction(const DeskRuns& runs, const Desk& d1) {
  const Matrix diff = runs.tr[0].q - runs.fom1.q;
  const double e = std::sqrt(diff.col(0).dot(d1.problem.mass() * diff.col(0))) /
                   std::sqrt(runs.fom1.q.col(0).dot(d1.problem.mass() * runs.fom1.q.col(0)));
  return {e <= 0.15, format("relative L2 difference TR vs FOM %.3e", e)};
}

Outcome nq_accounting(const DeskRuns& runs) {
  const TrResult& t = runs.tr[0];
  const int acc = trace::accepted_steps(t);
  const Index nq = t.history.back().n_q;
  return {nq == acc + t.n_q_initial && t.n_q_initial <= 3,
          format("n_Q = %ld, accepted = %d, initial = %ld", static_cast<long>(nq), acc, static_cast<long>(t.n_q_initial))};
}

Outcome feasibility_fuzz() {
  std::mt19937_64 rng(110);
  std::uniform_real_distribution<double> unit(0, 1);
  int certified = 0, failures = 0, tried = 0;
  FomProblem pb(spec(Kind::diffusion, false, 4, 3));
  const Observation data = noisy_data(pb, rng);
  const RomModel rom(pb, data, small_bases(pb, data, rng, 5, 3), pb.constant_parameter(3.0));
  while (certified < 1000 && tried < 100000) {
    ++tried;
    const Matrix q_r = random_feasible_coordinates(rom, rng, 2.0);
    const double scale = std::pow(10.0, 3.0 * unit(rng) - 1.0);
    const Matrix d_r = scale * oracle::random_matrix(rng, static_cast<int>(rom.n_q()), 3, -1, 1);
    if (!rom.certified_feasible(q_r, d_r)) continue;
    ++certified;
    if (!pb.admissible(rom.lift(q_r + d_r))) ++failures;
  }
  return {certified == 1000 && failures == 0,
          format("%d certified of %d drawn, %d infeasible after lifting", certified, tried, failures)};
}

Outcome trace_invariants(const DeskRuns& runs) {
  std::string detail;
  bool pass = true;
  for (std::size_t k = 0; k < runs.tr.size(); ++k) {
    const auto v = trace::violations(runs.tr[k], tr_settings(runs.configs[k]));
    int rejected = 0, easdc = 0;
    for (const TrRecord& h : runs.tr[k].history) {
      rejected += h.branch == Branch::necessary || h.branch == Branch::easdc_reject;
      easdc += h.branch == Branch::easdc_accept || h.branch == Branch::easdc_reject;
    }
    pass = pass && v.empty() && runs.tr[k].converged;
    detail += format("run %d: %zu iterations, %d rejected, %d EASDC, %zu violations%s; ", runs.configs[k].run_id,
                     runs.tr[k].history.size() - 1, rejected, easdc, v.size(), runs.tr[k].converged ? "" : ", NOT converged");
    for (const std::string& s : v) std::fprintf(stderr, "  run %d %s\n", runs.configs[k].run_id, s.c_str());
  }
  return {pass, detail.substr(0, detail.size() - 2)};
}

Outcome determinism(const DeskRuns& runs) {
  const fs::path root = fs::temp_directory_path() / "rbtr_acceptance";
  fs::remove_all(root);
  int same = 0, total = 0;
  std::string which;
  auto check = [&](const std::string& name, const std::string& first, const fs::path& dir) {
    ++total;
    if (strip_last_column(first) == strip_last_column(slurp(dir / "history.csv")))
      ++same;
    else
      which += " " + name;
  };
  for (std::size_t k = 0; k < runs.tr.size(); ++k) {
    std::ostringstream first;
    write_history(first, runs.tr[k]);
    const fs::path dir = root / ("tr" + std::to_string(runs.configs[k].run_id));
    execute(runs.configs[k], "tr", dir);
    check("tr" + std::to_string(runs.configs[k].run_id), first.str(), dir);
  }
  std::ostringstream first;
  write_history(first, runs.fom1);
  execute(runs.configs[0], "fom", root / "fom1");
  check("fom1", first.str(), root / "fom1");
  return {same == total, format("%d/%d history pairs identical apart from wall_time%s", same, total,
                                which.empty() ? "" : (", differing:" + which).c_str())};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] criterion %2d  %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "gradient consistency", gradient_consistency);
  report(2, "estimator soundness", estimator_soundness);
  report(3, "interpolation property", interpolation);
  report(4, "POD tolerance contract", pod_contract);
  report(5, "Galerkin exactness", galerkin_exactness);

  DeskRuns runs;
  for (int run = 1; run <= 4; ++run) runs.configs.push_back(desk_config(run));
  const Desk d1 = desk_instance(runs.configs[0]);
  std::string desk_error;
  const auto desk_start = std::chrono::steady_clock::now();
  try {
    IrgnmSettings fs = irgnm_settings(runs.configs[0]);
    fs.keep_iterates = true;
    auto t0 = std::chrono::steady_clock::now();
    runs.fom1 = run_fom_irgnm(d1.problem, d1.data, fs, default_center(d1.problem));
    runs.fom1_time = seconds_since(t0);
    for (const RunConfig& c : runs.configs) {
      std::optional<Desk> own;
      if (c.run_id != 1) own.emplace(desk_instance(c));
      const Desk& use = own ? *own : d1;
      t0 = std::chrono::steady_clock::now();
      runs.tr.push_back(run_tr_irgnm(use.problem, use.data, tr_settings(c), default_center(use.problem)));
      runs.tr_time.push_back(seconds_since(t0));
    }
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  std::printf("desk runs (FOM run 1, TR runs 1-4) finished in %.1f s\n", seconds_since(desk_start));
  auto desk = [&](std::function<Outcome()> f) {
    return [f, &desk_error]() { return desk_error.empty() ? f() : Outcome{false, "desk runs failed: " + desk_error}; };
  };

  report(6, "FOM-IRGNM desk run 1", desk([&] { return fom_desk(runs, d1); }));
  report(7, "TR-IRGNM desk run 1", desk([&] { return tr_desk(runs); }));
  report(8, "reconstruction agreement", desk([&] { return reconstruction(runs, d1); }));
  report(9, "stationary n_Q accounting", desk([&] { return nq_accounting(runs); }));
  report(10, "cheap feasibility fuzz", feasibility_fuzz);
  report(11, "trust-region trace", desk([&] { return trace_invariants(runs); }));
  report(12, "determinism", desk([&] { return determinism(runs); }));

  std::printf("%d of 12 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
