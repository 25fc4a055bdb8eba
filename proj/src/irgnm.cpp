#include "rbtr/irgnm.hpp"

#include <chrono>
#include <cmath>

namespace rbtr {

Matrix default_center(const FomProblem& problem) { return problem.constant_parameter(3.0); }

void check_settings(const IrgnmSettings& s) {
  if (!(s.delta >= 0.0)) throw ConfigError("delta must be nonnegative");
  if (!(s.tau > 1.0)) throw ConfigError("tau must exceed 1");
  if (!(s.alpha.theta > 0.0 && s.alpha.theta < s.alpha.Theta && s.alpha.Theta < 2.0))
    throw ConfigError("theta and Theta must satisfy 0 < theta < Theta < 2");
  if (!(s.alpha_initial > 0.0)) throw ConfigError("initial alpha must be positive");
  if (s.max_outer < 0) throw ConfigError("outer iteration cap must be nonnegative");
}

IrgnmResult run_fom_irgnm(const FomProblem& problem, const Observation& data, const IrgnmSettings& settings,
                          const Matrix& q0) {
  check_settings(settings);
  problem.check_parameter(q0);
  if (!problem.admissible(q0)) throw ConfigError("initial parameter is not admissible");
  const Matrix center = settings.q_center.size() ? settings.q_center : default_center(problem);
  problem.check_parameter(center);

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  const long solves0 = problem.counts().total();

  IrgnmResult out;
  out.target = 0.5 * std::pow(settings.tau * settings.delta, 2);
  Matrix q = q0;
  Matrix u = problem.solve_primal(q);
  double J = problem.misfit_direct(u, data);
  if (!std::isfinite(J)) throw SolverError("non-finite objective at the initial guess");
  out.history.push_back({0, J, 0.0, 0, 0, true, problem.counts().total() - solves0, elapsed()});
  if (settings.keep_iterates) out.iterates.push_back(q);

  double alpha = settings.alpha_initial;
  for (int i = 0; J > out.target; ++i) {
    if (i >= settings.max_outer) {
      out.cap_hit = true;
      break;
    }
    const FomLinearization lin(problem, data, q, u);
    const Matrix zero = Matrix::Zero(q.rows(), q.cols());
    const AlphaResult ar = regulate_alpha(lin, center - q, J, alpha, settings.alpha, zero);
    q = problem.project_box(q + ar.d);
    u = problem.solve_primal(q);
    J = problem.misfit_direct(u, data);
    if (!std::isfinite(J)) throw SolverError("non-finite objective at iteration " + std::to_string(i + 1));
    alpha = ar.alpha;
    out.history.push_back({i + 1, J, ar.alpha, ar.pgd_iterations, ar.subproblem_solves, ar.bracketed,
                           problem.counts().total() - solves0, elapsed()});
    if (settings.keep_iterates) out.iterates.push_back(q);
  }
  out.converged = J <= out.target;
  out.q = std::move(q);
  return out;
}

}  // namespace rbtr
