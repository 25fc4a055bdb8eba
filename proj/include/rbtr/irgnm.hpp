#pragma once

#include <vector>

#include "rbtr/subproblem.hpp"

namespace rbtr {

struct IrgnmSettings {
  double delta = 1e-5;
  double tau = 3.5;
  double alpha_initial = 1e-5;
  Matrix q_center;  // q_o; empty selects the constant 3
  int max_outer = 100;
  bool keep_iterates = false;
  AlphaSettings alpha;
};

/// One row of the outer-iteration history.
struct IterationRecord {
  int iteration = 0;
  double J = 0.0;
  double alpha = 0.0;          // accepted alpha of the step leading here (0 for the start)
  int inner_iterations = 0;    // PGD iterations summed over the alpha trials
  int alpha_trials = 0;
  bool bracketed = true;
  long fom_solves = 0;         // cumulative trajectory solves
  double wall_time = 0.0;      // seconds since the start of the run
};

struct IrgnmResult {
  Matrix q;
  std::vector<IterationRecord> history;
  bool converged = false;  // discrepancy principle met
  bool cap_hit = false;
  double target = 0.0;     // tau^2 delta^2 / 2
  std::vector<Matrix> iterates;  // filled when keep_iterates is set
};

/// Default regularization center and initial guess, the constant 3.
Matrix default_center(const FomProblem& problem);

void check_settings(const IrgnmSettings& settings);

IrgnmResult run_fom_irgnm(const FomProblem& problem, const Observation& data, const IrgnmSettings& settings,
                          const Matrix& q0);

}  // namespace rbtr
