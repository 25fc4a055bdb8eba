#pragma once

#include <string>
#include <vector>

#include "rbtr/estimator.hpp"
#include "rbtr/irgnm.hpp"

namespace rbtr {

struct TrSettings {
  double delta = 1e-5;
  double tau = 3.5;
  double tau_tilde = 3.5;
  double delta_tilde = 0.0;  // reduced noise level; 0 selects delta
  double alpha_initial = 1e-5;
  double eta0 = 0.1;
  double beta1 = 0.95;
  double beta2 = 0.75;
  double beta3 = 0.5;
  double kappa_arm = 1e-12;
  int max_backtracking = 100;  // AGC and inner line searches
  int max_inner = 50;
  int max_outer = 100;
  int max_rejects = 25;        // consecutive rejections before StagnationError
  int max_failure_enrichments = 20;
  double eps_pod = 1e-12;
  double eps_reduction = 10.0;  // eps_pod divisor per failure enrichment
  Matrix q_center;              // empty selects the constant 3
  AlphaSettings alpha;
};

void check_settings(const TrSettings& settings);

enum class Branch { start, agc, sufficient, necessary, easdc_accept, easdc_reject };
const char* to_string(Branch b);
inline bool accepted(Branch b) { return b == Branch::agc || b == Branch::sufficient || b == Branch::easdc_accept; }

/// One outer iteration. Row 0 describes the initial guess.
struct TrRecord {
  int iteration = 0;
  double J = 0.0;              // J_h at the current (accepted) iterate
  double eta = 0.0;            // radius after the update
  double eta_before = 0.0;
  Index n_q = 0;
  Index n_v = 0;
  long fom_solves = 0;         // cumulative trajectory solves
  Branch branch = Branch::start;
  double delta_J = 0.0;        // estimator at the trial point
  double J_r_trial = 0.0;
  double J_r_agc = 0.0;
  double rho = 0.0;            // actual over predicted decrease, accepted non-AGC steps
  double alpha = 0.0;          // last alpha used in the inner solve
  int inner_iterations = 0;
  int alpha_trials = 0;        // reduced subproblem solves in the inner loop
  bool bracketed = true;       // every inner alpha met the theta/Theta bracket
  int failure_enrichments = 0;
  int decision_fom_evaluations = 0;  // J_h evaluations spent deciding acceptance
  double max_inner_indicator = 0.0;  // largest R over the iterates used this round
  double wall_time = 0.0;
};

struct TrResult {
  Matrix q;
  std::vector<TrRecord> history;
  bool converged = false;
  bool cap_hit = false;
  double target = 0.0;
  Index n_q_initial = 0;
  double t_bar = 0.0;
};

/// Error-aware trust-region IRGNM with adaptively enriched reduced models.
TrResult run_tr_irgnm(const FomProblem& problem, const Observation& data, const TrSettings& settings,
                      const Matrix& q0);

}  // namespace rbtr
