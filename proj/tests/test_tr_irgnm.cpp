#include <gtest/gtest.h>

#include "trace_checks.hpp"

using namespace rbtr;

namespace {

struct Instance {
  FomProblem problem;
  Observation data;
};

Instance make(int run, int cells, int K, double delta) {
  const RunSetup rs = run_setup(run);
  ProblemSpec s;
  s.kind = rs.kind;
  s.stationary = rs.stationary;
  s.cells_per_side = cells;
  s.time_steps = K;
  FomProblem problem(s);
  Observation data = make_noisy_data(problem, exact_parameter(run, problem.mesh(), K), delta, 1);
  return {std::move(problem), std::move(data)};
}

TrSettings settings(double delta) {
  TrSettings s;
  s.delta = delta;
  return s;
}

void expect_clean_trace(const TrResult& r, const TrSettings& s) {
  for (const std::string& v : trace::violations(r, s)) ADD_FAILURE() << v;
}

}  // namespace

TEST(TrIrgnm, StationaryReactionConverges) {
  Instance in = make(1, 12, 10, 1e-4);
  const TrSettings s = settings(1e-4);
  const TrResult r = run_tr_irgnm(in.problem, in.data, s, default_center(in.problem));
  ASSERT_TRUE(r.converged);
  EXPECT_FALSE(r.cap_hit);
  EXPECT_LE(r.history.back().J, r.target);
  EXPECT_DOUBLE_EQ(r.target, 0.5 * std::pow(3.5e-4, 2));
  EXPECT_NEAR(in.problem.objective(r.q, in.data), r.history.back().J, 1e-12 * r.history.back().J);
  EXPECT_TRUE(in.problem.admissible(r.q));
  expect_clean_trace(r, s);
  // one gradient snapshot per accepted step in the stationary case
  EXPECT_EQ(r.history.back().n_q, r.n_q_initial + trace::accepted_steps(r));
  EXPECT_GT(r.t_bar, 0.0);
  EXPECT_LE(r.t_bar, 1.0);
}

TEST(TrIrgnm, FewerFullOrderSolvesThanFomIrgnm) {
  Instance in = make(1, 12, 10, 1e-4);
  const TrResult tr = run_tr_irgnm(in.problem, in.data, settings(1e-4), default_center(in.problem));
  IrgnmSettings fs;
  fs.delta = 1e-4;
  const IrgnmResult fom = run_fom_irgnm(in.problem, in.data, fs, default_center(in.problem));
  ASSERT_TRUE(tr.converged && fom.converged);
  EXPECT_LT(tr.history.back().fom_solves, fom.history.back().fom_solves / 10);
}

TEST(TrIrgnm, TimeDependentReactionConverges) {
  Instance in = make(3, 8, 6, 1e-4);
  const TrSettings s = settings(1e-4);
  const TrResult r = run_tr_irgnm(in.problem, in.data, s, default_center(in.problem));
  ASSERT_TRUE(r.converged);
  EXPECT_EQ(r.q.cols(), 6);
  expect_clean_trace(r, s);
}

TEST(TrIrgnm, StationaryDiffusionTraceIsClean) {
  Instance in = make(2, 10, 6, 1e-4);
  TrSettings s = settings(1e-4);
  s.max_outer = 8;
  const TrResult r = run_tr_irgnm(in.problem, in.data, s, default_center(in.problem));
  expect_clean_trace(r, s);
  EXPECT_LT(r.history.back().J, r.history.front().J);
}

TEST(TrIrgnm, LargeNoiseStopsAtStart) {
  Instance in = make(1, 8, 5, 1e-4);
  const TrResult r = run_tr_irgnm(in.problem, in.data, settings(1.0), default_center(in.problem));
  EXPECT_TRUE(r.converged);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].branch, Branch::start);
  EXPECT_EQ(r.history[0].n_q, r.n_q_initial);
}

TEST(TrIrgnm, OuterCapIsReported) {
  Instance in = make(1, 10, 5, 1e-5);
  TrSettings s = settings(1e-6);
  s.max_outer = 2;
  const TrResult r = run_tr_irgnm(in.problem, in.data, s, default_center(in.problem));
  EXPECT_FALSE(r.converged);
  EXPECT_TRUE(r.cap_hit);
  EXPECT_EQ(r.history.size(), 3u);
}

TEST(TrIrgnm, TinyRadiusWithoutEnrichmentStagnates) {
  Instance in = make(1, 8, 5, 1e-4);
  TrSettings s = settings(1e-4);
  s.eta0 = 1e-300;
  s.max_failure_enrichments = 0;
  EXPECT_THROW(run_tr_irgnm(in.problem, in.data, s, default_center(in.problem)), StagnationError);
}

TEST(TrIrgnm, RunsAreDeterministic) {
  Instance in = make(1, 10, 5, 1e-4);
  const TrResult a = run_tr_irgnm(in.problem, in.data, settings(1e-4), default_center(in.problem));
  const TrResult b = run_tr_irgnm(in.problem, in.data, settings(1e-4), default_center(in.problem));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    EXPECT_EQ(a.history[k].J, b.history[k].J);
    EXPECT_EQ(a.history[k].eta, b.history[k].eta);
    EXPECT_EQ(a.history[k].branch, b.history[k].branch);
  }
  EXPECT_EQ((a.q - b.q).norm(), 0.0);
}

TEST(TrIrgnm, InvalidSettingsAreRejected) {
  auto bad = [](auto edit) {
    TrSettings s;
    edit(s);
    EXPECT_THROW(check_settings(s), ConfigError);
  };
  bad([](TrSettings& s) { s.tau = 1.0; });
  bad([](TrSettings& s) { s.beta1 = 1.0; });
  bad([](TrSettings& s) { s.beta2 = 0.5; });
  bad([](TrSettings& s) { s.beta3 = 0.0; });
  bad([](TrSettings& s) { s.eta0 = 0.0; });
  bad([](TrSettings& s) { s.eps_pod = 0.0; });
  bad([](TrSettings& s) { s.eps_reduction = 1.0; });
  bad([](TrSettings& s) { s.max_rejects = 0; });
  bad([](TrSettings& s) { s.delta_tilde = 0.5 * s.delta; });
  EXPECT_NO_THROW(check_settings(TrSettings{}));
}

TEST(TrIrgnm, InadmissibleStartIsRejected) {
  Instance in = make(1, 6, 5, 1e-4);
  const Matrix q0 = in.problem.constant_parameter(-1.0);
  EXPECT_THROW(run_tr_irgnm(in.problem, in.data, settings(1e-4), q0), ConfigError);
}

TEST(TrIrgnm, BranchNames) {
  EXPECT_STREQ(to_string(Branch::easdc_reject), "easdc_reject");
  EXPECT_TRUE(accepted(Branch::easdc_accept));
  EXPECT_FALSE(accepted(Branch::necessary));
  EXPECT_FALSE(accepted(Branch::start));
}
