#include "rbtr/tr_irgnm.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>

namespace rbtr {

void check_settings(const TrSettings& s) {
  if (!(s.delta >= 0.0)) throw ConfigError("delta must be nonnegative");
  if (!(s.tau > 1.0) || !(s.tau_tilde > 1.0)) throw ConfigError("tau and tau_tilde must exceed 1");
  if (s.delta_tilde != 0.0 && !(s.delta_tilde >= s.delta)) throw ConfigError("delta_tilde must be at least delta");
  if (!(s.alpha.theta > 0.0 && s.alpha.theta < s.alpha.Theta && s.alpha.Theta < 2.0))
    throw ConfigError("theta and Theta must satisfy 0 < theta < Theta < 2");
  if (!(s.alpha_initial > 0.0)) throw ConfigError("initial alpha must be positive");
  if (!(s.eta0 > 0.0)) throw ConfigError("eta0 must be positive");
  if (!(s.beta1 > 0.0 && s.beta1 < 1.0)) throw ConfigError("beta1 must lie in (0, 1)");
  if (!(s.beta2 >= 0.75 && s.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0.75, 1)");
  if (!(s.beta3 > 0.0 && s.beta3 < 1.0)) throw ConfigError("beta3 must lie in (0, 1)");
  if (!(s.kappa_arm > 0.0)) throw ConfigError("kappa_arm must be positive");
  if (!(s.eps_pod > 0.0)) throw ConfigError("eps_pod must be positive");
  if (!(s.eps_reduction > 1.0)) throw ConfigError("eps_reduction must exceed 1");
  if (s.max_backtracking < 0 || s.max_inner < 1 || s.max_outer < 0 || s.max_rejects < 1 ||
      s.max_failure_enrichments < 0)
    throw ConfigError("iteration caps must be positive");
}

const char* to_string(Branch b) {
  switch (b) {
    case Branch::start: return "start";
    case Branch::agc: return "agc";
    case Branch::sufficient: return "sufficient";
    case Branch::necessary: return "necessary";
    case Branch::easdc_accept: return "easdc_accept";
    case Branch::easdc_reject: return "easdc_reject";
  }
  return "?";
}

namespace {

struct Point {
  Matrix q_r;
  Estimate est;
};

struct InnerResult {
  Point trial;
  bool moved = false;
  int iterations = 0;
  int alpha_trials = 0;
  bool bracketed = true;
  double alpha_first = 0.0;  // alpha of the step from the AGC, 0 if none
  double alpha_last = 0.0;
  double max_indicator = 0.0;
};

class Driver {
 public:
  Driver(const FomProblem& problem, const Observation& data, const TrSettings& settings)
      : pb_(problem), data_(data), s_(settings), est_(problem, data) {}

  TrResult run(const Matrix& q0);

 private:
  void rebuild() { rom_ = std::make_unique<RomModel>(pb_, data_, bases_, center_); }
  Point at(const Matrix& q_r) const { return {q_r, est_.estimate(*rom_, q_r)}; }
  std::optional<Point> agc(const Point& start, double eta) const;
  InnerResult inner_solve(const Point& agc_point, double eta, double alpha0) const;
  FomEvaluation full_evaluation(const Matrix& q, const Matrix* u = nullptr) const;

  const FomProblem& pb_;
  const Observation& data_;
  const TrSettings& s_;
  Estimator est_;
  Matrix center_;
  Bases bases_;
  std::unique_ptr<RomModel> rom_;
  double t_bar_ = 1.0;
};

FomEvaluation Driver::full_evaluation(const Matrix& q, const Matrix* u) const {
  FomEvaluation ev;
  ev.q = q;
  ev.u = u ? *u : pb_.solve_primal(q);
  ev.J = pb_.misfit_direct(ev.u, data_);
  ev.p = pb_.solve_adjoint(q, ev.u, data_);
  ev.gradient = pb_.gradient_from_states(ev.u, ev.p);
  if (!std::isfinite(ev.J)) throw SolverError("non-finite full-order objective");
  return ev;
}

// Projected gradient step from `start`, halving t until the point lies in the
// trust region and satisfies the Armijo-type decay.
std::optional<Point> Driver::agc(const Point& start, double eta) const {
  const Matrix g = rom_->gradient(start.q_r);
  double t = t_bar_;
  for (int h = 0; h <= s_.max_backtracking; ++h, t *= 0.5) {
    const std::optional<Matrix> x = rom_->project(start.q_r, -t * g);
    if (!x) continue;
    const Point p = at(*x);
    const Matrix step = *x - start.q_r;
    if (p.est.indicator <= eta &&
        p.est.J_r - start.est.J_r <= -s_.kappa_arm / t * rom_->parameter_inner(step, step))
      return p;
  }
  return std::nullopt;
}

InnerResult Driver::inner_solve(const Point& agc_point, double eta, double alpha0) const {
  const double delta_tilde = s_.delta_tilde > 0.0 ? s_.delta_tilde : s_.delta;
  const double target_r = 0.5 * std::pow(s_.tau_tilde * delta_tilde, 2);
  InnerResult out;
  out.trial = agc_point;
  out.max_indicator = agc_point.est.indicator;
  out.alpha_last = alpha0;
  double t_prev = 0.5;
  for (int l = 1;; ++l) {
    const Point& cur = out.trial;
    if (cur.est.J_r < target_r || s_.beta1 * eta <= cur.est.indicator || out.iterations >= s_.max_inner) break;
    const Matrix u_r = rom_->solve_primal(cur.q_r);
    const RomLinearization lin(*rom_, cur.q_r, u_r);
    const Matrix zero = Matrix::Zero(cur.q_r.rows(), cur.q_r.cols());
    const AlphaResult ar = regulate_alpha(lin, rom_->center() - cur.q_r, cur.est.J_r, out.alpha_last, s_.alpha, zero);
    out.alpha_last = ar.alpha;
    out.alpha_trials += ar.subproblem_solves;
    out.bracketed = out.bracketed && ar.bracketed;
    if (l == 1) out.alpha_first = ar.alpha;
    if (ar.d.norm() == 0.0) break;

    // q + d is admissible, so every q + t d with t in [0, 1] is as well
    double t = l == 1 ? 1.0 : std::min(2.0 * t_prev, 1.0);
    std::optional<Point> next;
    for (int h = 0; h <= s_.max_backtracking; ++h, t *= 0.5) {
      Point p = at(cur.q_r + t * ar.d);
      const Matrix step = p.q_r - cur.q_r;
      if (p.est.indicator <= eta && p.est.J_r - cur.est.J_r <= -s_.kappa_arm / t * rom_->parameter_inner(step, step)) {
        next = std::move(p);
        break;
      }
    }
    if (!next) break;
    t_prev = t;
    out.max_indicator = std::max(out.max_indicator, next->est.indicator);
    out.trial = std::move(*next);
    out.moved = true;
    ++out.iterations;
  }
  return out;
}

TrResult Driver::run(const Matrix& q0) {
  check_settings(s_);
  pb_.check_parameter(q0);
  if (!pb_.admissible(q0)) throw ConfigError("initial parameter is not admissible");
  center_ = s_.q_center.size() ? s_.q_center : default_center(pb_);
  pb_.check_parameter(center_);

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  const long solves0 = pb_.counts().total();

  TrResult out;
  out.target = 0.5 * std::pow(s_.tau * s_.delta, 2);
  FomEvaluation ev = full_evaluation(q0);
  bases_ = init_bases(pb_, ev, center_, s_.eps_pod);
  rebuild();
  out.n_q_initial = rom_->n_q();
  const double gnorm = pb_.parameter_norm(ev.gradient);
  t_bar_ = gnorm > 0.0 ? std::min(0.5 / gnorm, 1.0) : 1.0;
  out.t_bar = t_bar_;

  Matrix q_r = rom_->restrict_parameter(q0);
  double eta = s_.eta0, alpha0 = s_.alpha_initial;
  {
    TrRecord r;
    r.J = ev.J;
    r.eta = r.eta_before = eta;
    r.n_q = rom_->n_q();
    r.n_v = rom_->n_v();
    r.fom_solves = pb_.counts().total() - solves0;
    r.wall_time = elapsed();
    out.history.push_back(r);
  }

  int rejects = 0;
  for (int i = 0; ev.J > out.target; ++i) {
    if (i >= s_.max_outer) {
      out.cap_hit = true;
      break;
    }
    TrRecord rec;
    rec.iteration = i + 1;
    rec.eta_before = eta;

    // Start point in the trust region and an AGC with decay in J_h; enrich
    // with a shrinking POD tolerance until both hold.
    double eps = s_.eps_pod;
    Point start_point, agc_point;
    for (;;) {
      start_point = at(q_r);
      std::optional<FailureKind> fail;
      if (!(start_point.est.indicator <= eta)) {
        fail = FailureKind::not_in_trust_region;
      } else {
        std::optional<Point> a = agc(start_point, eta);
        if (a && a->est.J_r < ev.J)
          agc_point = std::move(*a);
        else
          fail = FailureKind::agc_decay;
      }
      if (!fail) break;
      if (rec.failure_enrichments == s_.max_failure_enrichments)
        throw StagnationError("no admissible Cauchy point after " + std::to_string(rec.failure_enrichments) +
                              " enrichments in outer iteration " + std::to_string(i + 1));
      eps /= s_.eps_reduction;
      ++rec.failure_enrichments;
      enrich_on_failure(pb_, bases_, *fail, ev, eps);
      rebuild();
      q_r = rom_->pad(q_r);
    }

    InnerResult inner;
    inner.trial = agc_point;
    inner.max_indicator = std::max(start_point.est.indicator, agc_point.est.indicator);
    inner.alpha_last = alpha0;
    if (s_.beta1 * eta > agc_point.est.indicator) {
      inner = inner_solve(agc_point, eta, alpha0);
      inner.max_indicator = std::max(inner.max_indicator, start_point.est.indicator);
    }
    const Point& trial = inner.trial;
    rec.inner_iterations = inner.iterations;
    rec.alpha_trials = inner.alpha_trials;
    rec.bracketed = inner.bracketed;
    rec.alpha = inner.alpha_last;
    rec.max_inner_indicator = inner.max_indicator;
    rec.J_r_agc = agc_point.est.J_r;
    rec.J_r_trial = trial.est.J_r;
    rec.delta_J = trial.est.delta_J;

    std::optional<Matrix> u_trial;
    if (!inner.moved) {
      rec.branch = Branch::agc;
    } else if (trial.est.J_r + trial.est.delta_J < agc_point.est.J_r) {
      rec.branch = Branch::sufficient;
    } else if (trial.est.J_r - trial.est.delta_J > agc_point.est.J_r) {
      rec.branch = Branch::necessary;
    } else {
      u_trial = pb_.solve_primal(rom_->lift_admissible(trial.q_r));
      ++rec.decision_fom_evaluations;
      rec.branch = pb_.misfit_direct(*u_trial, data_) <= agc_point.est.J_r ? Branch::easdc_accept : Branch::easdc_reject;
    }

    if (accepted(rec.branch)) {
      FomEvaluation next = full_evaluation(rom_->lift_admissible(trial.q_r), u_trial ? &*u_trial : nullptr);
      enrich_after_acceptance(pb_, bases_, next, s_.eps_pod);
      rebuild();
      q_r = rom_->restrict_parameter(next.q);
      if (rec.branch == Branch::agc) {
        eta *= s_.beta3;
      } else {
        // predicted decrease of the old model versus the model enriched at the new iterate
        const double predicted = start_point.est.J_r - rom_->objective(q_r);
        rec.rho = predicted > 0.0 ? (ev.J - next.J) / predicted : 0.0;
        if (rec.rho > s_.beta2) eta /= s_.beta3;
      }
      ev = std::move(next);
      rejects = 0;
      if (inner.alpha_first > 0.0)
        alpha0 = inner.alpha_first;
      else
        alpha0 = inner.alpha_last;
    } else {
      eta *= s_.beta3;
      if (++rejects >= s_.max_rejects)
        throw StagnationError("trial step rejected " + std::to_string(rejects) + " consecutive times (eta = " +
                              std::to_string(eta) + ")");
    }

    rec.J = ev.J;
    rec.eta = eta;
    rec.n_q = rom_->n_q();
    rec.n_v = rom_->n_v();
    rec.fom_solves = pb_.counts().total() - solves0;
    rec.wall_time = elapsed();
    out.history.push_back(rec);
  }
  out.converged = ev.J <= out.target;
  out.q = ev.q;
  return out;
}

}  // namespace

TrResult run_tr_irgnm(const FomProblem& problem, const Observation& data, const TrSettings& settings,
                      const Matrix& q0) {
  Driver driver(problem, data, settings);
  return driver.run(q0);
}

}  // namespace rbtr
