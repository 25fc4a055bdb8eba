#include "rbtr/estimator.hpp"

#include <cmath>

namespace rbtr {

namespace {

// A(q^k) x^k for every k, assembling each distinct operator once.
Matrix apply_operators(const FomProblem& pb, const Matrix& q, const Matrix& x) {
  if (pb.stationary()) return pb.affine().evaluate(q.col(0)) * x;
  Matrix out(x.rows(), x.cols());
  for (int k = 0; k < pb.K(); ++k) out.col(k) = pb.affine().evaluate(q.col(k)) * x.col(k);
  return out;
}

}  // namespace

Vector Estimator::primal_residual_norms(const Matrix& q, const Matrix& u) const {
  const FomProblem& pb = problem_;
  const double inv_dt = 1.0 / pb.dt();
  const Matrix au = apply_operators(pb, q, u);
  const Matrix mu = pb.mass_constrained() * u;
  Vector out(pb.K());
  for (int k = 0; k < pb.K(); ++k) {
    Vector r = pb.source_at(k) - au.col(k) - inv_dt * mu.col(k);
    if (k > 0) r += inv_dt * mu.col(k - 1);
    out[k] = pb.state_product().dual_norm_squared(r);
  }
  return out;
}

Vector Estimator::adjoint_residual_norms(const Matrix& q, const Matrix& u, const Matrix& p) const {
  const FomProblem& pb = problem_;
  const double inv_dt = 1.0 / pb.dt();
  const Matrix ap = apply_operators(pb, q, p);
  const Matrix mu = pb.mass_constrained() * u, mp = pb.mass_constrained() * p;
  Vector out(pb.K());
  for (int k = 0; k < pb.K(); ++k) {
    Vector r = data_.cy.col(k) - mu.col(k) - ap.col(k) - inv_dt * mp.col(k);
    if (k + 1 < pb.K()) r += inv_dt * mp.col(k + 1);
    out[k] = pb.state_product().dual_norm_squared(r);
  }
  return out;
}

double Estimator::combine_pr(const Vector& pr, double dt, double a) {
  if (!(a > 0.0)) throw SolverError("coercivity constant must be positive");
  return std::sqrt(dt * pr.sum() / a);
}

double Estimator::combine_J(const Vector& pr, const Vector& ad, double dt, double a, double c_norm) {
  const double dpr = combine_pr(pr, dt, a);
  return std::sqrt(dt * ad.sum()) * dpr / std::sqrt(a) + c_norm * c_norm * dpr * dpr / (2.0 * a);
}

double Estimator::delta_pr(const Matrix& q, const Matrix& u) const {
  return combine_pr(primal_residual_norms(q, u), problem_.dt(), problem_.coercivity_constant(q));
}

double Estimator::delta_J(const Matrix& q, const Matrix& u, const Matrix& p) const {
  return combine_J(primal_residual_norms(q, u), adjoint_residual_norms(q, u, p), problem_.dt(),
                   problem_.coercivity_constant(q), problem_.observation_norm());
}

Estimate Estimator::estimate(const RomModel& rom, const Matrix& q_r, const Matrix& u_r, const Matrix& p_r) const {
  const Matrix q = rom.lift(q_r), u = rom.lift_state(u_r), p = rom.lift_state(p_r);
  Estimate e;
  e.J_r = rom.objective_from_state(u_r);
  e.coercivity = problem_.coercivity_constant(q);
  const Vector pr = primal_residual_norms(q, u), ad = adjoint_residual_norms(q, u, p);
  e.delta_pr = combine_pr(pr, problem_.dt(), e.coercivity);
  e.delta_J = combine_J(pr, ad, problem_.dt(), e.coercivity, problem_.observation_norm());
  e.indicator = relative_indicator(e.delta_J, e.J_r);
  return e;
}

Estimate Estimator::estimate(const RomModel& rom, const Matrix& q_r) const {
  const Matrix u = rom.solve_primal(q_r);
  return estimate(rom, q_r, u, rom.solve_adjoint(q_r, u));
}

double relative_indicator(double delta_J, double J_r) {
  if (!(std::abs(J_r) >= 1e-300)) throw SolverError("reduced objective vanishes; relative indicator undefined");
  return delta_J / std::abs(J_r);
}

}  // namespace rbtr
