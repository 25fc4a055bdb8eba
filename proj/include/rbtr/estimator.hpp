#pragma once

#include "rbtr/rom.hpp"

namespace rbtr {

struct Estimate {
  double J_r = 0.0;
  double delta_pr = 0.0;
  double delta_J = 0.0;
  double coercivity = 0.0;
  double indicator = 0.0;  // delta_J / |J_r|
};

/// Residual-based a posteriori bounds evaluated with full-order residuals of
/// lifted reduced solutions. Dual norms use the factorization of M_V held by
/// the problem; all members are const and may run concurrently.
class Estimator {
 public:
  Estimator(const FomProblem& problem, const Observation& data) : problem_(problem), data_(data) {}

  /// ||r_pr^k||^2_{V'} for r_pr^k = L^k - A(q^k) u^k - M (u^k - u^{k-1}) / dt.
  Vector primal_residual_norms(const Matrix& q, const Matrix& u) const;
  /// ||r_ad^k||^2_{V'} for r_ad^k = Cy^k - C u^k - A(q^k) p^k + M (p^{k+1} - p^k) / dt.
  Vector adjoint_residual_norms(const Matrix& q, const Matrix& u, const Matrix& p) const;

  /// (dt sum ||r_pr||^2 / a)^(1/2).
  double delta_pr(const Matrix& q, const Matrix& u) const;
  /// (dt sum ||r_ad||^2)^(1/2) delta_pr / sqrt(a) + ||C||^2 delta_pr^2 / (2 a).
  double delta_J(const Matrix& q, const Matrix& u, const Matrix& p) const;

  /// Full estimate for reduced solutions u_r, p_r at q_r.
  Estimate estimate(const RomModel& rom, const Matrix& q_r, const Matrix& u_r, const Matrix& p_r) const;
  /// Same, solving the reduced primal and adjoint first.
  Estimate estimate(const RomModel& rom, const Matrix& q_r) const;

  static double combine_pr(const Vector& pr, double dt, double a);
  static double combine_J(const Vector& pr, const Vector& ad, double dt, double a, double c_norm);

 private:
  const FomProblem& problem_;
  const Observation& data_;
};

/// R = delta_J / |J_r|.
double relative_indicator(double delta_J, double J_r);

}  // namespace rbtr
