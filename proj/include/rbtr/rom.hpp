#pragma once

#include <atomic>
#include <memory>
#include <optional>

#include <Eigen/Cholesky>

#include "rbtr/reduction.hpp"
#include "rbtr/subproblem.hpp"

namespace rbtr {

/// Galerkin reduced model on span(Psi_V) with parameters in span(Psi_Q).
///
/// Reduced parameters are n_Q x (1 or K) coordinate matrices with lift
/// Psi_Q q_r; reduced trajectories are n_V x K. The bases must be orthonormal
/// in M_Q and M_V, so coordinate inner products equal full ones. The object is
/// immutable after construction; a new one is projected after every basis
/// change.
class RomModel {
 public:
  RomModel(const FomProblem& problem, const Observation& data, const Bases& bases, const Matrix& q_center);

  const FomProblem& problem() const { return problem_; }
  const Observation& data() const { return data_; }
  const Matrix& psi_q() const { return psi_q_; }
  const Matrix& psi_v() const { return psi_v_; }
  Index n_q() const { return psi_q_.cols(); }
  Index n_v() const { return psi_v_.cols(); }
  Index cols() const { return problem_.parameter_columns(); }
  int K() const { return problem_.K(); }

  Matrix lift(const Matrix& q_r) const { return psi_q_ * q_r; }
  Matrix lift_state(const Matrix& u_r) const { return psi_v_ * u_r; }
  /// M_Q-orthogonal projection coefficients.
  Matrix restrict_parameter(const Matrix& q) const;
  /// Zero-padded coordinates of a smaller nested basis.
  Matrix pad(const Matrix& q_r_old) const;

  /// A_r(q_r^k) = A_r(0) + sum_j q_r,j A_r(psi_j).
  Matrix operator_at(const Vector& q_col) const;
  /// B_r(u_r) with column j equal to A_r(psi_j) u_r.
  Matrix B(const Vector& u_r) const;
  const Matrix& mass() const { return mass_r_; }
  /// M_r^{-1} Cy_r, the reduced data the misfit is measured against.
  const Matrix& y_bar() const { return y_bar_; }
  /// Upper Cholesky factor R of the reduced mass, M_r = R'R.
  const Matrix& mass_factor() const { return mass_factor_; }
  double objective_constant() const { return j_const_; }

  Matrix solve_primal(const Matrix& q_r) const;
  Matrix solve_adjoint(const Matrix& q_r, const Matrix& u_r) const;
  Matrix solve_linearized_primal(const Matrix& q_r, const Matrix& u_r, const Matrix& d_r) const;
  /// Same with the matrices B_r(u_r^k) precomputed.
  Matrix solve_linearized_primal(const Matrix& q_r, const std::vector<Matrix>& b, const Matrix& d_r) const;
  Matrix solve_linearized_adjoint(const Matrix& q_r, const Matrix& u_r, const Matrix& ul_r) const;

  /// J_r from a reduced trajectory, written as a constant plus a nonnegative
  /// quadratic so that differences of nearby values keep their digits.
  double objective_from_state(const Matrix& u_r) const;
  double objective(const Matrix& q_r) const { return objective_from_state(solve_primal(q_r)); }

  /// Columns B_r(u_r^k)' p_r^k, summed with weight dt when stationary.
  Matrix gradient_from_states(const Matrix& u_r, const Matrix& p_r) const;
  Matrix gradient(const Matrix& q_r) const;
  std::vector<Matrix> B_trajectory(const Matrix& u_r) const;
  Matrix gradient_from_B(const std::vector<Matrix>& b, const Matrix& p_r) const;

  double parameter_inner(const Matrix& a, const Matrix& b) const {
    return problem_.parameter_weight() * (a.array() * b.array()).sum();
  }
  double parameter_norm(const Matrix& a) const { return std::sqrt(std::max(0.0, parameter_inner(a, a))); }

  /// Coordinates of the regularization center, Psi_Q' M_Q q_o.
  const Matrix& center() const { return center_r_; }

  /// Per-column radius eps^k = min_i dist(q_i^k, box) / ||Psi_Q(i, :)||.
  Vector feasibility_radius(const Matrix& q_r) const;
  /// True when ||d_r^k|| <= eps^k for every k (q_r must lift into the box).
  bool certified_feasible(const Matrix& q_r, const Matrix& d_r) const;
  bool certified_feasible(const Vector& radius, const Matrix& d_r) const;

  /// Feasible reduced parameter for q_r + d_r. Steps whose lift already lies
  /// in the box are returned unchanged. Otherwise the lift is
  /// clamped and restricted; the result is used when the restriction
  /// reproduces the clamped field up to 1e-10 relative and stays in the box,
  /// and nullopt is returned otherwise.
  std::optional<Matrix> project(const Matrix& q_r, const Matrix& d_r, double* defect = nullptr) const;
  /// Clamp-and-restrict without the residence check.
  Matrix project_relaxed(const Matrix& q_r, const Matrix& d_r) const;

  /// The lifted parameter snapped into the box (removes rounding residue).
  Matrix lift_admissible(const Matrix& q_r) const { return problem_.project_box(lift(q_r)); }

  long solves() const { return solves_->load(); }
  long lift_checks() const { return lift_checks_->load(); }

 private:
  using Factor = Eigen::LDLT<Matrix>;
  std::shared_ptr<const Factor> factor_for(const Vector& q_col, int k) const;
  Vector parameter_at(const Matrix& q_r, int k) const { return q_r.col(problem_.stationary() ? 0 : k); }
  void check(const Matrix& q_r) const;

  const FomProblem& problem_;
  const Observation& data_;
  Matrix psi_q_, psi_v_;
  Matrix a0_r_;             // n_V x n_V
  Matrix a_lin_;            // (n_V * n_V) x n_Q, column j = vec A_r(psi_j)
  Matrix mass_r_;           // Psi_V' M^c Psi_V, also C_r
  Matrix source_r_;         // n_V x (1 or K)
  Matrix cy_r_;             // n_V x K
  Matrix y_bar_;            // M_r^{-1} Cy_r
  Matrix mass_factor_;
  double j_const_ = 0.0;    // c1 - dt/2 sum y_bar' M_r y_bar
  Matrix center_r_;
  Vector row_norms_;        // ||Psi_Q(i, :)||_2
  mutable std::unique_ptr<FactorizationCache<Factor>> cache_;
  std::unique_ptr<std::atomic<long>> solves_ = std::make_unique<std::atomic<long>>(0);
  std::unique_ptr<std::atomic<long>> lift_checks_ = std::make_unique<std::atomic<long>>(0);
};

/// Linearization of the ROM at (q_r, u_r) for the reduced Tikhonov subproblem.
///
/// The map d_r -> u~_r is linear with n_Q (stationary) or n_Q K inputs, so its
/// matrix S is built once from unit inputs. With M_r = R'R the misfit is
/// j_const + dt/2 ||w0 + R S d||^2, so an evaluation costs two products.
class RomLinearization : public LinearizedModel {
 public:
  RomLinearization(const RomModel& rom, Matrix q_r, Matrix u_r);

  double data_term(const Matrix& d, Matrix* grad) const override;
  double inner(const Matrix& a, const Matrix& b) const override { return rom_.parameter_inner(a, b); }
  std::optional<Matrix> project(const Matrix& d) const override;
  Matrix project_relaxed(const Matrix& d) const override { return rom_.project_relaxed(q_r_, d); }
  Index rows() const override { return q_r_.rows(); }
  Index cols() const override { return q_r_.cols(); }

  /// u~_r(d) through S; equals rom.solve_linearized_primal(q_r, u_r, d).
  Matrix linearized_state(const Matrix& d) const;

 private:
  const RomModel& rom_;
  Matrix q_r_, u_r_;
  std::vector<Matrix> b_;  // B_r(u_r^k)
  Vector radius_;
  Matrix T_;               // blockdiag(R) S with M_r = R'R; S maps inputs to trajectories
  Vector w0_;              // blockdiag(R) vec(u_r - y_bar)
  Matrix gram_;            // T'T
  Vector tw0_;             // T'w0
  double w0_sq_ = 0.0;
};

}  // namespace rbtr
