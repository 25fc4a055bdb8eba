#include "rbtr/rom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rbtr {

RomModel::RomModel(const FomProblem& problem, const Observation& data, const Bases& bases, const Matrix& q_center)
    : problem_(problem), data_(data), psi_q_(bases.q), psi_v_(bases.v) {
  const Index N = problem.size();
  if (psi_q_.rows() != N || psi_v_.rows() != N || psi_q_.cols() == 0 || psi_v_.cols() == 0)
    throw ConfigError("reduced bases must be nonempty with one row per node");
  if (orthonormality_defect(psi_q_, problem.parameter_product()) > 1e-8)
    throw ConfigError("parameter basis is not orthonormal in the parameter product");
  if (orthonormality_defect(psi_v_, problem.state_product()) > 1e-8)
    throw ConfigError("state basis is not orthonormal in the state product");
  problem.check_parameter(q_center);

  const Index nv = n_v(), nq = n_q();
  mass_r_ = psi_v_.transpose() * (problem.mass_constrained() * psi_v_);
  a0_r_ = psi_v_.transpose() * (problem.affine().constant_part() * psi_v_);
  a_lin_.resize(nv * nv, nq);
  for (Index j = 0; j < nq; ++j) {
    const SparseMatrix aj = problem.affine().linear_part(psi_q_.col(j));
    const Matrix proj = psi_v_.transpose() * (aj * psi_v_);
    a_lin_.col(j) = Eigen::Map<const Vector>(proj.data(), nv * nv);
  }
  source_r_ = psi_v_.transpose() * problem.source();
  cy_r_ = psi_v_.transpose() * data.cy;
  const Eigen::LLT<Matrix> mass_llt(mass_r_);
  if (mass_llt.info() != Eigen::Success) throw SolverError("reduced mass matrix is not positive definite");
  mass_factor_ = mass_llt.matrixU();
  y_bar_ = mass_llt.solve(cy_r_);
  j_const_ = data.c1 - 0.5 * problem.dt() * (y_bar_.array() * cy_r_.array()).sum();
  center_r_ = restrict_parameter(q_center);
  row_norms_ = psi_q_.rowwise().norm();
  cache_ = std::make_unique<FactorizationCache<Factor>>(static_cast<std::size_t>(K() + 2));
}

Matrix RomModel::restrict_parameter(const Matrix& q) const {
  return psi_q_.transpose() * problem_.parameter_product().apply(q);
}

Matrix RomModel::pad(const Matrix& q_r_old) const {
  if (q_r_old.rows() > n_q()) throw ConfigError("cannot pad coordinates of a larger basis");
  Matrix out = Matrix::Zero(n_q(), q_r_old.cols());
  out.topRows(q_r_old.rows()) = q_r_old;
  return out;
}

Matrix RomModel::operator_at(const Vector& q_col) const {
  const Vector a = a_lin_ * q_col;
  return a0_r_ + Eigen::Map<const Matrix>(a.data(), n_v(), n_v());
}

Matrix RomModel::B(const Vector& u_r) const {
  const Index nv = n_v();
  Matrix b(nv, n_q());
  for (Index j = 0; j < n_q(); ++j) b.col(j) = Eigen::Map<const Matrix>(a_lin_.col(j).data(), nv, nv) * u_r;
  return b;
}

std::vector<Matrix> RomModel::B_trajectory(const Matrix& u_r) const {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(K()));
  for (int k = 0; k < K(); ++k) out.push_back(B(u_r.col(k)));
  return out;
}

void RomModel::check(const Matrix& q_r) const {
  if (q_r.rows() != n_q() || q_r.cols() != cols())
    throw ConfigError("reduced parameter has the wrong shape");
  if (!q_r.allFinite()) throw SolverError("reduced parameter contains non-finite values");
}

std::shared_ptr<const RomModel::Factor> RomModel::factor_for(const Vector& q_col, int k) const {
  return cache_->get(q_col, [&]() {
    const Matrix system = mass_r_ / problem_.dt() + operator_at(q_col);
    auto f = std::make_shared<Factor>(system);
    if (f->info() != Eigen::Success || !(f->rcond() > 1e-14))
      throw SolverError("singular reduced system at time step " + std::to_string(k + 1));
    return std::shared_ptr<const Factor>(f);
  });
}

Matrix RomModel::solve_primal(const Matrix& q_r) const {
  check(q_r);
  ++*solves_;
  const double inv_dt = 1.0 / problem_.dt();
  Matrix u(n_v(), K());
  Vector prev = Vector::Zero(n_v());
  for (int k = 0; k < K(); ++k) {
    const Vector rhs = source_r_.col(source_r_.cols() == 1 ? 0 : k) + inv_dt * (mass_r_ * prev);
    prev = factor_for(parameter_at(q_r, k), k)->solve(rhs);
    u.col(k) = prev;
  }
  return u;
}

Matrix RomModel::solve_adjoint(const Matrix& q_r, const Matrix& u_r) const {
  check(q_r);
  ++*solves_;
  const double inv_dt = 1.0 / problem_.dt();
  Matrix p(n_v(), K());
  Vector next = Vector::Zero(n_v());
  for (int k = K() - 1; k >= 0; --k) {
    const Vector rhs = -(mass_r_ * u_r.col(k)) + cy_r_.col(k) + inv_dt * (mass_r_ * next);
    next = factor_for(parameter_at(q_r, k), k)->solve(rhs);
    p.col(k) = next;
  }
  return p;
}

Matrix RomModel::solve_linearized_primal(const Matrix& q_r, const std::vector<Matrix>& b, const Matrix& d_r) const {
  check(q_r);
  check(d_r);
  ++*solves_;
  const double inv_dt = 1.0 / problem_.dt();
  Matrix ul(n_v(), K());
  Vector prev = Vector::Zero(n_v());
  for (int k = 0; k < K(); ++k) {
    const Vector rhs = inv_dt * (mass_r_ * prev) - b[static_cast<std::size_t>(k)] * parameter_at(d_r, k);
    prev = factor_for(parameter_at(q_r, k), k)->solve(rhs);
    ul.col(k) = prev;
  }
  return ul;
}

Matrix RomModel::solve_linearized_primal(const Matrix& q_r, const Matrix& u_r, const Matrix& d_r) const {
  return solve_linearized_primal(q_r, B_trajectory(u_r), d_r);
}

Matrix RomModel::solve_linearized_adjoint(const Matrix& q_r, const Matrix& u_r, const Matrix& ul_r) const {
  check(q_r);
  ++*solves_;
  const double inv_dt = 1.0 / problem_.dt();
  Matrix p(n_v(), K());
  Vector next = Vector::Zero(n_v());
  for (int k = K() - 1; k >= 0; --k) {
    const Vector rhs = -(mass_r_ * (u_r.col(k) + ul_r.col(k))) + cy_r_.col(k) + inv_dt * (mass_r_ * next);
    next = factor_for(parameter_at(q_r, k), k)->solve(rhs);
    p.col(k) = next;
  }
  return p;
}

double RomModel::objective_from_state(const Matrix& u_r) const {
  const Matrix r = u_r - y_bar_;
  const Matrix mr = mass_r_ * r;
  return j_const_ + 0.5 * problem_.dt() * (r.array() * mr.array()).sum();
}

Matrix RomModel::gradient_from_B(const std::vector<Matrix>& b, const Matrix& p_r) const {
  Matrix g = Matrix::Zero(n_q(), cols());
  for (int k = 0; k < K(); ++k) {
    const Vector gk = b[static_cast<std::size_t>(k)].transpose() * p_r.col(k);
    if (problem_.stationary())
      g.col(0) += problem_.dt() * gk;
    else
      g.col(k) = gk;
  }
  return g;
}

Matrix RomModel::gradient_from_states(const Matrix& u_r, const Matrix& p_r) const {
  // B_r(u)' p = (p' A_r(psi_j) u)_j = a_lin' vec(p u')
  Matrix g = Matrix::Zero(n_q(), cols());
  for (int k = 0; k < K(); ++k) {
    const Matrix outer = p_r.col(k) * u_r.col(k).transpose();
    const Vector gk = a_lin_.transpose() * Eigen::Map<const Vector>(outer.data(), outer.size());
    if (problem_.stationary())
      g.col(0) += problem_.dt() * gk;
    else
      g.col(k) = gk;
  }
  return g;
}

Matrix RomModel::gradient(const Matrix& q_r) const {
  const Matrix u = solve_primal(q_r);
  return gradient_from_states(u, solve_adjoint(q_r, u));
}

Vector RomModel::feasibility_radius(const Matrix& q_r) const {
  const Matrix q = lift(q_r);
  const double lo = problem_.lower(), hi = problem_.upper();
  Vector eps = Vector::Constant(q.cols(), std::numeric_limits<double>::infinity());
  for (Index k = 0; k < q.cols(); ++k)
    for (Index i = 0; i < q.rows(); ++i) {
      if (row_norms_[i] == 0.0) {
        if (q(i, k) < lo || q(i, k) > hi) eps[k] = -1.0;
        continue;
      }
      eps[k] = std::min(eps[k], std::min(hi - q(i, k), q(i, k) - lo) / row_norms_[i]);
    }
  return eps;
}

bool RomModel::certified_feasible(const Vector& radius, const Matrix& d_r) const {
  for (Index k = 0; k < d_r.cols(); ++k)
    if (!(radius[k] >= 0.0) || d_r.col(k).norm() > radius[k]) return false;
  return true;
}

bool RomModel::certified_feasible(const Matrix& q_r, const Matrix& d_r) const {
  return certified_feasible(feasibility_radius(q_r), d_r);
}

std::optional<Matrix> RomModel::project(const Matrix& q_r, const Matrix& d_r, double* defect) const {
  const Matrix x = q_r + d_r;
  const Matrix lifted = lift(x);
  ++*lift_checks_;
  if (defect) *defect = 0.0;
  if (problem_.admissible(lifted)) return x;
  const Matrix clamped = problem_.project_box(lifted);
  const Matrix x_new = restrict_parameter(clamped);
  const Matrix relifted = lift(x_new);
  const double def = problem_.parameter_norm(relifted - clamped) / std::max(problem_.parameter_norm(clamped), 1e-300);
  if (defect) *defect = def;
  const double slack = 1e-12 * problem_.upper();
  const bool inside = relifted.minCoeff() >= problem_.lower() - slack && relifted.maxCoeff() <= problem_.upper() + slack;
  if (def <= 1e-10 && inside) return x_new;
  return std::nullopt;
}

Matrix RomModel::project_relaxed(const Matrix& q_r, const Matrix& d_r) const {
  const Matrix x = q_r + d_r;
  const Matrix lifted = lift(x);
  if (problem_.admissible(lifted)) return d_r;
  return restrict_parameter(problem_.project_box(lifted)) - q_r;
}

RomLinearization::RomLinearization(const RomModel& rom, Matrix q_r, Matrix u_r)
    : rom_(rom), q_r_(std::move(q_r)), u_r_(std::move(u_r)) {
  b_ = rom_.B_trajectory(u_r_);
  radius_ = rom_.feasibility_radius(q_r_);
  const Index nq = rom_.n_q(), nv = rom_.n_v(), cols = rom_.cols();
  const int K = rom_.K();
  const Matrix& R = rom_.mass_factor();
  T_.resize(nv * K, nq * cols);
  Matrix e = Matrix::Zero(nq, cols);
  for (Index c = 0; c < nq * cols; ++c) {
    e(c % nq, c / nq) = 1.0;
    const Matrix ul = R * rom_.solve_linearized_primal(q_r_, b_, e);
    T_.col(c) = Eigen::Map<const Vector>(ul.data(), ul.size());
    e(c % nq, c / nq) = 0.0;
  }
  const Matrix w0 = R * (u_r_ - rom_.y_bar());
  w0_ = Eigen::Map<const Vector>(w0.data(), w0.size());
  gram_ = T_.transpose() * T_;
  tw0_ = T_.transpose() * w0_;
  w0_sq_ = w0_.squaredNorm();
}

Matrix RomLinearization::linearized_state(const Matrix& d) const {
  const Vector w = T_ * Eigen::Map<const Vector>(d.data(), d.size());
  return rom_.mass_factor().triangularView<Eigen::Upper>().solve(Eigen::Map<const Matrix>(w.data(), rom_.n_v(), rom_.K()));
}

double RomLinearization::data_term(const Matrix& d, Matrix* grad) const {
  // ||w0 + T d||^2 expanded through the Gram matrix T'T
  const Eigen::Map<const Vector> x(d.data(), d.size());
  const Vector gx = gram_ * x;
  const double dt = rom_.problem().dt();
  if (grad) {
    const Vector g = (dt / rom_.problem().parameter_weight()) * (tw0_ + gx);
    *grad = Eigen::Map<const Matrix>(g.data(), rom_.n_q(), rom_.cols());
  }
  const double sq = std::max(w0_sq_ + x.dot(2.0 * tw0_ + gx), 0.0);
  return rom_.objective_constant() + 0.5 * dt * sq;
}

std::optional<Matrix> RomLinearization::project(const Matrix& d) const {
  if (rom_.certified_feasible(radius_, d)) return d;
  std::optional<Matrix> x = rom_.project(q_r_, d);
  if (!x) return std::nullopt;
  return Matrix(*x - q_r_);
}

}  // namespace rbtr
