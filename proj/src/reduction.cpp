#include "rbtr/reduction.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace rbtr {

namespace {

// singular values below this fraction of the largest are treated as zero
constexpr double rank_cutoff = 1e-14;

// Truncated SVD of a weighted (Euclidean) matrix: returns U_r Sigma_r and
// the dropped squared energy.
struct Truncation {
  Matrix scaled;  // U_r * Sigma_r
  Matrix left;    // U_r
  Vector sigma;
  double dropped = 0.0;
};

Truncation truncate(const Matrix& w, double eps) {
  Truncation t;
  if (w.cols() == 0 || w.rows() == 0) {
    t.scaled = Matrix(w.rows(), 0);
    t.left = t.scaled;
    return t;
  }
  Eigen::BDCSVD<Matrix> svd(w, Eigen::ComputeThinU);
  t.sigma = svd.singularValues();
  const Index m = t.sigma.size();
  // tail[r] = sum_{i >= r} sigma_i^2
  Vector tail = Vector::Zero(m + 1);
  for (Index i = m - 1; i >= 0; --i) tail[i] = tail[i + 1] + t.sigma[i] * t.sigma[i];
  const double floor = m > 0 ? rank_cutoff * t.sigma[0] : 0.0;
  Index r = 0;
  while (r < m && tail[r] >= eps * eps && t.sigma[r] > floor) ++r;
  t.dropped = tail[r];
  t.left = svd.matrixU().leftCols(r);
  t.scaled = t.left * t.sigma.head(r).asDiagonal();
  return t;
}

}  // namespace

PodResult pod(const Matrix& snapshots, const GramOperator& M, double eps) {
  if (!(eps > 0.0)) throw ConfigError("POD tolerance must be positive");
  if (!snapshots.allFinite()) throw SolverError("non-finite snapshot");
  const Truncation t = truncate(M.weight(snapshots), eps);
  return {M.unweight(t.left), t.sigma, t.dropped};
}

PodResult hapod(const std::vector<Matrix>& chunks, const GramOperator& M, double eps) {
  if (!(eps > 0.0)) throw ConfigError("POD tolerance must be positive");
  if (chunks.size() == 1) return pod(chunks.front(), M, eps);
  const double leaf_eps = eps / (2.0 * std::sqrt(static_cast<double>(chunks.size())));
  std::vector<Matrix> leaves;
  Index total = 0;
  double dropped = 0.0;
  for (const Matrix& c : chunks) {
    if (!c.allFinite()) throw SolverError("non-finite snapshot");
    Truncation t = truncate(M.weight(c), leaf_eps);
    dropped += t.dropped;
    total += t.scaled.cols();
    leaves.push_back(std::move(t.scaled));
  }
  Matrix stacked(M.size(), total);
  Index col = 0;
  for (const Matrix& l : leaves) {
    stacked.middleCols(col, l.cols()) = l;
    col += l.cols();
  }
  const Truncation root = truncate(stacked, 0.5 * eps);
  // error bound by the triangle inequality, reported squared
  const double bound = std::sqrt(dropped) + std::sqrt(root.dropped);
  return {M.unweight(root.left), root.sigma, bound * bound};
}

int orthogonalize_extend(Matrix& basis, const Matrix& vectors, const GramOperator& M, double relative_tol) {
  int added = 0;
  for (Index j = 0; j < vectors.cols(); ++j) {
    Vector r = vectors.col(j);
    const double n0 = M.norm(r);
    if (!(n0 > 0.0)) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (basis.cols() == 0) break;
      r -= basis * (basis.transpose() * (M.matrix() * r));
    }
    const double n = M.norm(r);
    if (!(n > relative_tol * n0)) continue;
    basis.conservativeResize(vectors.rows(), basis.cols() + 1);
    basis.col(basis.cols() - 1) = r / n;
    ++added;
  }
  return added;
}

double orthonormality_defect(const Matrix& basis, const GramOperator& M) {
  if (basis.cols() == 0) return 0.0;
  const Matrix g = basis.transpose() * (M.matrix() * basis);
  return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

namespace {

int extend_with_pod(Matrix& basis, const std::vector<Matrix>& chunks, const GramOperator& M, double eps) {
  return orthogonalize_extend(basis, hapod(chunks, M, eps).modes, M);
}

// Snapshots vanish on the boundary, but modes with small singular values pick
// up rounding there; over many enrichments those directions would enter the
// basis. Zeroing the boundary rows is the M_V-orthogonal projection onto V_h.
int extend_state(const FomProblem& problem, Matrix& basis, const std::vector<Matrix>& chunks, double eps) {
  Matrix modes = hapod(chunks, problem.state_product(), eps).modes;
  zero_boundary(problem.mesh(), modes);
  return orthogonalize_extend(basis, modes, problem.state_product());
}

}  // namespace

Bases init_bases(const FomProblem& problem, const FomEvaluation& at_q0, const Matrix& q_center, double eps) {
  if (at_q0.u.size() == 0 || at_q0.p.size() == 0 || at_q0.gradient.size() == 0)
    throw ConfigError("initial bases need the state, adjoint and gradient at q0");
  Bases b;
  b.q = Matrix(problem.size(), 0);
  b.v = Matrix(problem.size(), 0);
  extend_with_pod(b.q, {q_center, at_q0.q, at_q0.gradient}, problem.parameter_product(), eps);
  orthogonalize_extend(b.q, at_q0.q, problem.parameter_product());
  extend_state(problem, b.v, {at_q0.u, at_q0.p}, eps);
  return b;
}

EnrichCounts enrich_after_acceptance(const FomProblem& problem, Bases& bases, const FomEvaluation& at_new,
                                     double eps) {
  EnrichCounts c;
  const GramOperator& mq = problem.parameter_product();
  if (problem.stationary())
    c.q_added += orthogonalize_extend(bases.q, at_new.gradient, mq);
  else
    c.q_added += extend_with_pod(bases.q, {at_new.gradient}, mq, eps);
  c.q_added += orthogonalize_extend(bases.q, at_new.q, mq);
  c.v_added += extend_state(problem, bases.v, {at_new.u, at_new.p}, eps);
  return c;
}

const char* to_string(FailureKind kind) {
  return kind == FailureKind::not_in_trust_region ? "not_in_trust_region" : "agc_decay";
}

EnrichCounts enrich_on_failure(const FomProblem& problem, Bases& bases, FailureKind kind, const FomEvaluation& at_q,
                               double eps) {
  EnrichCounts c;
  const GramOperator& mq = problem.parameter_product();
  if (kind == FailureKind::agc_decay)
    c.q_added += extend_with_pod(bases.q, {at_q.gradient}, mq, eps);
  else
    c.q_added += extend_with_pod(bases.q, {at_q.q}, mq, eps);
  c.v_added += extend_state(problem, bases.v, {at_q.u, at_q.p}, eps);
  return c;
}

}  // namespace rbtr
