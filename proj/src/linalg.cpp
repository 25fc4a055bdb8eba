#include "rbtr/linalg.hpp"

#include <cmath>
#include <cstring>

namespace rbtr {

GramOperator::GramOperator(SparseMatrix matrix)
    : matrix_(std::move(matrix)), factor_(std::make_shared<Eigen::SimplicialLLT<SparseMatrix>>()) {
  if (matrix_.rows() != matrix_.cols()) throw ConfigError("Gram matrix must be square");
  matrix_.makeCompressed();
  factor_->compute(matrix_);
  if (factor_->info() != Eigen::Success)
    throw SolverError("Cholesky factorization of Gram matrix failed (not positive definite)");
}

double GramOperator::inner(const Vector& a, const Vector& b) const { return a.dot(matrix_ * b); }

double GramOperator::norm(const Vector& a) const { return std::sqrt(std::max(0.0, inner(a, a))); }

Matrix GramOperator::solve(const Matrix& rhs) const {
  Matrix z = factor_->solve(rhs);
  if (factor_->info() != Eigen::Success) throw SolverError("Gram solve failed");
  return z;
}

double GramOperator::dual_norm_squared(const Vector& r) const {
  Vector y = factor_->permutationP() * r;
  factor_->matrixL().solveInPlace(y);
  return y.squaredNorm();
}

Matrix GramOperator::weight(const Matrix& x) const {
  Matrix px = factor_->permutationP() * x;
  return factor_->matrixU() * px;
}

Matrix GramOperator::unweight(const Matrix& y) const {
  Matrix z = y;
  factor_->matrixU().solveInPlace(z);
  return factor_->permutationPinv() * z;
}

std::uint64_t hash_values(const double* data, Index size) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(data);
  const std::size_t n = static_cast<std::size_t>(size) * sizeof(double);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace rbtr
