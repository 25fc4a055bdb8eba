#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <utility>

#include "rbtr/types.hpp"

namespace rbtr {

/// Symmetric positive definite Gram matrix of an inner product together with
/// its sparse Cholesky factorization P M P^T = L L^T.
///
/// The factorization is computed once on construction and shared by every
/// Riesz solve, dual norm and weighting operation. All const members are safe
/// to call concurrently.
class GramOperator {
 public:
  explicit GramOperator(SparseMatrix matrix);

  const SparseMatrix& matrix() const { return matrix_; }
  Index size() const { return matrix_.rows(); }

  double inner(const Vector& a, const Vector& b) const;
  double norm(const Vector& a) const;

  /// Applies M to each column.
  Matrix apply(const Matrix& x) const { return matrix_ * x; }

  /// Riesz representative: solves M z = r column-wise.
  Matrix solve(const Matrix& rhs) const;

  /// r^T M^{-1} r computed as ||L^{-1} P r||^2.
  double dual_norm_squared(const Vector& r) const;

  /// Maps x to L^T P x, so that Euclidean inner products of weighted vectors
  /// equal M-inner products of the originals.
  Matrix weight(const Matrix& x) const;

  /// Inverse of weight().
  Matrix unweight(const Matrix& y) const;

 private:
  SparseMatrix matrix_;
  std::shared_ptr<Eigen::SimplicialLLT<SparseMatrix>> factor_;
};

/// FNV-1a hash of the raw bytes of a vector.
std::uint64_t hash_values(const double* data, Index size);

/// Thread-safe bounded LRU cache mapping a parameter column (compared
/// bitwise) to an immutable factorization.
template <typename Factor>
class FactorizationCache {
 public:
  explicit FactorizationCache(std::size_t capacity) : capacity_(capacity) {}

  /// Returns the cached factorization for `key`, building it with `make`
  /// when absent.
  std::shared_ptr<const Factor> get(const Vector& key,
                                    const std::function<std::shared_ptr<const Factor>()>& make) {
    const std::uint64_t h = hash_values(key.data(), key.size());
    {
      std::lock_guard<std::mutex> lock(mutex_);
      for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->hash == h && it->key.size() == key.size() && it->key == key) {
          entries_.splice(entries_.begin(), entries_, it);
          ++hits_;
          return entries_.front().factor;
        }
      }
    }
    auto factor = make();
    std::lock_guard<std::mutex> lock(mutex_);
    ++misses_;
    entries_.push_front(Entry{h, key, factor});
    while (entries_.size() > capacity_) entries_.pop_back();
    return factor;
  }

  void clear() {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.clear();
  }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  struct Entry {
    std::uint64_t hash;
    Vector key;
    std::shared_ptr<const Factor> factor;
  };
  std::size_t capacity_;
  std::list<Entry> entries_;
  std::mutex mutex_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace rbtr
