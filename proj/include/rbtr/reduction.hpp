#pragma once

#include <vector>

#include "rbtr/fom.hpp"

namespace rbtr {

struct PodResult {
  Matrix modes;            // M-orthonormal columns
  Vector singular_values;  // of the weighted snapshot matrix, all of them
  double error_squared = 0.0;  // sum of squared singular values dropped
};

/// POD of the snapshot columns in the M inner product: the fewest modes whose
/// span leaves a squared projection error below eps^2.
///
/// Computed from a thin SVD of L^T P S (P M P^T = L L^T), which keeps
/// singular values far below sqrt(machine eps) * sigma_1 accurate.
PodResult pod(const Matrix& snapshots, const GramOperator& M, double eps);

/// Two-level hierarchical POD: each chunk is compressed with tolerance
/// eps / (2 sqrt(#chunks)), the scaled leaf modes are compressed again with
/// eps / 2. The total squared error stays below eps^2. A single chunk reduces
/// to pod().
PodResult hapod(const std::vector<Matrix>& chunks, const GramOperator& M, double eps);

/// Appends the parts of `vectors` that are M-orthogonal to `basis`
/// (Gram-Schmidt applied twice), dropping vectors whose remainder is below
/// `relative_tol` times their norm. Existing columns are never touched.
/// Returns the number of columns added.
int orthogonalize_extend(Matrix& basis, const Matrix& vectors, const GramOperator& M, double relative_tol = 1e-10);

/// max |B' M B - I|.
double orthonormality_defect(const Matrix& basis, const GramOperator& M);

/// Parameter basis (M_Q-orthonormal) and state basis (M_V-orthonormal).
struct Bases {
  Matrix q;
  Matrix v;
};

struct EnrichCounts {
  int q_added = 0;
  int v_added = 0;
};

/// Psi_Q = HaPOD{q_o, q0, grad J_h(q0)} with q0 appended; Psi_V = HaPOD{u(q0), p(q0)}.
/// Trajectories contribute one snapshot per column.
Bases init_bases(const FomProblem& problem, const FomEvaluation& at_q0, const Matrix& q_center, double eps);

/// Extension after an accepted step: the gradient (directly when the
/// parameter is stationary, through POD otherwise) and the new iterate go into
/// Psi_Q, POD modes of {u, p} go into Psi_V.
EnrichCounts enrich_after_acceptance(const FomProblem& problem, Bases& bases, const FomEvaluation& at_new, double eps);

enum class FailureKind { not_in_trust_region, agc_decay };
const char* to_string(FailureKind kind);

/// Extension after a failed trust-region start: the lifted iterate
/// (not_in_trust_region) or the gradient (agc_decay) into Psi_Q, {u, p} into Psi_V.
EnrichCounts enrich_on_failure(const FomProblem& problem, Bases& bases, FailureKind kind, const FomEvaluation& at_q,
                               double eps);

}  // namespace rbtr
