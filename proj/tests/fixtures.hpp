#pragma once

// Small problem instances and bases shared by the reduced-model tests.

#include <random>

#include "oracles.hpp"
#include "rbtr/estimator.hpp"
#include "rbtr/reduction.hpp"
#include "rbtr/rom.hpp"

namespace fixture {

using namespace rbtr;

inline ProblemSpec spec(Kind kind, bool stationary, int cells, int K) {
  ProblemSpec s;
  s.kind = kind;
  s.stationary = stationary;
  s.cells_per_side = cells;
  s.time_steps = K;
  return s;
}

inline Matrix random_parameter(const FomProblem& pb, std::mt19937_64& rng, double lo, double hi) {
  return oracle::random_matrix(rng, static_cast<int>(pb.size()), static_cast<int>(pb.parameter_columns()), lo, hi);
}

// Data generated at a random parameter plus a little uniform noise.
inline Observation noisy_data(const FomProblem& pb, std::mt19937_64& rng) {
  Matrix y = pb.solve_primal(random_parameter(pb, rng, 1.0, 5.0));
  y += 1e-3 * oracle::random_matrix(rng, static_cast<int>(pb.size()), pb.K(), -1, 1);
  return pb.make_observation(y);
}

// Orthonormal bases of the whole parameter space and of V_h.
inline Bases full_bases(const FomProblem& pb) {
  Bases b;
  b.q = Matrix(pb.size(), 0);
  b.v = Matrix(pb.size(), 0);
  orthogonalize_extend(b.q, Matrix::Identity(pb.size(), pb.size()), pb.parameter_product());
  for (Index i = 0; i < pb.size(); ++i) {
    if (pb.mesh().is_boundary(i)) continue;
    Matrix e = Matrix::Zero(pb.size(), 1);
    e(i, 0) = 1.0;
    orthogonalize_extend(b.v, e, pb.state_product());
  }
  return b;
}

// Parameter basis: the constant plus `extra` random fields. State basis:
// `modes` POD modes of primal and adjoint snapshots at two random parameters.
inline Bases small_bases(const FomProblem& pb, const Observation& data, std::mt19937_64& rng, int extra, int modes) {
  Bases b;
  b.q = Matrix(pb.size(), 0);
  b.v = Matrix(pb.size(), 0);
  orthogonalize_extend(b.q, Matrix::Ones(pb.size(), 1), pb.parameter_product());
  orthogonalize_extend(b.q, oracle::random_matrix(rng, static_cast<int>(pb.size()), extra, -1, 1),
                       pb.parameter_product());
  std::vector<Matrix> snaps;
  for (int s = 0; s < 2; ++s) {
    const Matrix q = random_parameter(pb, rng, 1.5, 4.5);
    const Matrix u = pb.solve_primal(q);
    snaps.push_back(u);
    snaps.push_back(pb.solve_adjoint(q, u, data));
  }
  Matrix all(pb.size(), 0);
  for (const Matrix& s : snaps) {
    all.conservativeResize(Eigen::NoChange, all.cols() + s.cols());
    all.rightCols(s.cols()) = s;
  }
  const PodResult p = pod(all, pb.state_product(), 1e-14);
  orthogonalize_extend(b.v, p.modes.leftCols(std::min<Index>(modes, p.modes.cols())), pb.state_product());
  return b;
}

// Reduced parameter near the center coordinates whose lift stays in [lo, hi].
inline Matrix random_feasible_coordinates(const RomModel& rom, std::mt19937_64& rng, double spread) {
  const Matrix base = rom.restrict_parameter(rom.problem().constant_parameter(3.0));
  for (;;) {
    const Matrix q_r = base + spread * oracle::random_matrix(rng, static_cast<int>(rom.n_q()),
                                                             static_cast<int>(rom.cols()), -1, 1);
    const Matrix q = rom.lift(q_r);
    if (q.minCoeff() > 0.5 && q.maxCoeff() < 10.0) return q_r;
  }
}

}  // namespace fixture
