#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <random>

#include "rbtr/grid_fem.hpp"
#include "rbtr/linalg.hpp"

namespace rbtr {

/// Discretization choices of one parabolic identification problem.
struct ProblemSpec {
  Kind kind = Kind::reaction;
  int cells_per_side = 300;
  int time_steps = 50;     // K, with dt = 1 / K on (0, 1)
  bool stationary = true;  // parameter constant in time
  double lower = 1e-3;     // admissible box [lower, upper]
  double upper = 1e3;
  std::size_t cache_capacity = 0;  // factorizations kept; 0 selects K + 2
};

/// Measured data y (nodal values, one column per time step) together with
/// the derived right-hand sides Cy^k = M_H y^k (boundary rows removed) and the
/// constant c1 = dt * sum_k y^k' M_H y^k / 2.
struct Observation {
  Matrix y;
  Matrix cy;
  double c1 = 0.0;
};

/// Counts of full-order trajectory solves.
struct SolveCounts {
  long primal = 0;
  long adjoint = 0;
  long linearized_primal = 0;
  long linearized_adjoint = 0;
  long total() const { return primal + adjoint + linearized_primal + linearized_adjoint; }
};

/// Primal state, adjoint state, objective and gradient at one parameter.
struct FomEvaluation {
  Matrix q;
  Matrix u;
  Matrix p;
  double J = 0.0;
  Matrix gradient;
};

/// Full-order model: Q1 in space, implicit Euler in time, Dirichlet boundary,
/// source f = 1, observation = L2 embedding.
///
/// Parameters are N x 1 (stationary) or N x K matrices, trajectories are
/// N x K matrices whose column k - 1 holds time step k. The zero initial state
/// and the zero terminal adjoint are implicit.
class FomProblem {
 public:
  explicit FomProblem(const ProblemSpec& spec);

  const ProblemSpec& spec() const { return spec_; }
  const Mesh& mesh() const { return mesh_; }
  Kind kind() const { return spec_.kind; }
  bool stationary() const { return spec_.stationary; }
  int K() const { return spec_.time_steps; }
  double dt() const { return dt_; }
  Index size() const { return mesh_.num_nodes(); }
  double lower() const { return spec_.lower; }
  double upper() const { return spec_.upper; }

  /// Number of parameter columns (1 or K).
  Index parameter_columns() const { return stationary() ? 1 : K(); }

  /// Time weight of the parameter inner product: dt for trajectories, 1 for
  /// stationary parameters.
  double parameter_weight() const { return stationary() ? 1.0 : dt_; }

  /// Norm of the observation operator from V to the observation space.
  double observation_norm() const { return 1.0; }

  const AffineOperator& affine() const { return affine_; }
  const SparseMatrix& mass() const { return mass_; }                      // M_H on all nodes
  const SparseMatrix& mass_constrained() const { return mass_c_; }        // M_H on V_h, also C_h
  const SparseMatrix& h1_product() const { return h1_; }                  // unconstrained H1 product
  const GramOperator& state_product() const { return *state_product_; }   // M_V on V_h
  const GramOperator& parameter_product() const { return *param_product_; }  // M_Q

  /// Source vectors L^k; one column (constant in time) or K columns.
  const Matrix& source() const { return source_; }
  Vector source_at(int k) const { return source_.cols() == 1 ? Vector(source_.col(0)) : Vector(source_.col(k)); }
  void set_source(const Matrix& source);

  /// Parameter column used at (0-based) time step k.
  Vector parameter_at(const Matrix& q, int k) const { return q.col(stationary() ? 0 : k); }
  Matrix constant_parameter(double value) const {
    return Matrix::Constant(size(), parameter_columns(), value);
  }
  void check_parameter(const Matrix& q) const;

  /// Time-weighted inner product of parameter trajectories.
  double parameter_inner(const Matrix& a, const Matrix& b) const;
  double parameter_norm(const Matrix& a) const;

  /// Time-weighted V_h inner product of state trajectories (dt sum of M_V).
  double state_trajectory_norm(const Matrix& v) const;

  Observation make_observation(const Matrix& y) const;

  Matrix solve_primal(const Matrix& q) const;
  Matrix solve_adjoint(const Matrix& q, const Matrix& u, const Observation& data) const;
  Matrix solve_linearized_primal(const Matrix& q, const Matrix& u, const Matrix& d) const;
  Matrix solve_linearized_adjoint(const Matrix& q, const Matrix& u, const Matrix& u_lin,
                                  const Observation& data) const;

  /// J through the expansion c1 + dt sum (u'C u / 2 - u'Cy).
  double objective_from_state(const Matrix& u, const Observation& data) const;
  /// J through dt/2 sum ||u - y||^2 in the full mass matrix.
  double misfit_direct(const Matrix& u, const Observation& data) const;

  /// J_h(q), evaluated in the direct form.
  double objective(const Matrix& q, const Observation& data) const;

  /// Unweighted covector sum: columns B(u^k)' p^k, or dt sum_k B(u^k)' p^k
  /// when stationary.
  Matrix gradient_covector(const Matrix& u, const Matrix& p) const;

  /// Riesz representative in the parameter inner product.
  Matrix gradient_from_states(const Matrix& u, const Matrix& p) const;
  Matrix gradient(const Matrix& q, const Observation& data) const;

  FomEvaluation evaluate(const Matrix& q, const Observation& data, bool with_gradient) const;

  /// Applies sum_k B(u^k) d^k column-wise: result column k is B(u^k) d^k.
  Matrix apply_B(const Matrix& u, const Matrix& d) const;

  Matrix project_box(const Matrix& q) const;
  bool admissible(const Matrix& q) const;

  /// Coercivity constant: 1 for reaction, min nodal value over all columns for
  /// diffusion.
  double coercivity_constant(const Matrix& q) const;

  SolveCounts counts() const;
  void reset_counts();

 private:
  using Factor = Eigen::SimplicialLDLT<SparseMatrix>;
  std::shared_ptr<const Factor> factor_for(const Vector& qk) const;
  Vector solve_step(const Factor& f, const Vector& rhs) const;

  ProblemSpec spec_;
  Mesh mesh_;
  double dt_;
  AffineOperator affine_;
  SparseMatrix mass_, mass_c_, h1_;
  std::unique_ptr<GramOperator> state_product_, param_product_;
  Matrix source_;
  mutable std::unique_ptr<FactorizationCache<Factor>> cache_;
  struct Counters {
    std::atomic<long> primal{0}, adjoint{0}, lin_primal{0}, lin_adjoint{0};
  };
  std::unique_ptr<Counters> counters_ = std::make_unique<Counters>();
};

/// Configuration of the four benchmark runs.
struct RunSetup {
  int run_id;
  Kind kind;
  bool stationary;
};
RunSetup run_setup(int run_id);

/// Nodal interpolant of the reference parameter of run 1..4 (N x 1 for runs 1
/// and 2, N x K for runs 3 and 4 evaluated at t^k = k / K).
Matrix exact_parameter(int run_id, const Mesh& mesh, int K);

/// Sum of two Gaussian bumps of amplitude 1/(0.02 pi) used by runs 1 and 3.
double gaussian_bumps(double x, double y);
/// chi_Omega1 - chi_Omega2 used by runs 2 and 4.
double inclusion_indicator(double x, double y);

/// Noisy data y = C u_exact + delta xi / ||xi||, xi uniform on [-1, 1] per node
/// and step, the norm being the dt-weighted H1 trajectory norm.
Observation make_noisy_data(const FomProblem& problem, const Matrix& q_exact, double delta,
                            std::uint64_t seed);

/// Uniform [-1, 1] samples. The engine output is fixed by the standard; the
/// bits are mapped to doubles by hand because std::uniform_real_distribution
/// differs between standard libraries.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : engine_(seed) {}
  double next() { return 2.0 * static_cast<double>(engine_() >> 11) * 0x1.0p-53 - 1.0; }
  Matrix matrix(Index rows, Index cols);

 private:
  std::mt19937_64 engine_;
};

}  // namespace rbtr
