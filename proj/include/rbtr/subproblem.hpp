#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rbtr/fom.hpp"

namespace rbtr {

/// Linearization of the forward model at a point q, in whatever coordinates
/// the caller chooses (nodal for the full model, reduced for the ROM).
///
/// The data term is d -> 1/2 ||F(q) + F'(q) d - y||^2.
class LinearizedModel {
 public:
  virtual ~LinearizedModel() = default;

  /// Data term at shift d; fills the Riesz gradient when `grad` is non-null.
  virtual double data_term(const Matrix& d, Matrix* grad) const = 0;

  virtual double inner(const Matrix& a, const Matrix& b) const = 0;
  double norm(const Matrix& a) const { return std::sqrt(std::max(0.0, inner(a, a))); }

  /// Shift d' with q + d' the box projection of q + d, or nullopt when the
  /// projection cannot be represented (the step is then shortened).
  virtual std::optional<Matrix> project(const Matrix& d) const = 0;

  /// Best-effort projection used only to measure first-order optimality.
  virtual Matrix project_relaxed(const Matrix& d) const { return project(d).value_or(d); }

  /// Number of rows / columns of a shift.
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
};

/// Linearized Tikhonov functional
///   J~(d) = data(d) + alpha / 2 ||d - center||^2,  center = q_o - q.
struct TikhonovSubproblem {
  const LinearizedModel* model = nullptr;
  Matrix center;
  double alpha = 1.0;

  /// J~(d); optionally the Riesz gradient and the data term alone.
  double value(const Matrix& d, Matrix* grad, double* data = nullptr) const;
};

struct PgdSettings {
  int max_iterations = 10000;
  double tolerance = 1e-8;        // on ||d - P(d - g)||, relative to the initial value
  int stagnation_window = 5;      // iterations with unchanged objective
  double stagnation_tol = 1e-16;  // relative change counted as unchanged
  int nonmonotone_window = 5;
  double sufficient_decrease = 1e-12;
  int max_halvings = 60;
};

enum class PgdStop { converged, max_iterations, stagnation, line_search };
const char* to_string(PgdStop stop);

struct PgdResult {
  Matrix d;
  double value = 0.0;
  double data = 0.0;  // data term at d
  int iterations = 0;
  int evaluations = 0;
  int rejected_projections = 0;  // steps shortened because project() failed
  double optimality = 0.0;       // final ||d - P(d - g)||
  double initial_optimality = 0.0;
  PgdStop stop = PgdStop::converged;
};

/// Projected gradient descent with alternating Barzilai-Borwein steps and a
/// nonmonotone sufficient-decrease safeguard. `d0` must be feasible.
PgdResult solve_pgd(const TikhonovSubproblem& sub, const PgdSettings& settings, const Matrix& d0);

struct AlphaSettings {
  double theta = 0.4;
  double Theta = 1.95;
  double alpha_floor = 1e-14;
  int max_trials = 80;
  PgdSettings pgd;
};

struct AlphaResult {
  Matrix d;
  double alpha = 0.0;
  double data = 0.0;            // data(d), i.e. J~(d; q, 0)
  bool bracketed = false;       // theta J <= 2 data <= Theta J
  bool floor_hit = false;
  bool side_flip = false;
  int pgd_iterations = 0;
  int subproblem_solves = 0;
  std::vector<double> alpha_trace;
};

/// Doubles alpha while 2 data(d) < theta J and halves it while
/// 2 data(d) > Theta J, where J = data(0).
AlphaResult regulate_alpha(const LinearizedModel& model, const Matrix& center, double J, double alpha0,
                           const AlphaSettings& settings, const Matrix& d0);

/// Full-order linearization at q with primal state u.
class FomLinearization : public LinearizedModel {
 public:
  FomLinearization(const FomProblem& problem, const Observation& data, Matrix q, Matrix u);

  double data_term(const Matrix& d, Matrix* grad) const override;
  double inner(const Matrix& a, const Matrix& b) const override { return problem_.parameter_inner(a, b); }
  std::optional<Matrix> project(const Matrix& d) const override { return problem_.project_box(q_ + d) - q_; }
  Index rows() const override { return q_.rows(); }
  Index cols() const override { return q_.cols(); }

  const Matrix& q() const { return q_; }
  const Matrix& u() const { return u_; }

 private:
  const FomProblem& problem_;
  const Observation& data_;
  Matrix q_, u_;
};

}  // namespace rbtr
