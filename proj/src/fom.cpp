#include "rbtr/fom.hpp"

#include <cmath>
#include <numbers>

namespace rbtr {

FomProblem::FomProblem(const ProblemSpec& spec)
    : spec_(spec),
      mesh_(build_mesh(spec.cells_per_side)),
      dt_(spec.time_steps > 0 ? 1.0 / spec.time_steps : 0.0),
      affine_(mesh_, spec.kind) {
  if (spec_.time_steps < 1) throw ConfigError("the number of time steps must be positive");
  if (!(spec_.lower > 0.0) || !(spec_.upper > spec_.lower))
    throw ConfigError("admissible bounds must satisfy 0 < lower < upper");
  mass_ = assemble_mass(mesh_);
  h1_ = assemble_h1_product(mesh_);
  mass_c_ = constrain(mass_, mesh_, 0.0);
  mass_c_.prune(0.0);
  state_product_ = std::make_unique<GramOperator>(constrain(h1_, mesh_, 1.0));
  param_product_ = std::make_unique<GramOperator>(spec_.kind == Kind::reaction ? mass_ : h1_);

  // L^k = (f, phi_i) with f = 1 on interior nodes
  Vector load = mass_ * Vector::Ones(size());
  zero_boundary(mesh_, load);
  source_ = load;

  const std::size_t cap = spec_.cache_capacity > 0 ? spec_.cache_capacity : static_cast<std::size_t>(K() + 2);
  cache_ = std::make_unique<FactorizationCache<Factor>>(cap);
}

void FomProblem::set_source(const Matrix& source) {
  if (source.rows() != size() || (source.cols() != 1 && source.cols() != K()))
    throw ConfigError("source must have one or K columns of nodal values");
  source_ = source;
  zero_boundary(mesh_, source_);
}

void FomProblem::check_parameter(const Matrix& q) const {
  if (q.rows() != size() || q.cols() != parameter_columns())
    throw ConfigError("parameter has shape " + std::to_string(q.rows()) + "x" + std::to_string(q.cols()) +
                      ", expected " + std::to_string(size()) + "x" + std::to_string(parameter_columns()));
  if (!q.allFinite()) throw SolverError("parameter contains non-finite values");
}

double FomProblem::parameter_inner(const Matrix& a, const Matrix& b) const {
  const Matrix mb = param_product_->apply(b);
  return parameter_weight() * (a.array() * mb.array()).sum();
}

double FomProblem::parameter_norm(const Matrix& a) const { return std::sqrt(std::max(0.0, parameter_inner(a, a))); }

double FomProblem::state_trajectory_norm(const Matrix& v) const {
  const Matrix mv = state_product_->apply(v);
  return std::sqrt(std::max(0.0, dt_ * (v.array() * mv.array()).sum()));
}

Observation FomProblem::make_observation(const Matrix& y) const {
  if (y.rows() != size() || y.cols() != K()) throw ConfigError("observation must be N x K");
  Observation obs;
  obs.y = y;
  obs.cy = mass_ * y;
  zero_boundary(mesh_, obs.cy);
  const Matrix my = mass_ * y;
  obs.c1 = 0.5 * dt_ * (y.array() * my.array()).sum();
  return obs;
}

std::shared_ptr<const FomProblem::Factor> FomProblem::factor_for(const Vector& qk) const {
  return cache_->get(qk, [&]() {
    SparseMatrix system = affine_.evaluate(qk);
    system += (1.0 / dt_) * mass_c_;
    auto f = std::make_shared<Factor>(system);
    if (f->info() != Eigen::Success) throw SolverError("factorization of the time-step matrix failed");
    return std::shared_ptr<const Factor>(f);
  });
}

Vector FomProblem::solve_step(const Factor& f, const Vector& rhs) const {
  Vector x = f.solve(rhs);
  if (f.info() != Eigen::Success || !x.allFinite()) throw SolverError("time-step solve failed");
  return x;
}

Matrix FomProblem::solve_primal(const Matrix& q) const {
  check_parameter(q);
  ++counters_->primal;
  Matrix u(size(), K());
  Vector prev = Vector::Zero(size());
  for (int k = 0; k < K(); ++k) {
    const auto f = factor_for(parameter_at(q, k));
    const Vector rhs = source_at(k) + (1.0 / dt_) * (mass_c_ * prev);
    prev = solve_step(*f, rhs);
    u.col(k) = prev;
  }
  return u;
}

Matrix FomProblem::solve_adjoint(const Matrix& q, const Matrix& u, const Observation& data) const {
  check_parameter(q);
  ++counters_->adjoint;
  Matrix p(size(), K());
  Vector next = Vector::Zero(size());
  for (int k = K() - 1; k >= 0; --k) {
    const auto f = factor_for(parameter_at(q, k));
    const Vector rhs = -(mass_c_ * u.col(k)) + data.cy.col(k) + (1.0 / dt_) * (mass_c_ * next);
    next = solve_step(*f, rhs);
    p.col(k) = next;
  }
  return p;
}

Matrix FomProblem::solve_linearized_primal(const Matrix& q, const Matrix& u, const Matrix& d) const {
  check_parameter(q);
  check_parameter(d);
  ++counters_->lin_primal;
  Matrix ul(size(), K());
  Vector prev = Vector::Zero(size());
  for (int k = 0; k < K(); ++k) {
    const auto f = factor_for(parameter_at(q, k));
    const Vector rhs = (1.0 / dt_) * (mass_c_ * prev) - affine_.apply_linear(parameter_at(d, k), u.col(k));
    prev = solve_step(*f, rhs);
    ul.col(k) = prev;
  }
  return ul;
}

Matrix FomProblem::solve_linearized_adjoint(const Matrix& q, const Matrix& u, const Matrix& u_lin,
                                            const Observation& data) const {
  check_parameter(q);
  ++counters_->lin_adjoint;
  Matrix pl(size(), K());
  Vector next = Vector::Zero(size());
  for (int k = K() - 1; k >= 0; --k) {
    const auto f = factor_for(parameter_at(q, k));
    // -C u_lin + (Cy - C u)
    const Vector rhs = -(mass_c_ * (u_lin.col(k) + u.col(k))) + data.cy.col(k) + (1.0 / dt_) * (mass_c_ * next);
    next = solve_step(*f, rhs);
    pl.col(k) = next;
  }
  return pl;
}

double FomProblem::objective_from_state(const Matrix& u, const Observation& data) const {
  const Matrix cu = mass_c_ * u;
  const double quad = 0.5 * (u.array() * cu.array()).sum();
  const double lin = (u.array() * data.cy.array()).sum();
  return data.c1 + dt_ * (quad - lin);
}

double FomProblem::misfit_direct(const Matrix& u, const Observation& data) const {
  const Matrix r = u - data.y;
  const Matrix mr = mass_ * r;
  return 0.5 * dt_ * (r.array() * mr.array()).sum();
}

double FomProblem::objective(const Matrix& q, const Observation& data) const {
  return misfit_direct(solve_primal(q), data);
}

Matrix FomProblem::gradient_covector(const Matrix& u, const Matrix& p) const {
  Matrix g = Matrix::Zero(size(), parameter_columns());
  for (int k = 0; k < K(); ++k) {
    const Vector bk = affine_.apply_B_transpose(u.col(k), p.col(k));
    if (stationary())
      g.col(0) += dt_ * bk;
    else
      g.col(k) = bk;
  }
  return g;
}

Matrix FomProblem::gradient_from_states(const Matrix& u, const Matrix& p) const {
  return param_product_->solve(gradient_covector(u, p));
}

Matrix FomProblem::gradient(const Matrix& q, const Observation& data) const {
  const Matrix u = solve_primal(q);
  const Matrix p = solve_adjoint(q, u, data);
  return gradient_from_states(u, p);
}

FomEvaluation FomProblem::evaluate(const Matrix& q, const Observation& data, bool with_gradient) const {
  FomEvaluation ev;
  ev.q = q;
  ev.u = solve_primal(q);
  ev.J = misfit_direct(ev.u, data);
  if (with_gradient) {
    ev.p = solve_adjoint(q, ev.u, data);
    ev.gradient = gradient_from_states(ev.u, ev.p);
  }
  return ev;
}

Matrix FomProblem::apply_B(const Matrix& u, const Matrix& d) const {
  Matrix out(size(), K());
  for (int k = 0; k < K(); ++k) out.col(k) = affine_.apply_linear(parameter_at(d, k), u.col(k));
  return out;
}

Matrix FomProblem::project_box(const Matrix& q) const { return q.cwiseMax(lower()).cwiseMin(upper()); }

bool FomProblem::admissible(const Matrix& q) const {
  return q.allFinite() && q.minCoeff() >= lower() && q.maxCoeff() <= upper();
}

double FomProblem::coercivity_constant(const Matrix& q) const {
  if (kind() == Kind::reaction) return 1.0;
  const double a = q.minCoeff();
  if (!(a > 0.0)) throw SolverError("diffusion coefficient is not positive; coercivity lost");
  return a;
}

SolveCounts FomProblem::counts() const {
  return {counters_->primal.load(), counters_->adjoint.load(), counters_->lin_primal.load(), counters_->lin_adjoint.load()};
}

void FomProblem::reset_counts() {
  counters_->primal = 0;
  counters_->adjoint = 0;
  counters_->lin_primal = 0;
  counters_->lin_adjoint = 0;
}

// ---------------------------------------------------------------------------

RunSetup run_setup(int run_id) {
  switch (run_id) {
    case 1: return {1, Kind::reaction, true};
    case 2: return {2, Kind::diffusion, true};
    case 3: return {3, Kind::reaction, false};
    case 4: return {4, Kind::diffusion, false};
    default: throw ConfigError("unknown run id " + std::to_string(run_id) + " (expected 1..4)");
  }
}

double gaussian_bumps(double x, double y) {
  const double amp = 1.0 / (0.02 * std::numbers::pi);
  auto bump = [&](double s) {
    const double a = (s * x - 0.5) / 0.1, b = (s * y - 0.5) / 0.1;
    return amp * std::exp(-0.5 * (a * a + b * b));
  };
  return bump(2.0) + bump(0.8);
}

double inclusion_indicator(double x, double y) {
  constexpr double tol = 1e-12;
  auto in = [&](double v, double lo, double hi) { return v >= lo / 30.0 - tol && v <= hi / 30.0 + tol; };
  const bool omega1 = (in(x, 5, 9) && in(y, 3, 27)) || (in(x, 9, 27) && (in(y, 3, 7) || in(y, 23, 27)));
  const double dx = x - 18.0 / 30.0, dy = y - 15.0 / 30.0;
  const bool omega2 = std::sqrt(dx * dx + dy * dy) < 4.0 / 30.0 - tol;
  return (omega1 ? 1.0 : 0.0) - (omega2 ? 1.0 : 0.0);
}

Matrix exact_parameter(int run_id, const Mesh& mesh, int K) {
  const RunSetup setup = run_setup(run_id);
  const double background = 3.0;
  const Vector shape = (setup.kind == Kind::reaction)
                           ? mesh.interpolate(gaussian_bumps)
                           : Vector(2.0 * mesh.interpolate(inclusion_indicator));
  if (setup.stationary) return (Vector::Constant(mesh.num_nodes(), background) + shape).eval();
  Matrix q(mesh.num_nodes(), K);
  for (int k = 0; k < K; ++k) {
    const double t = static_cast<double>(k + 1) / K;
    q.col(k) = Vector::Constant(mesh.num_nodes(), background) + std::sin(std::numbers::pi * t) * shape;
  }
  return q;
}

Matrix UniformStream::matrix(Index rows, Index cols) {
  Matrix m(rows, cols);
  // column-major fill: node index fastest, then time step
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = next();
  return m;
}

Observation make_noisy_data(const FomProblem& problem, const Matrix& q_exact, double delta, std::uint64_t seed) {
  if (delta < 0.0) throw ConfigError("noise level must be nonnegative");
  const Matrix u = problem.solve_primal(q_exact);
  Matrix y = u;  // the observation of u is its L2 embedding
  if (delta > 0.0) {
    UniformStream rng(seed);
    Matrix xi;
    double norm = 0.0;
    for (int attempt = 0; attempt < 8 && !(norm > 0.0); ++attempt) {
      xi = rng.matrix(problem.size(), problem.K());
      const Matrix mx = problem.h1_product() * xi;
      norm = std::sqrt(problem.dt() * (xi.array() * mx.array()).sum());
    }
    if (!(norm > 0.0)) throw SolverError("could not draw a nonzero noise sample");
    y += (delta / norm) * xi;
  }
  return problem.make_observation(y);
}

}  // namespace rbtr
