#include "rbtr/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace rbtr {

double TikhonovSubproblem::value(const Matrix& d, Matrix* grad, double* data) const {
  const double fit = model->data_term(d, grad);
  const Matrix off = d - center;
  if (grad) *grad += alpha * off;
  if (data) *data = fit;
  return fit + 0.5 * alpha * model->inner(off, off);
}

const char* to_string(PgdStop stop) {
  switch (stop) {
    case PgdStop::converged: return "converged";
    case PgdStop::max_iterations: return "max_iterations";
    case PgdStop::stagnation: return "stagnation";
    case PgdStop::line_search: return "line_search";
  }
  return "unknown";
}

PgdResult solve_pgd(const TikhonovSubproblem& sub, const PgdSettings& settings, const Matrix& d0) {
  const LinearizedModel& model = *sub.model;
  PgdResult res;
  Matrix d = d0, g;
  double data = 0.0;
  double f = sub.value(d, &g, &data);
  res.evaluations = 1;
  if (!std::isfinite(f)) throw SolverError("non-finite linearized objective");

  auto optimality = [&](const Matrix& x, const Matrix& gx) { return model.norm(x - model.project_relaxed(x - gx)); };
  const double pg0 = optimality(d, g);
  res.initial_optimality = pg0;
  res.optimality = pg0;

  std::deque<double> recent{f};
  double step = 1.0;
  bool bb1 = true;
  int unchanged = 0;
  res.stop = PgdStop::max_iterations;

  if (pg0 == 0.0) {
    res.stop = PgdStop::converged;
  } else {
    for (int it = 0; it < settings.max_iterations; ++it) {
      const double ref = *std::max_element(recent.begin(), recent.end());
      double s = step;
      bool accepted = false;
      Matrix dn, gn;
      double fn = 0.0, data_n = 0.0;
      for (int halving = 0; halving <= settings.max_halvings; ++halving, s *= 0.5) {
        std::optional<Matrix> p = model.project(d - s * g);
        if (!p) {
          ++res.rejected_projections;
          continue;
        }
        dn = std::move(*p);
        const Matrix sd = dn - d;
        fn = sub.value(dn, &gn, &data_n);
        ++res.evaluations;
        if (std::isfinite(fn) && fn <= ref - settings.sufficient_decrease * model.inner(sd, sd)) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        res.stop = PgdStop::line_search;
        break;
      }

      const Matrix sd = dn - d, yg = gn - g;
      unchanged = std::abs(fn - f) <= settings.stagnation_tol * std::max(std::abs(f), 1e-300) ? unchanged + 1 : 0;
      d = std::move(dn);
      g = std::move(gn);
      f = fn;
      data = data_n;
      ++res.iterations;
      recent.push_back(f);
      while (static_cast<int>(recent.size()) > std::max(1, settings.nonmonotone_window)) recent.pop_front();

      res.optimality = optimality(d, g);
      if (res.optimality <= settings.tolerance * pg0) {
        res.stop = PgdStop::converged;
        break;
      }
      if (unchanged >= settings.stagnation_window) {
        res.stop = PgdStop::stagnation;
        break;
      }

      const double sy = model.inner(sd, yg), ss = model.inner(sd, sd), yy = model.inner(yg, yg);
      if (sy > 0.0 && ss > 0.0 && yy > 0.0) {
        step = bb1 ? ss / sy : sy / yy;
        bb1 = !bb1;
      } else {
        step = 2.0 * s;
      }
      step = std::clamp(step, 1e-30, 1e30);
    }
  }
  res.d = std::move(d);
  res.value = f;
  res.data = data;
  return res;
}

AlphaResult regulate_alpha(const LinearizedModel& model, const Matrix& center, double J, double alpha0,
                           const AlphaSettings& settings, const Matrix& d0) {
  if (!(alpha0 > 0.0)) throw ConfigError("initial regularization parameter must be positive");
  if (!(settings.theta > 0.0 && settings.theta < settings.Theta && settings.Theta < 2.0))
    throw ConfigError("alpha bracket requires 0 < theta < Theta < 2");
  if (!std::isfinite(J)) throw SolverError("non-finite objective in alpha regulation");

  const double lo = settings.theta * J, hi = settings.Theta * J;
  auto distance = [&](double two_data) { return std::max({lo - two_data, two_data - hi, 0.0}); };

  struct Trial {
    double alpha;
    Matrix d;
    double data;
  };
  std::vector<Trial> tried;
  AlphaResult out;
  double alpha = alpha0;
  Matrix start = d0;

  auto finish = [&](const Trial& t) {
    out.d = t.d;
    out.alpha = t.alpha;
    out.data = t.data;
    out.bracketed = distance(2.0 * t.data) == 0.0;
  };

  for (int trial = 0; trial < settings.max_trials; ++trial) {
    TikhonovSubproblem sub{&model, center, alpha};
    PgdResult r = solve_pgd(sub, settings.pgd, start);
    ++out.subproblem_solves;
    out.pgd_iterations += r.iterations;
    out.alpha_trace.push_back(alpha);
    if (!std::isfinite(r.data)) throw SolverError("non-finite data term in alpha regulation");
    tried.push_back({alpha, r.d, r.data});

    const double two = 2.0 * r.data;
    if (two >= lo && two <= hi) {
      finish(tried.back());
      return out;
    }
    if (two > hi && alpha <= settings.alpha_floor) {
      finish(tried.back());
      out.floor_hit = true;
      return out;
    }
    const double next = two < lo ? 2.0 * alpha : 0.5 * alpha;
    const bool revisit = std::any_of(tried.begin(), tried.end(), [&](const Trial& t) { return t.alpha == next; });
    if (revisit) {
      const auto best = std::min_element(tried.begin(), tried.end(), [&](const Trial& a, const Trial& b) {
        return distance(2.0 * a.data) < distance(2.0 * b.data);
      });
      finish(*best);
      out.side_flip = true;
      return out;
    }
    start = r.d;
    alpha = next;
  }
  finish(tried.back());
  return out;
}

FomLinearization::FomLinearization(const FomProblem& problem, const Observation& data, Matrix q, Matrix u)
    : problem_(problem), data_(data), q_(std::move(q)), u_(std::move(u)) {}

double FomLinearization::data_term(const Matrix& d, Matrix* grad) const {
  const Matrix ul = problem_.solve_linearized_primal(q_, u_, d);
  // direct form: the expansion loses digits to cancellation once J is small
  const double value = problem_.misfit_direct(u_ + ul, data_);
  if (grad) {
    const Matrix pl = problem_.solve_linearized_adjoint(q_, u_, ul, data_);
    *grad = problem_.gradient_from_states(u_, pl);
  }
  return value;
}

}  // namespace rbtr
