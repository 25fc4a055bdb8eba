#pragma once

// Reference implementations used only by the tests. They are written against
// global tensor-product hat functions and dense linear algebra, independently
// of the library's element tensors and sparse solvers.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double hat(double x, double xi, double h) { return std::max(0.0, 1.0 - std::abs(x - xi) / h); }

inline double dhat(double x, double xi, double h) {
  const double r = x - xi;
  if (std::abs(r) >= h) return 0.0;
  return r < 0 ? 1.0 / h : -1.0 / h;
}

struct Grid {
  int n;
  double h;
  int nodes;
  explicit Grid(int cells) : n(cells), h(1.0 / cells), nodes((cells + 1) * (cells + 1)) {}
  double x(int i) const { return static_cast<double>(i % (n + 1)) / n; }
  double y(int i) const { return static_cast<double>(i / (n + 1)) / n; }
  bool boundary(int i) const {
    const int ix = i % (n + 1), iy = i / (n + 1);
    return ix == 0 || iy == 0 || ix == n || iy == n;
  }
  double phi(int i, double px, double py) const { return hat(px, x(i), h) * hat(py, y(i), h); }
  Eigen::Vector2d grad(int i, double px, double py) const {
    return {dhat(px, x(i), h) * hat(py, y(i), h), hat(px, x(i), h) * dhat(py, y(i), h)};
  }
  // Q1 interpolant of nodal values at a point
  double field(const VectorXd& v, double px, double py) const {
    double s = 0.0;
    for (int i = 0; i < nodes; ++i) s += v[i] * phi(i, px, py);
    return s;
  }
};

// 4-point Gauss-Legendre on [0,1]
inline void gauss4(double* pts, double* wts) {
  const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
  const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
  const double wa = (18.0 + std::sqrt(30.0)) / 36.0, wb = (18.0 - std::sqrt(30.0)) / 36.0;
  const double p[4] = {-b, -a, a, b}, w[4] = {wb, wa, wa, wb};
  for (int i = 0; i < 4; ++i) {
    pts[i] = 0.5 * (p[i] + 1.0);
    wts[i] = 0.5 * w[i];
  }
}

// Integrates f(px, py) over every cell with a 4x4 Gauss rule.
inline void for_each_quadrature_point(const Grid& g, const std::function<void(double, double, double)>& f) {
  double p[4], w[4];
  gauss4(p, w);
  for (int cy = 0; cy < g.n; ++cy)
    for (int cx = 0; cx < g.n; ++cx)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          f((cx + p[i]) * g.h, (cy + p[j]) * g.h, w[i] * w[j] * g.h * g.h);
}

// Dense matrix of int c phi_i phi_j (c = 1 when null) over all nodes.
inline MatrixXd mass(const Grid& g, const VectorXd* c = nullptr) {
  MatrixXd m = MatrixXd::Zero(g.nodes, g.nodes);
  for_each_quadrature_point(g, [&](double px, double py, double w) {
    const double cv = c ? g.field(*c, px, py) : 1.0;
    std::vector<int> active;
    for (int i = 0; i < g.nodes; ++i)
      if (g.phi(i, px, py) > 0) active.push_back(i);
    for (int i : active)
      for (int j : active) m(i, j) += w * cv * g.phi(i, px, py) * g.phi(j, px, py);
  });
  return m;
}

// Dense matrix of int c grad phi_i . grad phi_j.
inline MatrixXd stiffness(const Grid& g, const VectorXd* c = nullptr) {
  MatrixXd m = MatrixXd::Zero(g.nodes, g.nodes);
  for_each_quadrature_point(g, [&](double px, double py, double w) {
    const double cv = c ? g.field(*c, px, py) : 1.0;
    std::vector<int> active;
    for (int i = 0; i < g.nodes; ++i)
      if (g.phi(i, px, py) > 0) active.push_back(i);
    for (int i : active)
      for (int j : active) m(i, j) += w * cv * g.grad(i, px, py).dot(g.grad(j, px, py));
  });
  return m;
}

// Zero boundary rows and columns and put `diag` on the boundary diagonal.
inline MatrixXd constrain(const Grid& g, MatrixXd m, double diag) {
  for (int i = 0; i < g.nodes; ++i)
    if (g.boundary(i)) {
      m.row(i).setZero();
      m.col(i).setZero();
      m(i, i) = diag;
    }
  return m;
}

inline VectorXd zero_boundary(const Grid& g, VectorXd v) {
  for (int i = 0; i < g.nodes; ++i)
    if (g.boundary(i)) v[i] = 0.0;
  return v;
}

// Dense operator A(q) of the reaction or diffusion problem with Dirichlet rows.
inline MatrixXd operator_at(const Grid& g, bool reaction, const VectorXd& q) {
  if (reaction) return constrain(g, stiffness(g) + mass(g, &q), 1.0);
  return constrain(g, stiffness(g, &q), 1.0);
}

// Dense implicit Euler solves. Trajectory column k - 1 holds step k.
struct DenseModel {
  Grid g;
  bool reaction;
  int K;
  double dt;
  MatrixXd M, Mc;
  VectorXd L;
  DenseModel(int cells, bool is_reaction, int steps)
      : g(cells), reaction(is_reaction), K(steps), dt(1.0 / steps) {
    M = mass(g);
    Mc = constrain(g, M, 0.0);
    L = zero_boundary(g, M * VectorXd::Ones(g.nodes));
  }
  VectorXd column(const MatrixXd& q, int k) const { return q.cols() == 1 ? VectorXd(q.col(0)) : VectorXd(q.col(k)); }
  MatrixXd system(const MatrixXd& q, int k) const { return Mc / dt + operator_at(g, reaction, column(q, k)); }

  MatrixXd primal(const MatrixXd& q) const {
    MatrixXd u(g.nodes, K);
    VectorXd prev = VectorXd::Zero(g.nodes);
    for (int k = 0; k < K; ++k) {
      prev = system(q, k).partialPivLu().solve(L + Mc * prev / dt);
      u.col(k) = prev;
    }
    return u;
  }
  // B(u) d = (A(d) - A(0)) u
  VectorXd apply_b(const VectorXd& d, const VectorXd& u) const {
    return (operator_at(g, reaction, d) - operator_at(g, reaction, VectorXd::Zero(g.nodes))) * u;
  }
  MatrixXd linearized_primal(const MatrixXd& q, const MatrixXd& u, const MatrixXd& d) const {
    MatrixXd ul(g.nodes, K);
    VectorXd prev = VectorXd::Zero(g.nodes);
    for (int k = 0; k < K; ++k) {
      prev = system(q, k).partialPivLu().solve(Mc * prev / dt - apply_b(column(d, k), u.col(k)));
      ul.col(k) = prev;
    }
    return ul;
  }
  // backward recursion with right-hand sides rhs.col(k)
  MatrixXd backward(const MatrixXd& q, const MatrixXd& rhs) const {
    MatrixXd p(g.nodes, K);
    VectorXd next = VectorXd::Zero(g.nodes);
    for (int k = K - 1; k >= 0; --k) {
      next = system(q, k).transpose().partialPivLu().solve(rhs.col(k) + Mc * next / dt);
      p.col(k) = next;
    }
    return p;
  }
  MatrixXd cy(const MatrixXd& y) const {
    MatrixXd c = M * y;
    for (int i = 0; i < g.nodes; ++i)
      if (g.boundary(i)) c.row(i).setZero();
    return c;
  }
  MatrixXd adjoint(const MatrixXd& q, const MatrixXd& u, const MatrixXd& y) const {
    return backward(q, -Mc * u + cy(y));
  }
  double misfit(const MatrixXd& u, const MatrixXd& y) const {
    double s = 0.0;
    for (int k = 0; k < K; ++k) {
      const VectorXd r = u.col(k) - y.col(k);
      s += r.dot(M * r);
    }
    return 0.5 * dt * s;
  }
};

inline MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

}  // namespace oracle
