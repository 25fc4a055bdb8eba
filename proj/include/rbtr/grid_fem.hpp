#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <vector>

#include "rbtr/types.hpp"

namespace rbtr {

enum class Kind { reaction, diffusion };

const char* to_string(Kind kind);
Kind kind_from_string(const std::string& name);

/// Uniform quadrilateral grid on (0,1)^2 with (n+1)^2 nodes numbered
/// row-major: node = iy * (n + 1) + ix, located at (ix / n, iy / n).
class Mesh {
 public:
  explicit Mesh(int cells_per_side);

  int cells_per_side() const { return n_; }
  Index nodes_per_side() const { return n_ + 1; }
  Index num_nodes() const { return (n_ + 1) * static_cast<Index>(n_ + 1); }
  Index num_cells() const { return static_cast<Index>(n_) * n_; }
  double h() const { return 1.0 / n_; }

  double x(Index node) const { return static_cast<double>(node % (n_ + 1)) / n_; }
  double y(Index node) const { return static_cast<double>(node / (n_ + 1)) / n_; }

  bool is_boundary(Index node) const { return boundary_[static_cast<std::size_t>(node)] != 0; }
  const std::vector<char>& boundary_mask() const { return boundary_; }
  Index boundary_count() const;

  /// Cell nodes in counterclockwise order starting at the lower-left corner.
  std::array<Index, 4> cell_nodes(Index cell) const;

  /// Nodal interpolant of f(x, y).
  template <typename F>
  Vector interpolate(F&& f) const {
    Vector v(num_nodes());
    for (Index i = 0; i < num_nodes(); ++i) v[i] = f(x(i), y(i));
    return v;
  }

 private:
  int n_;
  std::vector<char> boundary_;
};

/// Validated mesh construction; the smallest accepted mesh has 2 cells per side.
Mesh build_mesh(int cells_per_side);

/// Exact integrals of products of the bilinear shape functions on the unit
/// reference cell, with local node order (0,0), (1,0), (1,1), (0,1).
///   mass[c][a][b]  = int phi_c phi_a phi_b
///   stiff[c][a][b] = int phi_c grad phi_a . grad phi_b
/// and the coefficient-free versions mass2, stiff2.
struct LocalTensors {
  double mass[4][4][4];
  double stiff[4][4][4];
  double mass2[4][4];
  double stiff2[4][4];
};

const LocalTensors& reference_tensors();

/// Local element matrices of a square cell with side h.
Eigen::Matrix4d local_mass(double h);
Eigen::Matrix4d local_stiffness(double h);

/// L2 Gram matrix on all nodes (no boundary treatment).
SparseMatrix assemble_mass(const Mesh& mesh);

/// Stiffness matrix int c grad(v) . grad(w), with c the Q1 interpolant of the
/// nodal coefficient; c = 1 when `coefficient` is null.
SparseMatrix assemble_stiffness(const Mesh& mesh, const Vector* coefficient = nullptr);

/// Mass plus stiffness (full H1 product) on all nodes.
SparseMatrix assemble_h1_product(const Mesh& mesh);

/// Zeroes the rows and columns of boundary nodes and puts `diagonal` on their
/// diagonal entries.
SparseMatrix constrain(const SparseMatrix& matrix, const Mesh& mesh, double diagonal);

/// Zeroes boundary entries of a nodal vector.
void zero_boundary(const Mesh& mesh, Vector& v);
void zero_boundary(const Mesh& mesh, Matrix& v);

/// Parameter-affine operator A(q) = A_0 + sum_j q_j A_j for one of the two
/// coefficient problems, with homogeneous Dirichlet rows constrained.
///
/// A_0 holds the q-independent part and the identity on boundary rows. The
/// components A_j (weighted by the j-th nodal basis function) have boundary
/// rows and columns removed. All evaluations reuse one sparsity pattern.
class AffineOperator {
 public:
  AffineOperator(const Mesh& mesh, Kind kind);

  Kind kind() const { return kind_; }
  const Mesh& mesh() const { return mesh_; }
  Index size() const { return mesh_.num_nodes(); }

  const SparseMatrix& constant_part() const { return a0_; }

  /// A(q) = A_0 + linear_part(q).
  SparseMatrix evaluate(const Vector& q) const;

  /// sum_j q_j A_j.
  SparseMatrix linear_part(const Vector& q) const;

  /// A_j, assembled on first use and cached.
  const SparseMatrix& component(Index j) const;

  /// A(q) u without assembling a matrix.
  Vector apply(const Vector& q, const Vector& u) const;

  /// (sum_j d_j A_j) u = B(u) d.
  Vector apply_linear(const Vector& d, const Vector& u) const;

  /// B(u)^T p, the covector of d -> p^T B(u) d.
  Vector apply_B_transpose(const Vector& u, const Vector& p) const;

  /// B(u) with B(u)_{ij} = (A_j u)_i.
  SparseMatrix assemble_B(const Vector& u) const;

 private:
  double local(int c, int a, int b) const { return tensor_[(c * 4 + a) * 4 + b]; }

  Mesh mesh_;
  Kind kind_;
  std::array<double, 64> tensor_{};  // scaled local tensor of the coefficient form
  SparseMatrix pattern_;
  std::vector<std::array<Index, 16>> slots_;  // value index of local pair (a, b) per cell
  SparseMatrix a0_;
  mutable std::vector<std::unique_ptr<SparseMatrix>> components_;
  mutable std::unique_ptr<std::mutex> components_mutex_ = std::make_unique<std::mutex>();
};

AffineOperator assemble_reaction_affine(const Mesh& mesh);
AffineOperator assemble_diffusion_affine(const Mesh& mesh);

/// Free-function form of AffineOperator::assemble_B.
SparseMatrix assemble_B(const AffineOperator& op, const Vector& u);

}  // namespace rbtr
