#include "rbtr/grid_fem.hpp"

#include <cmath>

namespace rbtr {

const char* to_string(Kind kind) { return kind == Kind::reaction ? "reaction" : "diffusion"; }

Kind kind_from_string(const std::string& name) {
  if (name == "reaction") return Kind::reaction;
  if (name == "diffusion") return Kind::diffusion;
  throw ConfigError("unknown problem kind '" + name + "' (expected reaction or diffusion)");
}

Mesh::Mesh(int cells_per_side) : n_(cells_per_side) {
  if (n_ < 1) throw ConfigError("a mesh needs at least one cell per side");
  boundary_.assign(static_cast<std::size_t>(num_nodes()), 0);
  for (Index i = 0; i < num_nodes(); ++i) {
    const Index ix = i % (n_ + 1), iy = i / (n_ + 1);
    if (ix == 0 || iy == 0 || ix == n_ || iy == n_) boundary_[static_cast<std::size_t>(i)] = 1;
  }
}

Index Mesh::boundary_count() const {
  Index c = 0;
  for (char b : boundary_) c += b;
  return c;
}

std::array<Index, 4> Mesh::cell_nodes(Index cell) const {
  const Index cx = cell % n_, cy = cell / n_;
  const Index n0 = cy * (n_ + 1) + cx;
  return {n0, n0 + 1, n0 + n_ + 2, n0 + n_ + 1};
}

Mesh build_mesh(int cells_per_side) {
  if (cells_per_side < 2)
    throw ConfigError("cells_per_side must be at least 2, got " + std::to_string(cells_per_side));
  return Mesh(cells_per_side);
}

namespace {

// shape functions on the reference cell and their gradients
double shape(int a, double s, double t) {
  switch (a) {
    case 0: return (1 - s) * (1 - t);
    case 1: return s * (1 - t);
    case 2: return s * t;
    default: return (1 - s) * t;
  }
}

Eigen::Vector2d shape_grad(int a, double s, double t) {
  switch (a) {
    case 0: return {-(1 - t), -(1 - s)};
    case 1: return {1 - t, -s};
    case 2: return {t, s};
    default: return {-t, 1 - s};
  }
}

LocalTensors compute_tensors() {
  // 3-point Gauss-Legendre on [0,1] integrates degree 5 per direction exactly
  const double r = std::sqrt(0.6) / 2;
  const double pts[3] = {0.5 - r, 0.5, 0.5 + r};
  const double wts[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  LocalTensors t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double s = pts[i], u = pts[j], w = wts[i] * wts[j];
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const double pp = shape(a, s, u) * shape(b, s, u);
          const double gg = shape_grad(a, s, u).dot(shape_grad(b, s, u));
          t.mass2[a][b] += w * pp;
          t.stiff2[a][b] += w * gg;
          for (int c = 0; c < 4; ++c) {
            const double pc = shape(c, s, u);
            t.mass[c][a][b] += w * pc * pp;
            t.stiff[c][a][b] += w * pc * gg;
          }
        }
    }
  return t;
}

template <typename LocalFn>
SparseMatrix assemble_cells(const Mesh& mesh, LocalFn&& local) {
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(mesh.num_cells()) * 16);
  for (Index cell = 0; cell < mesh.num_cells(); ++cell) {
    const auto nodes = mesh.cell_nodes(cell);
    const Eigen::Matrix4d m = local(nodes);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) trips.emplace_back(nodes[a], nodes[b], m(a, b));
  }
  SparseMatrix out(mesh.num_nodes(), mesh.num_nodes());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace

const LocalTensors& reference_tensors() {
  static const LocalTensors t = compute_tensors();
  return t;
}

Eigen::Matrix4d local_mass(double h) {
  Eigen::Matrix4d m;
  const auto& t = reference_tensors();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) m(a, b) = h * h * t.mass2[a][b];
  return m;
}

Eigen::Matrix4d local_stiffness(double /*h*/) {
  // scale invariant in two dimensions
  Eigen::Matrix4d m;
  const auto& t = reference_tensors();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) m(a, b) = t.stiff2[a][b];
  return m;
}

SparseMatrix assemble_mass(const Mesh& mesh) {
  const Eigen::Matrix4d m = local_mass(mesh.h());
  return assemble_cells(mesh, [&](const std::array<Index, 4>&) { return m; });
}

SparseMatrix assemble_stiffness(const Mesh& mesh, const Vector* coefficient) {
  if (coefficient == nullptr) {
    const Eigen::Matrix4d k = local_stiffness(mesh.h());
    return assemble_cells(mesh, [&](const std::array<Index, 4>&) { return k; });
  }
  if (coefficient->size() != mesh.num_nodes())
    throw ConfigError("stiffness coefficient has " + std::to_string(coefficient->size()) +
                      " values, mesh has " + std::to_string(mesh.num_nodes()) + " nodes");
  const auto& t = reference_tensors();
  return assemble_cells(mesh, [&](const std::array<Index, 4>& nodes) {
    Eigen::Matrix4d k = Eigen::Matrix4d::Zero();
    for (int c = 0; c < 4; ++c) {
      const double qc = (*coefficient)[nodes[c]];
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) k(a, b) += qc * t.stiff[c][a][b];
    }
    return k;
  });
}

SparseMatrix assemble_h1_product(const Mesh& mesh) {
  SparseMatrix m = assemble_mass(mesh) + assemble_stiffness(mesh);
  m.makeCompressed();
  return m;
}

SparseMatrix constrain(const SparseMatrix& matrix, const Mesh& mesh, double diagonal) {
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(matrix.nonZeros()));
  for (Index col = 0; col < matrix.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(matrix, col); it; ++it)
      if (!mesh.is_boundary(it.row()) && !mesh.is_boundary(it.col()))
        trips.emplace_back(it.row(), it.col(), it.value());
  for (Index i = 0; i < mesh.num_nodes(); ++i)
    if (mesh.is_boundary(i)) trips.emplace_back(i, i, diagonal);
  SparseMatrix out(matrix.rows(), matrix.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

void zero_boundary(const Mesh& mesh, Vector& v) {
  for (Index i = 0; i < v.size(); ++i)
    if (mesh.is_boundary(i)) v[i] = 0.0;
}

void zero_boundary(const Mesh& mesh, Matrix& v) {
  for (Index i = 0; i < v.rows(); ++i)
    if (mesh.is_boundary(i)) v.row(i).setZero();
}

// ---------------------------------------------------------------------------

AffineOperator::AffineOperator(const Mesh& mesh, Kind kind) : mesh_(mesh), kind_(kind) {
  const Index n = mesh_.num_nodes();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(mesh_.num_cells()) * 16);
  for (Index cell = 0; cell < mesh_.num_cells(); ++cell) {
    const auto nodes = mesh_.cell_nodes(cell);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) trips.emplace_back(nodes[a], nodes[b], 0.0);
  }
  pattern_.resize(n, n);
  pattern_.setFromTriplets(trips.begin(), trips.end());
  pattern_.makeCompressed();

  auto find_slot = [&](Index row, Index col) {
    const auto* inner = pattern_.innerIndexPtr();
    const auto* outer = pattern_.outerIndexPtr();
    for (Index s = outer[col]; s < outer[col + 1]; ++s)
      if (inner[s] == row) return s;
    throw Error("sparsity pattern lookup failed");
  };
  slots_.resize(static_cast<std::size_t>(mesh_.num_cells()));
  for (Index cell = 0; cell < mesh_.num_cells(); ++cell) {
    const auto nodes = mesh_.cell_nodes(cell);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) slots_[static_cast<std::size_t>(cell)][a * 4 + b] = find_slot(nodes[a], nodes[b]);
  }

  const auto& t = reference_tensors();
  const double h2 = mesh_.h() * mesh_.h();
  for (int c = 0; c < 4; ++c)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        tensor_[(c * 4 + a) * 4 + b] = kind_ == Kind::reaction ? h2 * t.mass[c][a][b] : t.stiff[c][a][b];

  a0_ = pattern_;
  double* v = a0_.valuePtr();
  if (kind_ == Kind::reaction) {
    for (Index cell = 0; cell < mesh_.num_cells(); ++cell) {
      const auto nodes = mesh_.cell_nodes(cell);
      for (int a = 0; a < 4; ++a) {
        if (mesh_.is_boundary(nodes[a])) continue;
        for (int b = 0; b < 4; ++b)
          if (!mesh_.is_boundary(nodes[b])) v[slots_[static_cast<std::size_t>(cell)][a * 4 + b]] += t.stiff2[a][b];
      }
    }
  }
  for (Index i = 0; i < n; ++i)
    if (mesh_.is_boundary(i)) a0_.coeffRef(i, i) = 1.0;

  components_.resize(static_cast<std::size_t>(n));
}

SparseMatrix AffineOperator::linear_part(const Vector& q) const {
  if (q.size() != size()) throw ConfigError("parameter vector has wrong size");
  SparseMatrix out = pattern_;
  double* v = out.valuePtr();
  for (Index cell = 0; cell < mesh_.num_cells(); ++cell) {
    const auto nodes = mesh_.cell_nodes(cell);
    const auto& slot = slots_[static_cast<std::size_t>(cell)];
    for (int a = 0; a < 4; ++a) {
      if (mesh_.is_boundary(nodes[a])) continue;
      for (int b = 0; b < 4; ++b) {
        if (mesh_.is_boundary(nodes[b])) continue;
        double s = 0.0;
        for (int c = 0; c < 4; ++c) s += q[nodes[c]] * local(c, a, b);
        v[slot[a * 4 + b]] += s;
      }
    }
  }
  return out;
}

SparseMatrix AffineOperator::evaluate(const Vector& q) const {
  SparseMatrix out = linear_part(q);
  Eigen::Map<Vector>(out.valuePtr(), out.nonZeros()) += Eigen::Map<const Vector>(a0_.valuePtr(), a0_.nonZeros());
  return out;
}

const SparseMatrix& AffineOperator::component(Index j) const {
  if (j < 0 || j >= size()) throw ConfigError("affine component index out of range");
  std::lock_guard<std::mutex> lock(*components_mutex_);
  auto& slot = components_[static_cast<std::size_t>(j)];
  if (!slot) {
    Vector e = Vector::Zero(size());
    e[j] = 1.0;
    slot = std::make_unique<SparseMatrix>(linear_part(e));
    slot->prune(0.0);
  }
  return *slot;
}

Vector AffineOperator::apply_linear(const Vector& d, const Vector& u) const {
  Vector out = Vector::Zero(size());
  for (Index cell = 0; cell < mesh_.num_cells(); ++cell) {
    const auto nodes = mesh_.cell_nodes(cell);
    for (int a = 0; a < 4; ++a) {
      if (mesh_.is_boundary(nodes[a])) continue;
      double acc = 0.0;
      for (int b = 0; b < 4; ++b) {
        if (mesh_.is_boundary(nodes[b])) continue;
        double s = 0.0;
        for (int c = 0; c < 4; ++c) s += d[nodes[c]] * local(c, a, b);
        acc += s * u[nodes[b]];
      }
      out[nodes[a]] += acc;
    }
  }
  return out;
}

Vector AffineOperator::apply(const Vector& q, const Vector& u) const {
  return a0_ * u + apply_linear(q, u);
}

Vector AffineOperator::apply_B_transpose(const Vector& u, const Vector& p) const {
  Vector out = Vector::Zero(size());
  for (Index cell = 0; cell < mesh_.num_cells(); ++cell) {
    const auto nodes = mesh_.cell_nodes(cell);
    double pa[4], ub[4];
    for (int a = 0; a < 4; ++a) {
      const bool bnd = mesh_.is_boundary(nodes[a]);
      pa[a] = bnd ? 0.0 : p[nodes[a]];
      ub[a] = bnd ? 0.0 : u[nodes[a]];
    }
    for (int c = 0; c < 4; ++c) {
      double s = 0.0;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) s += local(c, a, b) * pa[a] * ub[b];
      out[nodes[c]] += s;
    }
  }
  return out;
}

SparseMatrix AffineOperator::assemble_B(const Vector& u) const {
  if (u.size() != size()) throw ConfigError("state vector has wrong size");
  SparseMatrix out = pattern_;
  double* v = out.valuePtr();
  for (Index cell = 0; cell < mesh_.num_cells(); ++cell) {
    const auto nodes = mesh_.cell_nodes(cell);
    const auto& slot = slots_[static_cast<std::size_t>(cell)];
    for (int a = 0; a < 4; ++a) {
      if (mesh_.is_boundary(nodes[a])) continue;
      for (int c = 0; c < 4; ++c) {
        double s = 0.0;
        for (int b = 0; b < 4; ++b)
          if (!mesh_.is_boundary(nodes[b])) s += local(c, a, b) * u[nodes[b]];
        v[slot[a * 4 + c]] += s;
      }
    }
  }
  return out;
}

AffineOperator assemble_reaction_affine(const Mesh& mesh) { return AffineOperator(mesh, Kind::reaction); }

AffineOperator assemble_diffusion_affine(const Mesh& mesh) { return AffineOperator(mesh, Kind::diffusion); }

SparseMatrix assemble_B(const AffineOperator& op, const Vector& u) { return op.assemble_B(u); }

}  // namespace rbtr
