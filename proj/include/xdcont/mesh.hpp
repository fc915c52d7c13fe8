#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace xdcont {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class DomainKind { interval, rectangle };

/// Axis-aligned computational domain. The rectangle defaults to being centred
/// at the origin, so a 1x4 rectangle is [-0.5,0.5]x[-2,2].
struct DomainSpec {
  DomainKind kind = DomainKind::interval;
  double lx = 1.0;
  double ly = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;

  static DomainSpec interval(double length, double offset = 0.0);
  static DomainSpec rectangle(double lx, double ly);
  static DomainSpec rectangle(double lx, double ly, double x0, double y0);

  int dim() const { return kind == DomainKind::interval ? 1 : 2; }
  double measure() const;
  void validate() const;
};

std::string to_string(DomainKind kind);
DomainKind domain_kind_from_string(const std::string& name);

/// P1 mesh of segments (1D) or triangles (2D). Immutable after construction.
///
/// Rectangle node ordering is x-fastest: node i*nx + j sits at
/// (x0 + j*hx, y0 + i*hy), so node 0 is the lower-left corner.
class Mesh {
 public:
  Mesh(DomainSpec domain, std::vector<double> coords,
       std::vector<int> connectivity, int nx, int ny);

  const DomainSpec& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  int vertices_per_element() const { return dim() + 1; }
  int node_count() const { return node_count_; }
  int element_count() const { return element_count_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }

  double x(int node) const { return coords_[node * dim()]; }
  double y(int node) const { return dim() == 2 ? coords_[node * 2 + 1] : 0.0; }
  int vertex(int element, int local) const {
    return connectivity_[element * vertices_per_element() + local];
  }
  double element_measure(int element) const { return measures_[element]; }
  const std::vector<double>& element_measures() const { return measures_; }

  /// Gradient of local basis function `local` on `element`, component `axis`.
  double basis_gradient(int element, int local, int axis) const {
    return gradients_[(element * vertices_per_element() + local) * dim() + axis];
  }

  /// Local stiffness entry  ∫_e ∇φ_a·∇φ_b  for unit coefficient.
  double unit_stiffness(int element, int a, int b) const;

  const std::vector<double>& coords() const { return coords_; }
  const std::vector<int>& connectivity() const { return connectivity_; }

  /// Node index of the mirror image under x -> x0 + lx - (x - x0).
  int mirror_x(int node) const;

 private:
  DomainSpec domain_;
  std::vector<double> coords_;
  std::vector<int> connectivity_;
  std::vector<double> measures_;
  std::vector<double> gradients_;
  int node_count_ = 0;
  int element_count_ = 0;
  int nx_ = 0;
  int ny_ = 0;
};

Mesh build_interval_mesh(double length, int n, double offset = 0.0);
Mesh build_rectangle_mesh(const DomainSpec& spec, int nx, int ny);
Mesh build_mesh(const DomainSpec& spec, int nx, int ny);

/// Element-wise coefficient: either one value broadcast to every element or
/// one value per element.
class Coefficient {
 public:
  Coefficient(double value) : scalar_(value), is_scalar_(true) {}  // NOLINT
  Coefficient(Vector values) : values_(std::move(values)) {}        // NOLINT

  bool is_scalar() const { return is_scalar_; }
  double operator[](int element) const {
    return is_scalar_ ? scalar_ : values_[element];
  }
  void check(const Mesh& mesh, const char* what) const;

 private:
  double scalar_ = 0.0;
  Vector values_;
  bool is_scalar_ = false;
};

/// Per-element arithmetic mean of the vertex values.
Vector point_to_center(const Mesh& mesh, const Vector& nodal);

struct AssembledOperators {
  SparseMatrix stiffness;
  SparseMatrix mass;
  Vector load;
};

SparseMatrix assemble_stiffness(const Mesh& mesh, const Coefficient& c);
SparseMatrix assemble_mass(const Mesh& mesh, const Coefficient& a);
/// Load vector of the P1 interpolant of `f`, i.e. M f.
Vector assemble_load(const Mesh& mesh, const Vector& f);

/// K_ij = ∫ c ∇φ_i·∇φ_j, M_ij = ∫ a φ_i φ_j, F_i = ∫ f φ_i. Homogeneous
/// Neumann conditions are natural, so no boundary rows are modified.
AssembledOperators assemble(const Mesh& mesh, const Coefficient& c,
                            const Coefficient& a, const Vector& f);

/// Eigenvalues of K x = λ M x for the unit-coefficient Neumann Laplacian,
/// ascending. Dense; intended for meshes up to a few thousand nodes.
std::vector<double> discrete_laplace_spectrum(const Mesh& mesh, int count);

void write_mesh_snapshot(std::ostream& out, const Mesh& mesh);
Mesh read_mesh_snapshot(std::istream& in);

}  // namespace xdcont
