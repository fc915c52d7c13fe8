#include "xdcont/mesh.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "xdcont/error.hpp"

namespace xdcont {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::singular_parameters: return "singular-parameters";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::no_start: return "no-start";
    case ErrorCode::step_failure: return "step-failure";
    case ErrorCode::degenerate_point: return "degenerate-point";
    case ErrorCode::invalid_bracket: return "invalid-bracket";
    case ErrorCode::switch_failure: return "switch-failure";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::validation_error: return "validation-error";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

DomainSpec DomainSpec::interval(double length, double offset) {
  DomainSpec spec;
  spec.kind = DomainKind::interval;
  spec.lx = length;
  spec.x0 = offset;
  return spec;
}

DomainSpec DomainSpec::rectangle(double lx, double ly) {
  return rectangle(lx, ly, -0.5 * lx, -0.5 * ly);
}

DomainSpec DomainSpec::rectangle(double lx, double ly, double x0, double y0) {
  DomainSpec spec;
  spec.kind = DomainKind::rectangle;
  spec.lx = lx;
  spec.ly = ly;
  spec.x0 = x0;
  spec.y0 = y0;
  return spec;
}

double DomainSpec::measure() const {
  return kind == DomainKind::interval ? lx : lx * ly;
}

void DomainSpec::validate() const {
  require(lx > 0.0, "domain: Lx must be positive");
  if (kind == DomainKind::rectangle) require(ly > 0.0, "domain: Ly must be positive");
}

std::string to_string(DomainKind kind) {
  return kind == DomainKind::interval ? "interval" : "rectangle";
}

DomainKind domain_kind_from_string(const std::string& name) {
  if (name == "interval") return DomainKind::interval;
  if (name == "rectangle") return DomainKind::rectangle;
  fail(ErrorCode::invalid_argument, "unknown domain kind '" + name + "'");
}

Mesh::Mesh(DomainSpec domain, std::vector<double> coords,
           std::vector<int> connectivity, int nx, int ny)
    : domain_(domain),
      coords_(std::move(coords)),
      connectivity_(std::move(connectivity)),
      nx_(nx),
      ny_(ny) {
  const int d = dim();
  const int nv = vertices_per_element();
  require(coords_.size() % d == 0, "mesh: coordinate array size");
  require(connectivity_.size() % nv == 0, "mesh: connectivity array size");
  node_count_ = static_cast<int>(coords_.size()) / d;
  element_count_ = static_cast<int>(connectivity_.size()) / nv;

  std::vector<int> touched(node_count_, 0);
  for (int v : connectivity_) {
    require(v >= 0 && v < node_count_, "mesh: element vertex index out of range");
    touched[v] = 1;
  }
  for (int t : touched) require(t == 1, "mesh: node not attached to any element");

  measures_.resize(element_count_);
  gradients_.resize(static_cast<size_t>(element_count_) * nv * d);
  for (int e = 0; e < element_count_; ++e) {
    if (d == 1) {
      const double h = x(vertex(e, 1)) - x(vertex(e, 0));
      require(h > 0.0, "mesh: degenerate segment");
      measures_[e] = h;
      gradients_[e * 2 + 0] = -1.0 / h;
      gradients_[e * 2 + 1] = 1.0 / h;
    } else {
      const int a = vertex(e, 0), b = vertex(e, 1), c = vertex(e, 2);
      const double x1 = x(a), y1 = y(a), x2 = x(b), y2 = y(b), x3 = x(c), y3 = y(c);
      const double det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
      require(det > 0.0, "mesh: triangle must be counter-clockwise and non-degenerate");
      measures_[e] = 0.5 * det;
      // ∇φ_a = (y_b - y_c, x_c - x_b) / det, cyclically
      const double g[3][2] = {{(y2 - y3) / det, (x3 - x2) / det},
                              {(y3 - y1) / det, (x1 - x3) / det},
                              {(y1 - y2) / det, (x2 - x1) / det}};
      for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 2; ++k) gradients_[(e * 3 + l) * 2 + k] = g[l][k];
    }
  }
}

double Mesh::unit_stiffness(int element, int a, int b) const {
  double s = 0.0;
  for (int k = 0; k < dim(); ++k)
    s += basis_gradient(element, a, k) * basis_gradient(element, b, k);
  return s * measures_[element];
}

int Mesh::mirror_x(int node) const {
  if (dim() == 1) return node_count_ - 1 - node;
  const int row = node / nx_;
  const int col = node % nx_;
  return row * nx_ + (nx_ - 1 - col);
}

Mesh build_interval_mesh(double length, int n, double offset) {
  require(n >= 2, "interval mesh needs at least 2 nodes");
  require(length > 0.0, "interval length must be positive");
  std::vector<double> coords(n);
  const double h = length / (n - 1);
  for (int i = 0; i < n; ++i) coords[i] = offset + h * i;
  coords[n - 1] = offset + length;
  std::vector<int> conn;
  conn.reserve(2 * (n - 1));
  for (int i = 0; i + 1 < n; ++i) {
    conn.push_back(i);
    conn.push_back(i + 1);
  }
  return Mesh(DomainSpec::interval(length, offset), std::move(coords),
              std::move(conn), n, 1);
}

Mesh build_rectangle_mesh(const DomainSpec& spec, int nx, int ny) {
  require(spec.kind == DomainKind::rectangle, "rectangle mesh needs a rectangle domain");
  spec.validate();
  require(nx >= 2 && ny >= 2, "rectangle mesh needs at least 2 nodes per edge");
  const double hx = spec.lx / (nx - 1);
  const double hy = spec.ly / (ny - 1);
  std::vector<double> coords;
  coords.reserve(2 * nx * ny);
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < nx; ++j) {
      coords.push_back(j == nx - 1 ? spec.x0 + spec.lx : spec.x0 + hx * j);
      coords.push_back(i == ny - 1 ? spec.y0 + spec.ly : spec.y0 + hy * i);
    }
  }
  std::vector<int> conn;
  conn.reserve(6 * (nx - 1) * (ny - 1));
  for (int i = 0; i + 1 < ny; ++i) {
    for (int j = 0; j + 1 < nx; ++j) {
      const int ll = i * nx + j, lr = ll + 1, ul = ll + nx, ur = ul + 1;
      // split along the lower-left to upper-right diagonal
      conn.insert(conn.end(), {ll, lr, ur});
      conn.insert(conn.end(), {ll, ur, ul});
    }
  }
  return Mesh(spec, std::move(coords), std::move(conn), nx, ny);
}

Mesh build_mesh(const DomainSpec& spec, int nx, int ny) {
  spec.validate();
  if (spec.kind == DomainKind::interval) return build_interval_mesh(spec.lx, nx, spec.x0);
  return build_rectangle_mesh(spec, nx, ny);
}

void Coefficient::check(const Mesh& mesh, const char* what) const {
  if (is_scalar_) return;
  if (values_.size() != mesh.element_count())
    fail(ErrorCode::invalid_argument,
         std::string(what) + ": expected one value per element");
}

Vector point_to_center(const Mesh& mesh, const Vector& nodal) {
  require(nodal.size() == mesh.node_count(), "point_to_center: nodal vector size");
  const int nv = mesh.vertices_per_element();
  Vector out(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    double s = 0.0;
    for (int l = 0; l < nv; ++l) s += nodal[mesh.vertex(e, l)];
    out[e] = s / nv;
  }
  return out;
}

namespace {

// Exact P1 mass matrix entry on an element of measure |e|:
// 1D: |e|/6 * (2 on diagonal, 1 off), 2D: |e|/12 * (2, 1).
double p1_mass(const Mesh& mesh, int e, int a, int b) {
  const double m = mesh.element_measure(e);
  if (mesh.dim() == 1) return m / 6.0 * (a == b ? 2.0 : 1.0);
  return m / 12.0 * (a == b ? 2.0 : 1.0);
}

}  // namespace

SparseMatrix assemble_stiffness(const Mesh& mesh, const Coefficient& c) {
  c.check(mesh, "stiffness coefficient");
  const int nv = mesh.vertices_per_element();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(mesh.element_count()) * nv * nv);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const double ce = c[e];
    for (int a = 0; a < nv; ++a)
      for (int b = 0; b < nv; ++b)
        trips.emplace_back(mesh.vertex(e, a), mesh.vertex(e, b),
                           ce * mesh.unit_stiffness(e, a, b));
  }
  SparseMatrix k(mesh.node_count(), mesh.node_count());
  k.setFromTriplets(trips.begin(), trips.end());
  return k;
}

SparseMatrix assemble_mass(const Mesh& mesh, const Coefficient& a) {
  a.check(mesh, "mass coefficient");
  const int nv = mesh.vertices_per_element();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(mesh.element_count()) * nv * nv);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const double ae = a[e];
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j)
        trips.emplace_back(mesh.vertex(e, i), mesh.vertex(e, j),
                           ae * p1_mass(mesh, e, i, j));
  }
  SparseMatrix m(mesh.node_count(), mesh.node_count());
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

Vector assemble_load(const Mesh& mesh, const Vector& f) {
  require(f.size() == mesh.node_count(), "load: nodal source size");
  const int nv = mesh.vertices_per_element();
  Vector out = Vector::Zero(mesh.node_count());
  for (int e = 0; e < mesh.element_count(); ++e)
    for (int i = 0; i < nv; ++i) {
      double s = 0.0;
      for (int j = 0; j < nv; ++j) s += p1_mass(mesh, e, i, j) * f[mesh.vertex(e, j)];
      out[mesh.vertex(e, i)] += s;
    }
  return out;
}

AssembledOperators assemble(const Mesh& mesh, const Coefficient& c,
                            const Coefficient& a, const Vector& f) {
  return {assemble_stiffness(mesh, c), assemble_mass(mesh, a), assemble_load(mesh, f)};
}

std::vector<double> discrete_laplace_spectrum(const Mesh& mesh, int count) {
  const Eigen::MatrixXd k = Eigen::MatrixXd(assemble_stiffness(mesh, 1.0));
  const Eigen::MatrixXd m = Eigen::MatrixXd(assemble_mass(mesh, 1.0));
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(k, m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    fail(ErrorCode::invalid_argument, "discrete_laplace_spectrum: eigensolver failed");
  const Vector& ev = solver.eigenvalues();
  std::vector<double> out;
  for (int i = 0; i < ev.size() && static_cast<int>(out.size()) < count; ++i)
    out.push_back(std::max(0.0, ev[i]));
  return out;
}

void write_mesh_snapshot(std::ostream& out, const Mesh& mesh) {
  const auto& d = mesh.domain();
  out << std::setprecision(17);
  out << "# xdcont mesh\n";
  out << "kind " << to_string(d.kind) << "\n";
  out << "domain " << d.lx << ' ' << d.ly << ' ' << d.x0 << ' ' << d.y0 << "\n";
  out << "grid " << mesh.nx() << ' ' << mesh.ny() << "\n";
  out << "nodes " << mesh.node_count() << "\n";
  for (int i = 0; i < mesh.node_count(); ++i) {
    out << mesh.x(i);
    if (mesh.dim() == 2) out << ' ' << mesh.y(i);
    out << "\n";
  }
  out << "elements " << mesh.element_count() << "\n";
  for (int e = 0; e < mesh.element_count(); ++e) {
    for (int l = 0; l < mesh.vertices_per_element(); ++l)
      out << (l ? " " : "") << mesh.vertex(e, l);
    out << "\n";
  }
}

namespace {

void expect_token(std::istream& in, const std::string& token) {
  std::string got;
  if (!(in >> got) || got != token)
    fail(ErrorCode::parse_error, "mesh snapshot: expected '" + token + "', got '" + got + "'");
}

}  // namespace

Mesh read_mesh_snapshot(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (line.rfind("# xdcont mesh", 0) != 0)
    fail(ErrorCode::parse_error, "mesh snapshot: missing header");
  std::string kind;
  expect_token(in, "kind");
  in >> kind;
  DomainSpec d;
  d.kind = domain_kind_from_string(kind);
  expect_token(in, "domain");
  in >> d.lx >> d.ly >> d.x0 >> d.y0;
  int nx = 0, ny = 0, nn = 0, ne = 0;
  expect_token(in, "grid");
  in >> nx >> ny;
  expect_token(in, "nodes");
  in >> nn;
  std::vector<double> coords(static_cast<size_t>(nn) * d.dim());
  for (auto& c : coords) in >> c;
  expect_token(in, "elements");
  in >> ne;
  std::vector<int> conn(static_cast<size_t>(ne) * (d.dim() + 1));
  for (auto& v : conn) in >> v;
  if (!in) fail(ErrorCode::parse_error, "mesh snapshot: truncated");
  return Mesh(d, std::move(coords), std::move(conn), nx, ny);
}

}  // namespace xdcont
