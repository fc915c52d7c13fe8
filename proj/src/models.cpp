#include "xdcont/models.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>

#include <Eigen/SparseLU>

#include "xdcont/error.hpp"

namespace xdcont {

Params Params::table1(double d) {
  Params p;
  p.d1 = d;
  p.d2 = d;
  p.tie = true;
  return p;
}

const std::vector<std::string>& Params::names() {
  static const std::vector<std::string> n = {"d",  "d1", "d2", "d12", "r1", "r2", "a1",
                                             "a2", "b1", "b2", "M",   "eps"};
  return n;
}

double Params::get(std::string_view name) const {
  if (name == "d") return d1;
  if (name == "d1") return d1;
  if (name == "d2") return d2;
  if (name == "d12") return d12;
  if (name == "r1") return r1;
  if (name == "r2") return r2;
  if (name == "a1") return a1;
  if (name == "a2") return a2;
  if (name == "b1") return b1;
  if (name == "b2") return b2;
  if (name == "M") return M;
  if (name == "eps") return eps;
  fail(ErrorCode::invalid_argument, "unknown parameter '" + std::string(name) + "'");
}

void Params::set(std::string_view name, double value) {
  if (name == "d") {
    d1 = value;
    d2 = value;
    return;
  }
  if (name == "d1") {
    d1 = value;
    if (tie) d2 = value;
    return;
  }
  if (name == "d2") {
    d2 = value;
    if (tie) d1 = value;
    return;
  }
  if (name == "d12") d12 = value;
  else if (name == "r1") r1 = value;
  else if (name == "r2") r2 = value;
  else if (name == "a1") a1 = value;
  else if (name == "a2") a2 = value;
  else if (name == "b1") b1 = value;
  else if (name == "b2") b2 = value;
  else if (name == "M") M = value;
  else if (name == "eps") eps = value;
  else fail(ErrorCode::invalid_argument, "unknown parameter '" + std::string(name) + "'");
}

std::string to_string(ModelKind kind) { return kind == ModelKind::cross ? "cross" : "fast"; }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "cross") return ModelKind::cross;
  if (name == "fast") return ModelKind::fast;
  fail(ErrorCode::invalid_argument, "unknown model '" + name + "'");
}

void validate(const Params& p, ModelKind model) {
  const auto positive = [](double x, const char* name) {
    if (!(x > 0.0)) fail(ErrorCode::validation_error, std::string("params.") + name + " must be positive");
  };
  positive(p.d1, "d1");
  positive(p.d2, "d2");
  positive(p.r1, "r1");
  positive(p.r2, "r2");
  positive(p.a1, "a1");
  positive(p.a2, "a2");
  positive(p.b1, "b1");
  positive(p.b2, "b2");
  positive(p.M, "M");
  if (p.d12 < 0.0) fail(ErrorCode::validation_error, "params.d12 must be non-negative");
  if (model == ModelKind::fast) positive(p.eps, "eps");
}

CrossEquilibrium equilibrium_cross(const Params& p) {
  const double den = p.a1 * p.a2 - p.b1 * p.b2;
  if (den == 0.0) fail(ErrorCode::singular_parameters, "a1*a2 - b1*b2 vanishes");
  CrossEquilibrium eq;
  eq.u = (p.r1 * p.a2 - p.r2 * p.b1) / den;
  eq.v = (p.r2 * p.a1 - p.r1 * p.b2) / den;
  eq.admissible = eq.u > 0.0 && eq.v > 0.0;
  return eq;
}

FastEquilibrium equilibrium_fast(const Params& p) {
  const CrossEquilibrium c = equilibrium_cross(p);
  FastEquilibrium eq;
  eq.u1 = c.u * (1.0 - c.v / p.M);
  eq.u2 = c.u * c.v / p.M;
  eq.v = c.v;
  eq.admissible = c.admissible;
  return eq;
}

Vector homogeneous_fields(const Mesh& mesh, const Params& p, ModelKind model) {
  const int n = mesh.node_count();
  Vector x(components(model) * n);
  if (model == ModelKind::cross) {
    const auto eq = equilibrium_cross(p);
    x.head(n).setConstant(eq.u);
    x.tail(n).setConstant(eq.v);
  } else {
    const auto eq = equilibrium_fast(p);
    x.segment(0, n).setConstant(eq.u1);
    x.segment(n, n).setConstant(eq.u2);
    x.segment(2 * n, n).setConstant(eq.v);
  }
  return x;
}

Vector total_u(const Mesh& mesh, ModelKind model, const Vector& fields) {
  const int n = mesh.node_count();
  require(fields.size() == components(model) * n, "state size does not match mesh");
  if (model == ModelKind::cross) return fields.head(n);
  return fields.segment(0, n) + fields.segment(n, n);
}

Measures measures(const Mesh& mesh, ModelKind model, const Vector& fields) {
  return measures(mesh, assemble_mass(mesh, 1.0), model, fields);
}

Measures measures(const Mesh& mesh, const SparseMatrix& mass, ModelKind model,
                  const Vector& fields) {
  const int n = mesh.node_count();
  const Vector u = total_u(mesh, model, fields);
  Measures m;
  m.v_at_origin = fields[(components(model) - 1) * n];
  m.u_l1 = (mass * u.cwiseAbs()).sum();
  m.u_l2 = std::sqrt(std::max(0.0, u.dot(mass * u)));
  return m;
}

MeshOperators mesh_operators(const Mesh& mesh) {
  return {assemble_stiffness(mesh, 1.0), assemble_mass(mesh, 1.0)};
}

SparseMatrix block_mass(const SparseMatrix& mass, int ncomp) {
  const int n = static_cast<int>(mass.rows());
  std::vector<Triplet> trips;
  trips.reserve(mass.nonZeros() * ncomp);
  for (int c = 0; c < ncomp; ++c)
    for (int k = 0; k < mass.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(mass, k); it; ++it)
        trips.emplace_back(c * n + it.row(), c * n + it.col(), it.value());
  SparseMatrix out(ncomp * n, ncomp * n);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

namespace {

void check_size(const Mesh& mesh, const Vector& fields, int ncomp) {
  require(fields.size() == static_cast<Eigen::Index>(ncomp) * mesh.node_count(),
          "state size does not match mesh and model");
}

// trips += scale * A (block at row_off, col_off)
void add_block(std::vector<Triplet>& trips, const SparseMatrix& a, int row_off,
               int col_off, double scale) {
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it)
      trips.emplace_back(row_off + it.row(), col_off + it.col(), scale * it.value());
}

// trips += scale * M diag(g)
void add_mass_diag(std::vector<Triplet>& trips, const SparseMatrix& mass, const Vector& g,
                   int row_off, int col_off, double scale) {
  for (int k = 0; k < mass.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(mass, k); it; ++it)
      trips.emplace_back(row_off + it.row(), col_off + it.col(),
                         scale * it.value() * g[it.col()]);
}

}  // namespace

Vector residual_cross(const Mesh& mesh, const MeshOperators& ops, const Params& p,
                      const Vector& fields, ResidualInfo* info) {
  check_size(mesh, fields, 2);
  const int n = mesh.node_count();
  const int nv = mesh.vertices_per_element();
  const auto u = fields.head(n);
  const auto v = fields.tail(n);

  Vector g = Vector::Zero(2 * n);
  bool negative = false;
  double su[3], sv[3];
  for (int e = 0; e < mesh.element_count(); ++e) {
    double ubar = 0.0, vbar = 0.0;
    for (int l = 0; l < nv; ++l) {
      ubar += u[mesh.vertex(e, l)];
      vbar += v[mesh.vertex(e, l)];
    }
    ubar /= nv;
    vbar /= nv;
    const double c = p.d1 + p.d12 * vbar;
    const double ct = p.d12 * ubar;
    if (c < 0.0) negative = true;
    for (int a = 0; a < nv; ++a) {
      su[a] = 0.0;
      sv[a] = 0.0;
      for (int b = 0; b < nv; ++b) {
        const double s = mesh.unit_stiffness(e, a, b);
        su[a] += s * u[mesh.vertex(e, b)];
        sv[a] += s * v[mesh.vertex(e, b)];
      }
      g[mesh.vertex(e, a)] += c * su[a] + ct * sv[a];
      g[n + mesh.vertex(e, a)] += p.d2 * sv[a];
    }
  }
  const Vector f1 = ((p.r1 - p.a1 * u.array() - p.b1 * v.array()) * u.array()).matrix();
  const Vector f2 = ((p.r2 - p.b2 * u.array() - p.a2 * v.array()) * v.array()).matrix();
  g.head(n) -= ops.mass * f1;
  g.tail(n) -= ops.mass * f2;
  if (info) info->negative_coefficient = negative;
  return g;
}

SparseMatrix jacobian_cross(const Mesh& mesh, const MeshOperators& ops, const Params& p,
                            const Vector& fields) {
  check_size(mesh, fields, 2);
  const int n = mesh.node_count();
  const int nv = mesh.vertices_per_element();
  const auto u = fields.head(n);
  const auto v = fields.tail(n);

  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(mesh.element_count()) * nv * nv * 4 + 4 * ops.mass.nonZeros() +
                ops.stiffness.nonZeros());
  double su[3], sv[3];
  for (int e = 0; e < mesh.element_count(); ++e) {
    double ubar = 0.0, vbar = 0.0;
    for (int l = 0; l < nv; ++l) {
      ubar += u[mesh.vertex(e, l)];
      vbar += v[mesh.vertex(e, l)];
    }
    ubar /= nv;
    vbar /= nv;
    const double c = p.d1 + p.d12 * vbar;
    const double ct = p.d12 * ubar;
    for (int a = 0; a < nv; ++a) {
      su[a] = 0.0;
      sv[a] = 0.0;
      for (int b = 0; b < nv; ++b) {
        const double s = mesh.unit_stiffness(e, a, b);
        su[a] += s * u[mesh.vertex(e, b)];
        sv[a] += s * v[mesh.vertex(e, b)];
      }
    }
    for (int a = 0; a < nv; ++a) {
      const int i = mesh.vertex(e, a);
      for (int b = 0; b < nv; ++b) {
        const int j = mesh.vertex(e, b);
        const double s = mesh.unit_stiffness(e, a, b);
        // K21(v) + D_u(K12(u) v)
        trips.emplace_back(i, j, c * s + p.d12 / nv * sv[a]);
        // D_v(K21(v) u) + K12(u)
        trips.emplace_back(i, n + j, p.d12 / nv * su[a] + ct * s);
      }
    }
  }
  add_block(trips, ops.stiffness, n, n, p.d2);

  const Vector df1du = (p.r1 - 2.0 * p.a1 * u.array() - p.b1 * v.array()).matrix();
  const Vector df1dv = (-p.b1 * u.array()).matrix();
  const Vector df2du = (-p.b2 * v.array()).matrix();
  const Vector df2dv = (p.r2 - p.b2 * u.array() - 2.0 * p.a2 * v.array()).matrix();
  add_mass_diag(trips, ops.mass, df1du, 0, 0, -1.0);
  add_mass_diag(trips, ops.mass, df1dv, 0, n, -1.0);
  add_mass_diag(trips, ops.mass, df2du, n, 0, -1.0);
  add_mass_diag(trips, ops.mass, df2dv, n, n, -1.0);

  SparseMatrix jac(2 * n, 2 * n);
  jac.setFromTriplets(trips.begin(), trips.end());
  return jac;
}

Vector exchange_term(const Mesh& mesh, const Params& p, const Vector& fields) {
  check_size(mesh, fields, 3);
  const int n = mesh.node_count();
  const auto u1 = fields.segment(0, n).array();
  const auto u2 = fields.segment(n, n).array();
  const auto v = fields.segment(2 * n, n).array();
  return (u2 * (1.0 - v / p.M) - u1 * v / p.M).matrix();
}

Vector residual_fast(const Mesh& mesh, const MeshOperators& ops, const Params& p,
                     const Vector& fields) {
  check_size(mesh, fields, 3);
  require(p.eps > 0.0, "fast model requires eps > 0");
  const int n = mesh.node_count();
  const auto u1 = fields.segment(0, n).array();
  const auto u2 = fields.segment(n, n).array();
  const auto v = fields.segment(2 * n, n).array();
  const Eigen::ArrayXd total = u1 + u2;
  const Eigen::ArrayXd growth = p.r1 - p.a1 * total - p.b1 * v;
  const Eigen::ArrayXd q = exchange_term(mesh, p, fields).array() / p.eps;

  Vector g(3 * n);
  g.segment(0, n) = p.d1 * (ops.stiffness * fields.segment(0, n)) -
                    ops.mass * (growth * u1 + q).matrix();
  g.segment(n, n) = (p.d1 + p.d12 * p.M) * (ops.stiffness * fields.segment(n, n)) -
                    ops.mass * (growth * u2 - q).matrix();
  g.segment(2 * n, n) = p.d2 * (ops.stiffness * fields.segment(2 * n, n)) -
                        ops.mass * ((p.r2 - p.b2 * total - p.a2 * v) * v).matrix();
  return g;
}

SparseMatrix jacobian_fast(const Mesh& mesh, const MeshOperators& ops, const Params& p,
                           const Vector& fields) {
  check_size(mesh, fields, 3);
  require(p.eps > 0.0, "fast model requires eps > 0");
  const int n = mesh.node_count();
  const Eigen::ArrayXd u1 = fields.segment(0, n).array();
  const Eigen::ArrayXd u2 = fields.segment(n, n).array();
  const Eigen::ArrayXd v = fields.segment(2 * n, n).array();
  const Eigen::ArrayXd total = u1 + u2;
  const Eigen::ArrayXd growth = p.r1 - p.a1 * total - p.b1 * v;
  const double ie = 1.0 / p.eps;
  const double im = 1.0 / p.M;

  std::vector<Triplet> trips;
  trips.reserve(3 * ops.stiffness.nonZeros() + 9 * ops.mass.nonZeros());
  add_block(trips, ops.stiffness, 0, 0, p.d1);
  add_block(trips, ops.stiffness, n, n, p.d1 + p.d12 * p.M);
  add_block(trips, ops.stiffness, 2 * n, 2 * n, p.d2);

  const Vector f11 = (growth - p.a1 * u1 - v * im * ie).matrix();
  const Vector f12 = (-p.a1 * u1 + (1.0 - v * im) * ie).matrix();
  const Vector f13 = (-p.b1 * u1 - total * im * ie).matrix();
  const Vector f21 = (-p.a1 * u2 + v * im * ie).matrix();
  const Vector f22 = (growth - p.a1 * u2 - (1.0 - v * im) * ie).matrix();
  const Vector f23 = (-p.b1 * u2 + total * im * ie).matrix();
  const Vector f31 = (-p.b2 * v).matrix();
  const Vector f33 = (p.r2 - p.b2 * total - 2.0 * p.a2 * v).matrix();
  add_mass_diag(trips, ops.mass, f11, 0, 0, -1.0);
  add_mass_diag(trips, ops.mass, f12, 0, n, -1.0);
  add_mass_diag(trips, ops.mass, f13, 0, 2 * n, -1.0);
  add_mass_diag(trips, ops.mass, f21, n, 0, -1.0);
  add_mass_diag(trips, ops.mass, f22, n, n, -1.0);
  add_mass_diag(trips, ops.mass, f23, n, 2 * n, -1.0);
  add_mass_diag(trips, ops.mass, f31, 2 * n, 0, -1.0);
  add_mass_diag(trips, ops.mass, f31, 2 * n, n, -1.0);
  add_mass_diag(trips, ops.mass, f33, 2 * n, 2 * n, -1.0);

  SparseMatrix jac(3 * n, 3 * n);
  jac.setFromTriplets(trips.begin(), trips.end());
  return jac;
}

SteadyProblem::SteadyProblem(std::shared_ptr<const Mesh> mesh, Params params, ModelKind model,
                             std::string param_name)
    : mesh_(std::move(mesh)),
      params_(params),
      model_(model),
      param_name_(std::move(param_name)) {
  require(mesh_ != nullptr, "SteadyProblem: null mesh");
  (void)params_.get(param_name_);
  ops_ = std::make_shared<const MeshOperators>(mesh_operators(*mesh_));
  mass_block_ = std::make_shared<const SparseMatrix>(block_mass(ops_->mass, ncomp()));
}

Params SteadyProblem::params_at(double param_value) const {
  Params p = params_;
  p.set(param_name_, param_value);
  return p;
}

Vector SteadyProblem::residual(const Vector& fields, double param_value,
                               ResidualInfo* info) const {
  const Params p = params_at(param_value);
  if (model_ == ModelKind::cross) return residual_cross(*mesh_, *ops_, p, fields, info);
  if (info) info->negative_coefficient = false;
  return residual_fast(*mesh_, *ops_, p, fields);
}

SparseMatrix SteadyProblem::jacobian(const Vector& fields, double param_value) const {
  const Params p = params_at(param_value);
  if (model_ == ModelKind::cross) return jacobian_cross(*mesh_, *ops_, p, fields);
  return jacobian_fast(*mesh_, *ops_, p, fields);
}

Vector SteadyProblem::param_derivative(const Vector& fields, double param_value) const {
  const double h = 1e-4 * std::max(std::abs(param_value), 1e-2);
  return (residual(fields, param_value + h) - residual(fields, param_value - h)) / (2.0 * h);
}

Vector SteadyProblem::homogeneous(double param_value) const {
  return homogeneous_fields(*mesh_, params_at(param_value), model_);
}

State SteadyProblem::make_state(Vector fields, double param_value) const {
  require(fields.size() == size(), "state size does not match problem");
  return State{std::move(fields), param_value, model_};
}

namespace {

// Linear diffusion operator A(x) with G(x) = A(x) x - Mb f(x).
SparseMatrix diffusion_operator(const SteadyProblem& problem, const Vector& fields,
                                double param_value) {
  const Mesh& mesh = problem.mesh();
  const Params p = problem.params_at(param_value);
  const MeshOperators& ops = problem.operators();
  const int n = mesh.node_count();
  std::vector<Triplet> trips;
  if (problem.model() == ModelKind::cross) {
    const Vector ubar = point_to_center(mesh, fields.head(n));
    const Vector vbar = point_to_center(mesh, fields.tail(n));
    const SparseMatrix k21 = assemble_stiffness(mesh, Vector((p.d1 + p.d12 * vbar.array()).matrix()));
    const SparseMatrix k12 = assemble_stiffness(mesh, Vector(p.d12 * ubar));
    add_block(trips, k21, 0, 0, 1.0);
    add_block(trips, k12, 0, n, 1.0);
    add_block(trips, ops.stiffness, n, n, p.d2);
  } else {
    add_block(trips, ops.stiffness, 0, 0, p.d1);
    add_block(trips, ops.stiffness, n, n, p.d1 + p.d12 * p.M);
    add_block(trips, ops.stiffness, 2 * n, 2 * n, p.d2);
  }
  SparseMatrix a(problem.size(), problem.size());
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

}  // namespace

RelaxResult time_relax(const SteadyProblem& problem, const State& s0, double dt,
                       double horizon, double tol) {
  require(dt > 0.0, "time_relax: dt must be positive");
  require(horizon >= 0.0, "time_relax: horizon must be non-negative");
  require(s0.fields.size() == problem.size(), "time_relax: state size");
  RelaxResult out;
  Vector x = s0.fields;
  const double pv = s0.param_value;
  double t = 0.0;
  Vector g = problem.residual(x, pv);
  while (t < horizon - 1e-14 * horizon) {
    if (g.lpNorm<Eigen::Infinity>() < tol) break;
    const double h = std::min(dt, horizon - t);
    SparseMatrix sys = problem.mass_block() + h * diffusion_operator(problem, x, pv);
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(sys);
    if (lu.info() != Eigen::Success) fail(ErrorCode::divergence, "time_relax: singular step matrix");
    x -= h * lu.solve(g);
    t += h;
    ++out.steps;
    if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > 1e8)
      fail(ErrorCode::divergence, "time_relax: solution diverged");
    g = problem.residual(x, pv);
  }
  out.residual_norm = g.lpNorm<Eigen::Infinity>();
  out.converged = out.residual_norm < tol;
  out.state = problem.make_state(std::move(x), pv);
  return out;
}

void write_state_snapshot(std::ostream& out, const State& s, const std::string& param_name,
                          int node_count) {
  const int nc = components(s.model);
  require(s.fields.size() == nc * node_count, "snapshot: state size");
  out << std::setprecision(17);
  out << "# xdcont state\n";
  out << "model " << to_string(s.model) << "\n";
  out << "components " << nc << "\n";
  out << "nodes " << node_count << "\n";
  out << "param " << param_name << ' ' << s.param_value << "\n";
  for (int i = 0; i < node_count; ++i) {
    for (int c = 0; c < nc; ++c) out << (c ? " " : "") << s.fields[c * node_count + i];
    out << "\n";
  }
}

StateSnapshot read_state_snapshot(std::istream& in) {
  std::string line, tok, model;
  std::getline(in, line);
  if (line.rfind("# xdcont state", 0) != 0) fail(ErrorCode::parse_error, "state snapshot: missing header");
  int nc = 0, nn = 0;
  StateSnapshot snap;
  in >> tok >> model;
  if (tok != "model") fail(ErrorCode::parse_error, "state snapshot: expected 'model'");
  snap.state.model = model_kind_from_string(model);
  in >> tok >> nc;
  if (tok != "components" || nc != components(snap.state.model))
    fail(ErrorCode::parse_error, "state snapshot: bad component count");
  in >> tok >> nn;
  if (tok != "nodes" || nn <= 0) fail(ErrorCode::parse_error, "state snapshot: bad node count");
  in >> tok >> snap.param_name >> snap.state.param_value;
  if (tok != "param") fail(ErrorCode::parse_error, "state snapshot: expected 'param'");
  snap.state.fields.resize(static_cast<Eigen::Index>(nc) * nn);
  for (int i = 0; i < nn; ++i)
    for (int c = 0; c < nc; ++c) in >> snap.state.fields[c * nn + i];
  if (!in) fail(ErrorCode::parse_error, "state snapshot: truncated");
  return snap;
}

}  // namespace xdcont
