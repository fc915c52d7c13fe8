#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "xdcont/mesh.hpp"

namespace xdcont {

/// Coefficients of the SKT cross-diffusion system and its three-component
/// fast-reaction relaxation. With `tie` set, d1 and d2 are driven together by
/// the pseudo-parameter "d".
struct Params {
  double d1 = 0.04;
  double d2 = 0.04;
  double d12 = 3.0;
  double r1 = 5.0;
  double r2 = 2.0;
  double a1 = 3.0;
  double a2 = 3.0;
  double b1 = 1.0;
  double b2 = 1.0;
  double M = 1.0;
  double eps = 1e-3;
  bool tie = true;

  /// Weak-competition parameter set used throughout the literature on this
  /// model, with d1 = d2 = d.
  static Params table1(double d = 0.04);

  double get(std::string_view name) const;
  void set(std::string_view name, double value);
  static const std::vector<std::string>& names();

  bool weak_competition() const { return a1 * a2 - b1 * b2 > 0.0; }
};

enum class ModelKind { cross, fast };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
inline int components(ModelKind kind) { return kind == ModelKind::cross ? 2 : 3; }

void validate(const Params& p, ModelKind model);

/// Concatenated nodal fields (u, v) or (u1, u2, v).
struct State {
  Vector fields;
  double param_value = 0.0;
  ModelKind model = ModelKind::cross;

  Eigen::Ref<const Vector> component(int c, int node_count) const {
    return fields.segment(static_cast<Eigen::Index>(c) * node_count, node_count);
  }
};

struct CrossEquilibrium {
  double u = 0.0;
  double v = 0.0;
  bool admissible = false;
};

struct FastEquilibrium {
  double u1 = 0.0;
  double u2 = 0.0;
  double v = 0.0;
  bool admissible = false;
};

CrossEquilibrium equilibrium_cross(const Params& p);
FastEquilibrium equilibrium_fast(const Params& p);

/// Spatially constant state at the coexistence equilibrium.
Vector homogeneous_fields(const Mesh& mesh, const Params& p, ModelKind model);

struct Measures {
  double v_at_origin = 0.0;
  double u_l1 = 0.0;
  double u_l2 = 0.0;
};

/// Total u: u itself for the cross model, u1 + u2 for the fast model.
Vector total_u(const Mesh& mesh, ModelKind model, const Vector& fields);
Measures measures(const Mesh& mesh, ModelKind model, const Vector& fields);
Measures measures(const Mesh& mesh, const SparseMatrix& mass, ModelKind model,
                  const Vector& fields);
inline Measures measures(const Mesh& mesh, const State& s) {
  return measures(mesh, s.model, s.fields);
}

/// Operators that depend only on the mesh; built once per problem.
struct MeshOperators {
  SparseMatrix stiffness;  // unit coefficient
  SparseMatrix mass;       // unit coefficient
};

MeshOperators mesh_operators(const Mesh& mesh);

/// Block-diagonal mass matrix I_c ⊗ M.
SparseMatrix block_mass(const SparseMatrix& mass, int ncomp);

struct ResidualInfo {
  /// Set when the interpolated self-diffusion coefficient c(v) = d1 + d12 v
  /// is negative on some element.
  bool negative_coefficient = false;
};

/// Weak-form steady-state residual G(u, v) = [K21(v) u + K12(u) v - F1;
/// d2 K v - F2]. Zero at steady states.
Vector residual_cross(const Mesh& mesh, const MeshOperators& ops, const Params& p,
                      const Vector& fields, ResidualInfo* info = nullptr);
SparseMatrix jacobian_cross(const Mesh& mesh, const MeshOperators& ops,
                            const Params& p, const Vector& fields);

/// Three-component residual with constant diffusions (d1, d1 + d12 M, d2) and
/// the exchange term q/eps.
Vector residual_fast(const Mesh& mesh, const MeshOperators& ops, const Params& p,
                     const Vector& fields);
SparseMatrix jacobian_fast(const Mesh& mesh, const MeshOperators& ops,
                           const Params& p, const Vector& fields);

/// Quasi-steady-state exchange q = u2 (1 - v/M) - u1 v/M at every node.
Vector exchange_term(const Mesh& mesh, const Params& p, const Vector& fields);

/// Steady-state problem: a model on a mesh with one designated continuation
/// parameter. Copies are cheap; the mesh is shared and immutable.
class SteadyProblem {
 public:
  SteadyProblem(std::shared_ptr<const Mesh> mesh, Params params, ModelKind model,
                std::string param_name);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const Params& params() const { return params_; }
  ModelKind model() const { return model_; }
  const std::string& param_name() const { return param_name_; }
  const MeshOperators& operators() const { return *ops_; }
  const SparseMatrix& mass_block() const { return *mass_block_; }
  int ncomp() const { return components(model_); }
  int size() const { return ncomp() * mesh_->node_count(); }

  Params params_at(double param_value) const;

  Vector residual(const Vector& fields, double param_value,
                  ResidualInfo* info = nullptr) const;
  SparseMatrix jacobian(const Vector& fields, double param_value) const;
  /// ∂G/∂param by central differences. G is affine in every coefficient
  /// except eps and M, so the difference quotient is exact up to rounding.
  Vector param_derivative(const Vector& fields, double param_value) const;

  Vector homogeneous(double param_value) const;
  State make_state(Vector fields, double param_value) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  Params params_;
  ModelKind model_;
  std::string param_name_;
  std::shared_ptr<const MeshOperators> ops_;
  std::shared_ptr<const SparseMatrix> mass_block_;
};

struct RelaxResult {
  State state;
  bool converged = false;
  double residual_norm = 0.0;
  int steps = 0;
};

/// First-order IMEX relaxation: diffusion implicit with coefficients frozen at
/// the start of each step, reaction explicit.
RelaxResult time_relax(const SteadyProblem& problem, const State& s0, double dt,
                       double horizon, double tol = 1e-9);

void write_state_snapshot(std::ostream& out, const State& s, const std::string& param_name,
                          int node_count);
struct StateSnapshot {
  State state;
  std::string param_name;
};
StateSnapshot read_state_snapshot(std::istream& in);

}  // namespace xdcont
