#pragma once

#include <memory>
#include <random>

#include "doctest.h"

#include "xdcont/models.hpp"

namespace xdtest {

using namespace xdcont;

inline std::shared_ptr<const Mesh> interval(int n, double length = 1.0) {
  return std::make_shared<const Mesh>(build_interval_mesh(length, n));
}

inline std::shared_ptr<const Mesh> rectangle(int nx, int ny, double lx = 1.0, double ly = 4.0) {
  return std::make_shared<const Mesh>(build_rectangle_mesh(DomainSpec::rectangle(lx, ly), nx, ny));
}

/// Homogeneous state plus a smooth, strictly positive perturbation.
inline Vector perturbed_state(const Mesh& mesh, const Params& p, ModelKind model, unsigned seed,
                              double amplitude = 0.1) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  Vector x = homogeneous_fields(mesh, p, model);
  const int n = mesh.node_count();
  for (int c = 0; c < components(model); ++c) {
    const double a = phase(rng), b = phase(rng);
    for (int i = 0; i < n; ++i)
      x[c * n + i] *= 1.0 + amplitude * std::sin(3.0 * mesh.x(i) + a) * std::cos(2.0 * mesh.y(i) + b);
  }
  return x;
}

/// max over random directions of |(G(x+h dx)-G(x-h dx))/2h - J dx| / |J dx|.
template <class Residual>
double fd_jacobian_error(Residual&& g, const SparseMatrix& jac, const Vector& x, int directions,
                         unsigned seed, double h = 1e-6) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int k = 0; k < directions; ++k) {
    Vector dx(x.size());
    for (int i = 0; i < dx.size(); ++i) dx[i] = normal(rng);
    dx /= dx.norm();
    const Vector fd = (g(x + h * dx) - g(x - h * dx)) / (2.0 * h);
    const Vector jd = jac * dx;
    worst = std::max(worst, (fd - jd).norm() / jd.norm());
  }
  return worst;
}

}  // namespace xdtest
