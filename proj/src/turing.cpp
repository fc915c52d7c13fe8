#include "xdcont/turing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "xdcont/error.hpp"

namespace xdcont {

LinearizationData linearize(const Params& p) {
  const CrossEquilibrium eq = equilibrium_cross(p);
  if (!eq.admissible) fail(ErrorCode::singular_parameters, "linearize: equilibrium not admissible");
  LinearizationData lin;
  lin.u_star = eq.u;
  lin.v_star = eq.v;
  lin.jstar << -p.a1 * eq.u, -p.b1 * eq.u, -p.b2 * eq.v, -p.a2 * eq.v;
  lin.jdelta << p.d1 + p.d12 * eq.v, p.d12 * eq.u, 0.0, p.d2;
  lin.tr_j = lin.jstar.trace();
  lin.det_j = lin.jstar.determinant();
  lin.alpha = (2.0 * p.b2 * eq.u - p.r2) * eq.v;
  return lin;
}

ModelLinearization linearize_model(const Params& p, ModelKind model) {
  ModelLinearization out;
  if (model == ModelKind::cross) {
    const LinearizationData lin = linearize(p);
    out.reaction = lin.jstar;
    out.diffusion = lin.jdelta;
    return out;
  }
  const FastEquilibrium eq = equilibrium_fast(p);
  if (!eq.admissible) fail(ErrorCode::singular_parameters, "linearize: equilibrium not admissible");
  const double u = eq.u1 + eq.u2;
  const double g = p.r1 - p.a1 * u - p.b1 * eq.v;
  const double ie = 1.0 / p.eps, im = 1.0 / p.M;
  Eigen::Matrix3d j;
  j << g - p.a1 * eq.u1 - eq.v * im * ie, -p.a1 * eq.u1 + (1.0 - eq.v * im) * ie,
      -p.b1 * eq.u1 - u * im * ie,
      -p.a1 * eq.u2 + eq.v * im * ie, g - p.a1 * eq.u2 - (1.0 - eq.v * im) * ie,
      -p.b1 * eq.u2 + u * im * ie,
      -p.b2 * eq.v, -p.b2 * eq.v, p.r2 - p.b2 * u - 2.0 * p.a2 * eq.v;
  out.reaction = j;
  out.diffusion = Eigen::Vector3d(p.d1, p.d1 + p.d12 * p.M, p.d2).asDiagonal();
  return out;
}

std::vector<std::complex<double>> mode_eigenvalues(const ModelLinearization& lin, double lambda) {
  const Eigen::MatrixXd m = lin.reaction - lin.diffusion * lambda;
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  std::vector<std::complex<double>> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()[i]);
  return out;
}

std::vector<LaplaceMode> laplacian_spectrum(const DomainSpec& spec, double lambda_max) {
  require(lambda_max > 0.0, "laplacian_spectrum: lambda_max must be positive");
  spec.validate();
  struct Raw {
    double lambda;
    int n, m;
  };
  std::vector<Raw> raw;
  const double kx = std::numbers::pi / spec.lx;
  const int nmax = static_cast<int>(std::floor(std::sqrt(lambda_max) / kx)) + 1;
  if (spec.kind == DomainKind::interval) {
    for (int n = 0; n <= nmax; ++n) {
      const double l = (kx * n) * (kx * n);
      if (l <= lambda_max) raw.push_back({l, n, 0});
    }
  } else {
    const double ky = std::numbers::pi / spec.ly;
    const int mmax = static_cast<int>(std::floor(std::sqrt(lambda_max) / ky)) + 1;
    for (int n = 0; n <= nmax; ++n)
      for (int m = 0; m <= mmax; ++m) {
        const double l = (kx * n) * (kx * n) + (ky * m) * (ky * m);
        if (l <= lambda_max) raw.push_back({l, n, m});
      }
  }
  std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    return a.n < b.n;
  });
  std::vector<LaplaceMode> out;
  for (const Raw& r : raw) {
    if (!out.empty() &&
        std::abs(out.back().lambda - r.lambda) <= 1e-12 * std::max(1.0, r.lambda)) {
      out.back().indices.push_back({r.n, r.m});
      continue;
    }
    LaplaceMode mode;
    mode.lambda = r.lambda;
    mode.indices.push_back({r.n, r.m});
    out.push_back(mode);
  }
  return out;
}

double char_det(const Params& p, double lambda, double d) {
  Params q = p;
  q.d1 = d;
  q.d2 = d;
  const CrossEquilibrium eq = equilibrium_cross(q);
  const double tr = -p.a1 * eq.u - p.a2 * eq.v;
  const double det = (p.a1 * p.a2 - p.b1 * p.b2) * eq.u * eq.v;
  const double alpha = (2.0 * p.b2 * eq.u - p.r2) * eq.v;
  return d * (d + p.d12 * eq.v) * lambda * lambda - (d * tr + p.d12 * alpha) * lambda + det;
}

std::optional<double> critical_d(const Params& p, double lambda) {
  require(lambda > 0.0, "critical_d: lambda must be positive");
  const CrossEquilibrium eq = equilibrium_cross(p);
  const double tr = -p.a1 * eq.u - p.a2 * eq.v;
  const double det = (p.a1 * p.a2 - p.b1 * p.b2) * eq.u * eq.v;
  const double alpha = (2.0 * p.b2 * eq.u - p.r2) * eq.v;
  const double b = p.d12 * eq.v * lambda - tr;
  const double c = det - p.d12 * alpha * lambda;
  const double disc = b * b - 4.0 * c;
  if (disc < 0.0) return std::nullopt;
  const double root = (-b + std::sqrt(disc)) / (2.0 * lambda);
  if (!(root > 0.0)) return std::nullopt;
  return root;
}

namespace {

bool admissible_at(const Params& p, const std::string& name, double value) {
  Params q = p;
  q.set(name, value);
  return equilibrium_cross(q).admissible;
}

}  // namespace

std::vector<TuringPrediction> predict_bifurcations(const Params& p, const DomainSpec& spec,
                                                   const std::string& param_name,
                                                   const PredictionOptions& opts) {
  require(opts.hi > opts.lo, "predict_bifurcations: empty range");
  require(opts.scan_points >= 2, "predict_bifurcations: scan grid too small");
  std::vector<TuringPrediction> out;
  const auto modes = laplacian_spectrum(spec, opts.lambda_max);

  if (param_name == "d" || param_name == "d1" || param_name == "d2") {
    if (!equilibrium_cross(p).admissible)
      fail(ErrorCode::singular_parameters, "predict_bifurcations: equilibrium not admissible");
    for (const auto& mode : modes) {
      if (mode.lambda <= 0.0) continue;
      const auto db = critical_d(p, mode.lambda);
      if (db && *db > opts.lo && *db <= opts.hi) out.push_back({mode, *db, "d"});
    }
  } else {
    // restrict the scan to the admissible part of the range
    const int n = opts.scan_points;
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i) grid[i] = opts.lo + (opts.hi - opts.lo) * i / (n - 1);
    std::vector<char> ok(n);
    bool any = false;
    for (int i = 0; i < n; ++i) any |= (ok[i] = admissible_at(p, param_name, grid[i]));
    if (!any) fail(ErrorCode::singular_parameters, "predict_bifurcations: no admissible equilibrium in range");
    const double d = p.d1;
    for (const auto& mode : modes) {
      if (mode.lambda <= 0.0) continue;
      const auto f = [&](double x) {
        Params q = p;
        q.set(param_name, x);
        return char_det(q, mode.lambda, d);
      };
      for (int i = 0; i + 1 < n; ++i) {
        if (!ok[i] || !ok[i + 1]) continue;
        double a = grid[i], b = grid[i + 1];
        double fa = f(a), fb = f(b);
        if (fa == 0.0) {
          out.push_back({mode, a, param_name});
          continue;
        }
        if (fa * fb > 0.0 || fb == 0.0) continue;
        while (b - a > opts.tol * std::max(1.0, std::abs(a))) {
          const double c = 0.5 * (a + b);
          const double fc = f(c);
          if ((fc < 0.0) == (fa < 0.0)) {
            a = c;
            fa = fc;
          } else {
            b = c;
          }
        }
        out.push_back({mode, 0.5 * (a + b), param_name});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const TuringPrediction& a, const TuringPrediction& b) {
    return a.critical_value > b.critical_value;
  });
  return out;
}

}  // namespace xdcont
