#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xdcont/mesh.hpp"
#include "xdcont/models.hpp"

namespace xdcont {

/// Linearization of the cross-diffusion system at the coexistence state.
struct LinearizationData {
  Eigen::Matrix2d jstar;   // reaction Jacobian
  Eigen::Matrix2d jdelta;  // linearized diffusion
  double tr_j = 0.0;
  double det_j = 0.0;
  double alpha = 0.0;  // (2 b2 u* - r2) v*
  double u_star = 0.0;
  double v_star = 0.0;
};

LinearizationData linearize(const Params& p);

/// Reaction Jacobian and (constant) linearized diffusion matrix of either
/// model at its homogeneous equilibrium. For the fast model these are 3x3.
struct ModelLinearization {
  Eigen::MatrixXd reaction;
  Eigen::MatrixXd diffusion;
};

ModelLinearization linearize_model(const Params& p, ModelKind model);

/// Eigenvalues of reaction - diffusion * lambda.
std::vector<std::complex<double>> mode_eigenvalues(const ModelLinearization& lin, double lambda);

struct LaplaceMode {
  double lambda = 0.0;
  std::vector<std::array<int, 2>> indices;  // (n) stored as (n, 0) on intervals
  int multiplicity() const { return static_cast<int>(indices.size()); }
};

/// Neumann Laplacian eigenvalues up to `lambda_max`, ascending, with equal
/// values merged (relative tolerance 1e-12).
std::vector<LaplaceMode> laplacian_spectrum(const DomainSpec& spec, double lambda_max);

/// det(J* - J_Δ* λ) with d1 = d2 = d.
double char_det(const Params& p, double lambda, double d);

/// Closed-form root of det M_k* = 0 in d, or nullopt when the discriminant
/// is negative or the root is not positive.
std::optional<double> critical_d(const Params& p, double lambda);

struct TuringPrediction {
  LaplaceMode mode;
  double critical_value = 0.0;
  std::string param_name;
};

struct PredictionOptions {
  double lo = 0.0;
  double hi = 1.0;
  double lambda_max = 1000.0;
  int scan_points = 400;
  double tol = 1e-10;
};

/// Homogeneous-branch bifurcation values in `param_name`, sorted descending.
/// "d" uses the closed form; any other parameter is located by scanning
/// det M_k*(param) and bisecting each sign change.
std::vector<TuringPrediction> predict_bifurcations(const Params& p, const DomainSpec& spec,
                                                   const std::string& param_name,
                                                   const PredictionOptions& opts);

}  // namespace xdcont
