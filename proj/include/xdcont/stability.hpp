#pragma once

#include <complex>
#include <vector>

#include "xdcont/mesh.hpp"

namespace xdcont {

using Complex = std::complex<double>;

/// Rightmost eigenvalues μ of  -J ψ = μ M ψ, sorted by descending real part.
/// Negative real parts are stable. Conjugate pairs are kept together.
struct SpectrumSlice {
  std::vector<Complex> eigenvalues;
  int n_requested = 0;
  int converged_count = 0;
  bool dense = false;
};

struct SpectrumOptions {
  int count = 10;
  double shift = 0.1;
  /// Problems up to this many unknowns use a dense QR solve.
  int dense_limit = 2000;
  int krylov_dim = 0;  // 0: choose from count
  int max_restarts = 30;
  double tol = 1e-10;
};

SpectrumSlice leading_spectrum(const SparseMatrix& jacobian, const SparseMatrix& mass_block,
                               const SpectrumOptions& opts = {});

struct StabilityClass {
  int n_unstable = 0;          // eigenvalues with Re > tol, pairs count 2
  int n_unstable_complex = 0;  // subset with |Im| > imag_tol
  bool marginal = false;       // some |Re| <= tol
  double max_complex_real = -1e300;
};

StabilityClass classify(const SpectrumSlice& spectrum, double tol = 1e-8,
                        double imag_tol = 1e-6);

}  // namespace xdcont
