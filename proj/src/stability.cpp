#include "xdcont/stability.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "xdcont/error.hpp"

namespace xdcont {

namespace {

void sort_rightmost(std::vector<Complex>& ev) {
  std::stable_sort(ev.begin(), ev.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
}

// Keep the first `k` entries, extending by one if that would split a pair.
void truncate_keep_pairs(std::vector<Complex>& ev, int k) {
  if (static_cast<int>(ev.size()) <= k) return;
  int keep = k;
  const Complex& last = ev[keep - 1];
  if (std::abs(last.imag()) > 0.0 && keep < static_cast<int>(ev.size()) &&
      std::abs(ev[keep] - std::conj(last)) <= 1e-8 * std::max(1.0, std::abs(last)))
    ++keep;
  ev.resize(keep);
}

SpectrumSlice dense_spectrum(const SparseMatrix& jac, const SparseMatrix& mass, int k) {
  const Eigen::MatrixXd m = Eigen::MatrixXd(mass);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::invalid_argument, "leading_spectrum: mass matrix is not SPD");
  // C = -L^{-1} J L^{-T} is similar to -M^{-1} J
  Eigen::MatrixXd c = -Eigen::MatrixXd(jac);
  llt.matrixL().solveInPlace(c);
  c.transposeInPlace();
  llt.matrixL().solveInPlace(c);
  c.transposeInPlace();
  Eigen::EigenSolver<Eigen::MatrixXd> es(c, false);
  if (es.info() != Eigen::Success)
    fail(ErrorCode::invalid_argument, "leading_spectrum: dense eigensolver failed");
  SpectrumSlice out;
  out.dense = true;
  out.n_requested = k;
  out.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  sort_rightmost(out.eigenvalues);
  truncate_keep_pairs(out.eigenvalues, k);
  out.converged_count = static_cast<int>(out.eigenvalues.size());
  return out;
}

// Shift-invert Arnoldi with explicit restarts on OP = (A - σM)^{-1} M,
// A = -J. Eigenvalues of OP are θ = 1/(μ - σ).
SpectrumSlice arnoldi_spectrum(const SparseMatrix& jac, const SparseMatrix& mass,
                               const SpectrumOptions& opts) {
  const int n = static_cast<int>(jac.rows());
  const int k = std::min(opts.count, n - 2);
  const int m = std::min(n - 1, opts.krylov_dim > 0 ? opts.krylov_dim : std::max(2 * k + 40, 80));
  const double sigma = opts.shift;

  SparseMatrix shifted = -jac - sigma * mass;
  shifted.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(shifted);
  if (lu.info() != Eigen::Success)
    fail(ErrorCode::invalid_argument, "leading_spectrum: shifted operator is singular");

  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector start(n);
  for (int i = 0; i < n; ++i) start[i] = 1.0 + 0.5 * dist(rng);

  Eigen::MatrixXd v(n, m + 1);
  Eigen::MatrixXd h(m + 1, m);
  SpectrumSlice out;
  out.n_requested = k;

  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    v.setZero();
    h.setZero();
    v.col(0) = start / start.norm();
    int built = m;
    for (int j = 0; j < m; ++j) {
      Vector w = lu.solve(mass * v.col(j));
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const double c = v.col(i).dot(w);
          h(i, j) += c;
          w -= c * v.col(i);
        }
      }
      const double beta = w.norm();
      h(j + 1, j) = beta;
      if (beta < 1e-14) {
        built = j + 1;
        break;
      }
      v.col(j + 1) = w / beta;
    }

    const Eigen::MatrixXd hm = h.topLeftCorner(built, built);
    Eigen::EigenSolver<Eigen::MatrixXd> es(hm, true);
    const auto& theta = es.eigenvalues();
    const auto& y = es.eigenvectors();
    std::vector<int> order(built);
    for (int i = 0; i < built; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(theta[a]) > std::abs(theta[b]); });

    const double beta = built < m ? 0.0 : h(m, m - 1);
    const int want = std::min(k, built);
    int converged = 0;
    std::vector<Complex> mus;
    Vector next = Vector::Zero(n);
    for (int r = 0; r < built; ++r) {
      const int i = order[r];
      const Eigen::VectorXcd yi = y.col(i) / y.col(i).norm();
      const double resid = std::abs(beta * yi[built - 1]);
      const bool ok = resid <= opts.tol * std::abs(theta[i]);
      if (r < want) {
        if (ok) ++converged;
        next += (v.leftCols(built) * yi.real()).normalized();
      }
      if (ok && std::abs(theta[i]) > 0.0) mus.push_back(sigma + 1.0 / theta[i]);
    }
    if (converged >= want || restart == opts.max_restarts) {
      sort_rightmost(mus);
      truncate_keep_pairs(mus, k);
      out.eigenvalues = mus;
      out.converged_count = std::min<int>(converged, static_cast<int>(mus.size()));
      return out;
    }
    start = next;
    if (start.norm() == 0.0) start = v.col(built - 1);
  }
  return out;
}

}  // namespace

SpectrumSlice leading_spectrum(const SparseMatrix& jacobian, const SparseMatrix& mass_block,
                               const SpectrumOptions& opts) {
  require(jacobian.rows() == jacobian.cols(), "leading_spectrum: Jacobian must be square");
  require(mass_block.rows() == jacobian.rows() && mass_block.cols() == jacobian.cols(),
          "leading_spectrum: mass matrix size");
  require(opts.count > 0, "leading_spectrum: count must be positive");
  const int n = static_cast<int>(jacobian.rows());
  if (n <= opts.dense_limit || n < opts.count + 10)
    return dense_spectrum(jacobian, mass_block, std::min(opts.count, n));
  return arnoldi_spectrum(jacobian, mass_block, opts);
}

StabilityClass classify(const SpectrumSlice& spectrum, double tol, double imag_tol) {
  StabilityClass c;
  for (const Complex& mu : spectrum.eigenvalues) {
    if (std::abs(mu.real()) <= tol) c.marginal = true;
    const bool complex_pair = std::abs(mu.imag()) > imag_tol;
    if (complex_pair) c.max_complex_real = std::max(c.max_complex_real, mu.real());
    if (mu.real() > tol) {
      ++c.n_unstable;
      if (complex_pair) ++c.n_unstable_complex;
    }
  }
  return c;
}

}  // namespace xdcont
