#include "xdcont/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <Eigen/SparseLU>

#include "xdcont/error.hpp"

namespace xdcont {

void ContinuationSettings::validate() const {
  const auto check = [](bool ok, const char* msg) {
    if (!ok) fail(ErrorCode::validation_error, std::string("continuation.") + msg);
  };
  check(ds_min > 0.0, "ds_min must be positive");
  check(ds_min <= ds0, "ds0 must be >= ds_min");
  check(ds0 <= ds_max, "ds0 must be <= ds_max");
  check(newton_tol > 0.0, "newton_tol must be positive");
  check(newton_max_iter > 0, "newton_max_iter must be positive");
  check(max_steps > 0, "max_steps must be positive");
  check(param_hi > param_lo, "param_range must be increasing");
  check(n_eigs > 0, "n_eigs must be positive");
  check(xi > 0.0 && xi < 1.0, "xi must lie in (0, 1)");
  check(event_tol > 0.0, "event_tol must be positive");
  check(grow >= 1.0, "grow must be >= 1");
  check(switch_delta > 0.0, "switch_delta must be positive");
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::branch_point: return "branch_point";
    case EventKind::fold: return "fold";
    case EventKind::hopf: return "hopf";
  }
  return "unknown";
}

std::string event_tag(EventKind kind) {
  switch (kind) {
    case EventKind::branch_point: return "BP";
    case EventKind::fold: return "FP";
    case EventKind::hopf: return "HP";
  }
  return "";
}

std::string to_string(BranchStatus status) {
  switch (status) {
    case BranchStatus::running: return "running";
    case BranchStatus::param_range: return "param_range";
    case BranchStatus::max_steps: return "max_steps";
    case BranchStatus::ds_underflow: return "ds_underflow";
    case BranchStatus::degenerate: return "degenerate";
    case BranchStatus::landed: return "landed";
  }
  return "unknown";
}

double ArclengthMetric::dot(const Vector& a, const Vector& b) const {
  const Eigen::Index n = a.size() - 1;
  return field_weight * a.head(n).dot(b.head(n)) + param_weight * a[n] * b[n];
}

namespace {

Vector extend(const Vector& fields, double param) {
  Vector z(fields.size() + 1);
  z.head(fields.size()) = fields;
  z[fields.size()] = param;
  return z;
}

Vector extend(const BranchPoint& p) { return extend(p.state.fields, p.state.param_value); }

Vector weighted_row(const Vector& t, const ArclengthMetric& metric) {
  Vector w = metric.field_weight * t;
  w[t.size() - 1] = metric.param_weight * t[t.size() - 1];
  return w;
}

SparseMatrix bordered(const SparseMatrix& jac, const Vector& gp, const Vector& row) {
  const int n = static_cast<int>(jac.rows());
  std::vector<Triplet> trips;
  trips.reserve(jac.nonZeros() + 2 * (n + 1));
  for (int k = 0; k < jac.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(jac, k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < n; ++i)
    if (gp[i] != 0.0) trips.emplace_back(i, n, gp[i]);
  for (int j = 0; j <= n; ++j)
    if (row[j] != 0.0) trips.emplace_back(n, j, row[j]);
  SparseMatrix a(n + 1, n + 1);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();
  return a;
}

bool bounds_ok(const SteadyProblem& problem, const Vector& x) {
  if (x.minCoeff() < 0.0) return false;
  if (problem.model() == ModelKind::fast) {
    const int n = problem.mesh().node_count();
    if (x.segment(n, n).maxCoeff() > problem.params().M) return false;
  }
  return true;
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// RMS distance from the homogeneous state at the same parameter; +inf when
// no admissible homogeneous state exists there.
double homogeneous_distance(const SteadyProblem& problem, const Vector& x, double p) {
  const CrossEquilibrium eq = equilibrium_cross(problem.params_at(p));
  if (!eq.admissible) return std::numeric_limits<double>::infinity();
  return (x - problem.homogeneous(p)).norm() / std::sqrt(static_cast<double>(x.size()));
}

}  // namespace

TangentResult tangent(const SparseMatrix& jacobian, const Vector& param_derivative,
                      const Vector& previous, const ArclengthMetric& metric) {
  const int n = static_cast<int>(jacobian.rows());
  require(previous.size() == n + 1, "tangent: previous tangent size");
  const SparseMatrix a = bordered(jacobian, param_derivative, weighted_row(previous, metric));
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) fail(ErrorCode::degenerate_point, "tangent: bordered matrix is singular");
  Vector rhs = Vector::Zero(n + 1);
  rhs[n] = 1.0;
  Vector z = lu.solve(rhs);
  if (!z.allFinite()) fail(ErrorCode::degenerate_point, "tangent: non-finite solution");
  const double norm = metric.norm(z);
  if (!(norm > 0.0)) fail(ErrorCode::degenerate_point, "tangent: zero direction");
  TangentResult out;
  out.tangent = z / norm;
  out.bordered_sign = lu.signDeterminant();
  return out;
}

CorrectorResult corrector(const SteadyProblem& problem, const Vector& predicted,
                          const Vector& reference, const Vector& direction, double s,
                          const ContinuationSettings& settings) {
  const int n = problem.size();
  const ArclengthMetric metric(n, settings.xi);
  const Vector row = weighted_row(direction, metric);
  CorrectorResult out;
  Vector z = predicted;
  for (int it = 0;; ++it) {
    const Vector x = z.head(n);
    const double p = z[n];
    const Vector g = problem.residual(x, p);
    const double c = metric.dot(direction, z - reference) - s;
    out.residual_norm = g.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(out.residual_norm)) return out;
    if (out.residual_norm <= settings.newton_tol && std::abs(c) <= 1e-9) {
      out.converged = true;
      out.iterations = it;
      out.fields = x;
      out.param = p;
      return out;
    }
    if (it >= settings.newton_max_iter) return out;
    const SparseMatrix a = bordered(problem.jacobian(x, p), problem.param_derivative(x, p), row);
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) return out;
    Vector rhs(n + 1);
    rhs.head(n) = -g;
    rhs[n] = -c;
    const Vector dz = lu.solve(rhs);
    if (!dz.allFinite()) return out;
    z += dz;
  }
}

BranchPoint evaluate_point(const SteadyProblem& problem, Vector fields, double param,
                           const Vector& previous_tangent, const ContinuationSettings& settings) {
  const ArclengthMetric metric(problem.size(), settings.xi);
  BranchPoint pt;
  ResidualInfo info;
  pt.residual_norm = problem.residual(fields, param, &info).lpNorm<Eigen::Infinity>();
  pt.negative_coefficient = info.negative_coefficient;
  const SparseMatrix jac = problem.jacobian(fields, param);
  const TangentResult tr = tangent(jac, problem.param_derivative(fields, param), previous_tangent, metric);
  pt.tangent = tr.tangent;
  pt.bordered_sign = tr.bordered_sign;
  if (settings.compute_stability) {
    SpectrumOptions so;
    so.count = settings.n_eigs;
    so.shift = settings.eig_shift;
    const SpectrumSlice spec = leading_spectrum(jac, problem.mass_block(), so);
    pt.eigenvalues = spec.eigenvalues;
    pt.stability = classify(spec, settings.unstable_tol, settings.hopf_imag_tol);
    pt.n_unstable = pt.stability.n_unstable;
  }
  pt.measures = measures(problem.mesh(), problem.operators().mass, problem.model(), fields);
  pt.bounds_ok = bounds_ok(problem, fields);
  pt.state = problem.make_state(std::move(fields), param);
  return pt;
}

BranchPoint init_from_homogeneous(const SteadyProblem& problem, double param_value,
                                  const ContinuationSettings& settings, int direction) {
  require(param_value >= settings.param_lo && param_value <= settings.param_hi,
          "init_from_homogeneous: start value outside the parameter range");
  const Params p = problem.params_at(param_value);
  const CrossEquilibrium eq = equilibrium_cross(p);
  if (!eq.admissible) fail(ErrorCode::no_start, "homogeneous equilibrium is not admissible");
  Vector x = problem.homogeneous(param_value);
  const double r = problem.residual(x, param_value).lpNorm<Eigen::Infinity>();
  if (r > 1e-10) fail(ErrorCode::no_start, "homogeneous state does not satisfy the residual");
  Vector t0 = Vector::Zero(problem.size() + 1);
  t0[problem.size()] = direction >= 0 ? 1.0 : -1.0;
  BranchPoint pt = evaluate_point(problem, std::move(x), param_value, t0, settings);
  pt.step_index = 0;
  return pt;
}

namespace {

struct TestFunction {
  bool needs_stability = false;
  std::function<double(const BranchPoint&)> eval;
};

int real_unstable(const BranchPoint& p) {
  return p.stability.n_unstable - p.stability.n_unstable_complex;
}

TestFunction test_for(EventKind kind, const BranchPoint& left, const BranchPoint& right) {
  switch (kind) {
    case EventKind::branch_point:
      if (left.bordered_sign != right.bordered_sign || left.eigenvalues.empty())
        return {false, [](const BranchPoint& p) { return p.bordered_sign; }};
      {
        // eigenvalue-count crossing without a determinant sign change:
        // an even number of real eigenvalues crossing together
        const int base = real_unstable(left);
        return {true, [base](const BranchPoint& p) { return real_unstable(p) == base ? 1.0 : -1.0; }};
      }
    case EventKind::fold:
      return {false, [](const BranchPoint& p) { return p.tangent_param(); }};
    case EventKind::hopf:
      return {true, [](const BranchPoint& p) { return p.stability.max_complex_real; }};
  }
  return {};
}

Complex crossing_eigenvalue(const BranchPoint& p, EventKind kind, double imag_tol) {
  Complex best{0.0, 0.0};
  double dist = std::numeric_limits<double>::infinity();
  for (const Complex& mu : p.eigenvalues) {
    if (kind == EventKind::hopf && mu.imag() <= imag_tol) continue;
    if (std::abs(mu.real()) < dist) {
      dist = std::abs(mu.real());
      best = mu;
    }
  }
  return best;
}

}  // namespace

EventRecord locate_event(const SteadyProblem& problem, const BranchPoint& left,
                         const BranchPoint& right, EventKind kind,
                         const ContinuationSettings& settings) {
  const int n = problem.size();
  const ArclengthMetric metric(n, settings.xi);
  const TestFunction test = test_for(kind, left, right);
  const double f_left = test.eval(left);
  const double f_right = test.eval(right);
  if (sgn(f_left) == sgn(f_right) || sgn(f_left) == 0.0 || sgn(f_right) == 0.0)
    fail(ErrorCode::invalid_bracket, "locate_event: test function does not change sign");

  ContinuationSettings eval_settings = settings;
  eval_settings.compute_stability = test.needs_stability;

  const Vector z_left = extend(left);
  const Vector& t_left = left.tangent;
  const double s_total = metric.dot(t_left, extend(right) - z_left);

  EventRecord ev;
  ev.kind = kind;
  ev.step_index = right.step_index;
  ev.n_unstable_before = left.n_unstable;
  ev.n_unstable_after = right.n_unstable;

  BranchPoint lo_pt = left, hi_pt = right;
  double lo = 0.0, hi = s_total;
  const double scale = std::max({std::abs(left.param()), std::abs(right.param()), 1e-3});
  const double tol_p = settings.event_tol * scale;
  bool localized = s_total > 0.0;
  for (int iter = 0; localized && iter < 80; ++iter) {
    const bool p_ok = std::abs(hi_pt.param() - lo_pt.param()) <= tol_p;
    const bool s_ok = (hi - lo) <= 1e-3 * s_total;
    if (p_ok && s_ok) break;
    const double mid = 0.5 * (lo + hi);
    const CorrectorResult c = corrector(problem, z_left + mid * t_left, z_left, t_left, mid, settings);
    if (!c.converged) {
      localized = false;
      break;
    }
    BranchPoint pt;
    try {
      pt = evaluate_point(problem, c.fields, c.param, t_left, eval_settings);
    } catch (const Error&) {
      localized = false;
      break;
    }
    if (sgn(test.eval(pt)) == sgn(f_left)) {
      lo = mid;
      lo_pt = std::move(pt);
    } else {
      hi = mid;
      hi_pt = std::move(pt);
    }
  }
  ev.localized = localized;
  ev.param_lo = std::min(lo_pt.param(), hi_pt.param());
  ev.param_hi = std::max(lo_pt.param(), hi_pt.param());
  ev.param_value = 0.5 * (lo_pt.param() + hi_pt.param());
  ev.test_values = {test.eval(lo_pt), test.eval(hi_pt)};
  ev.state = hi_pt.state;
  ev.tangent = hi_pt.tangent;
  // re-orient with the branch direction at the bracket start
  if (metric.dot(ev.tangent, t_left) < 0.0) ev.tangent = -ev.tangent;

  if (!left.eigenvalues.empty() && !right.eigenvalues.empty()) {
    const int dr = std::abs(real_unstable(right) - real_unstable(left));
    if (kind == EventKind::branch_point) ev.multiplicity = std::max(1, dr);
    if (kind == EventKind::hopf) ev.multiplicity = 2;
    const BranchPoint& probe = hi_pt.eigenvalues.empty() ? right : hi_pt;
    ev.crossing = crossing_eigenvalue(probe, kind, settings.hopf_imag_tol);
  }
  return ev;
}

namespace {

std::vector<EventKind> detect_events(const BranchPoint& a, const BranchPoint& b,
                                     const ContinuationSettings& settings) {
  std::vector<EventKind> out;
  const bool stab = !a.eigenvalues.empty() && !b.eigenvalues.empty();
  const bool fold = settings.detect_fold && sgn(a.tangent_param()) != sgn(b.tangent_param()) &&
                    sgn(a.tangent_param()) != 0.0 && sgn(b.tangent_param()) != 0.0;
  if (settings.detect_branch) {
    if (a.bordered_sign != b.bordered_sign) {
      out.push_back(EventKind::branch_point);
    } else if (stab && !fold) {
      const int dr = std::abs(real_unstable(b) - real_unstable(a));
      if (dr >= 2 && dr % 2 == 0) out.push_back(EventKind::branch_point);
    }
  }
  if (fold) out.push_back(EventKind::fold);
  if (settings.detect_hopf && stab && a.stability.n_unstable_complex != b.stability.n_unstable_complex) {
    const double fa = a.stability.max_complex_real, fb = b.stability.max_complex_real;
    if (fa > -1e299 && fb > -1e299 && sgn(fa) != sgn(fb)) out.push_back(EventKind::hopf);
  }
  return out;
}

}  // namespace

namespace {

// Re-corrects the last point of a step that left the parameter window onto
// the nearest window edge, using a natural-parameter constraint.
std::optional<BranchPoint> clip_to_range(const SteadyProblem& problem, const BranchPoint& inside,
                                         const BranchPoint& outside,
                                         const ContinuationSettings& settings) {
  const double edge = outside.param() < settings.param_lo ? settings.param_lo : settings.param_hi;
  const double span = outside.param() - inside.param();
  if (std::abs(span) <= 0.0) return std::nullopt;
  const double w = (edge - inside.param()) / span;
  if (!(w > 0.0 && w < 1.0)) return std::nullopt;
  const int n = problem.size();
  const Vector predicted = (1.0 - w) * extend(inside) + w * extend(outside);
  Vector pin = Vector::Zero(n + 1);
  pin[n] = 1.0;
  Vector reference = predicted;
  reference[n] = edge;
  const CorrectorResult c = corrector(problem, predicted, reference, pin, 0.0, settings);
  if (!c.converged) return std::nullopt;
  try {
    return evaluate_point(problem, c.fields, edge, inside.tangent, settings);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate_point) throw;
    return std::nullopt;
  }
}

}  // namespace

Branch continue_branch(const SteadyProblem& problem, const BranchPoint& start,
                       const ContinuationSettings& settings) {
  settings.validate();
  const int n = problem.size();
  const ArclengthMetric metric(n, settings.xi);
  Branch br;
  br.points.push_back(start);
  double ds = settings.ds0;
  double max_distance = 0.0;
  int steps = 0;
  int crowd_halvings = 0;
  while (true) {
    if (steps >= settings.max_steps) {
      br.status = BranchStatus::max_steps;
      break;
    }
    const BranchPoint& cur = br.points.back();
    const Vector z = extend(cur);
    const Vector& t = cur.tangent;
    const CorrectorResult c = corrector(problem, z + ds * t, z, t, ds, settings);
    BranchPoint pt;
    bool accepted = c.converged;
    if (accepted) {
      try {
        pt = evaluate_point(problem, c.fields, c.param, t, settings);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::degenerate_point) throw;
        accepted = false;
      }
    }
    // reject sharp turns; they usually mean the corrector jumped branches
    if (accepted && metric.dot(pt.tangent, t) < 0.8 && ds > 4.0 * settings.ds_min) accepted = false;
    // several real eigenvalues crossing in one step: refine unless they are
    // a genuine cluster that survives repeated halving
    if (accepted && !cur.eigenvalues.empty() && !pt.eigenvalues.empty() &&
        std::abs(real_unstable(pt) - real_unstable(cur)) >= 2 && crowd_halvings < 8 &&
        ds > 4.0 * settings.ds_min) {
      accepted = false;
      ++crowd_halvings;
    }
    if (!accepted) {
      ds *= 0.5;
      if (ds < settings.ds_min) {
        br.status = BranchStatus::ds_underflow;
        break;
      }
      continue;
    }
    const bool outside = pt.param() < settings.param_lo || pt.param() > settings.param_hi;
    if (outside) {
      if (auto clipped = clip_to_range(problem, cur, pt, settings)) pt = std::move(*clipped);
    }
    ++steps;
    crowd_halvings = 0;
    pt.step_index = cur.step_index + 1;
    pt.ds = ds;
    pt.newton_iterations = c.iterations;

    std::vector<EventRecord> found;
    for (EventKind kind : detect_events(cur, pt, settings)) {
      try {
        EventRecord ev = locate_event(problem, cur, pt, kind, settings);
        // a complex pair born or destroyed off the imaginary axis makes the
        // Hopf test jump without crossing zero
        if (kind == EventKind::hopf && ev.localized &&
            std::max(std::abs(ev.test_values.first), std::abs(ev.test_values.second)) >
                settings.hopf_test_tol)
          continue;
        found.push_back(std::move(ev));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::invalid_bracket) throw;
      }
    }
    bool landed = false;
    if (settings.stop_on_homogeneous) {
      const double dist = homogeneous_distance(problem, pt.state.fields, pt.param());
      if (std::isfinite(dist)) max_distance = std::max(max_distance, dist);
      for (const EventRecord& ev : found) {
        if (ev.kind != EventKind::branch_point) continue;
        const double d_ev = homogeneous_distance(problem, ev.state.fields, ev.state.param_value);
        if (d_ev < settings.landing_fraction * max_distance) {
          landed = true;
          br.landing_param = ev.param_value;
          br.landing_state = cur.state;
        }
      }
    }
    for (EventRecord& ev : found) {
      ev.id = static_cast<int>(br.events.size());
      if (!pt.event_flag.empty()) pt.event_flag += "+";
      pt.event_flag += event_tag(ev.kind);
      br.events.push_back(std::move(ev));
    }
    const double p = pt.param();
    br.points.push_back(std::move(pt));
    if (landed) {
      br.status = BranchStatus::landed;
      break;
    }
    if (outside) {
      br.status = BranchStatus::param_range;
      break;
    }
    if (c.iterations <= settings.fast_iterations) ds = std::min(ds * settings.grow, settings.ds_max);
  }
  return br;
}

Vector kernel_vector(const SteadyProblem& problem, const State& s) {
  const SparseMatrix jac = problem.jacobian(s.fields, s.param_value);
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(jac);
  if (lu.info() != Eigen::Success) {
    SparseMatrix shifted = jac + 1e-10 * problem.mass_block();
    lu.compute(shifted);
    if (lu.info() != Eigen::Success) fail(ErrorCode::degenerate_point, "kernel_vector: factorization failed");
  }
  const int n = problem.size();
  std::mt19937_64 rng(0xb1f);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = 1.0 + 0.5 * dist(rng);
  for (int it = 0; it < 12; ++it) {
    Vector next = lu.solve(y);
    if (!next.allFinite()) fail(ErrorCode::degenerate_point, "kernel_vector: non-finite iterate");
    next /= next.norm();
    const double change = std::min((next - y).norm(), (next + y).norm());
    y = next;
    if (change < 1e-13) break;
  }
  const int nodes = problem.mesh().node_count();
  const int probe = (problem.ncomp() - 1) * nodes;
  Eigen::Index imax = 0;
  y.cwiseAbs().maxCoeff(&imax);
  const double ref = std::abs(y[probe]) > 1e-6 * std::abs(y[imax]) ? y[probe] : y[imax];
  if (ref < 0.0) y = -y;
  return y;
}

std::vector<Vector> kernel_basis(const SteadyProblem& problem, const State& s, int count) {
  require(count >= 1, "kernel_basis: count must be positive");
  const SparseMatrix jac = problem.jacobian(s.fields, s.param_value);
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(jac);
  if (lu.info() != Eigen::Success) {
    lu.compute(SparseMatrix(jac + 1e-10 * problem.mass_block()));
    if (lu.info() != Eigen::Success) fail(ErrorCode::degenerate_point, "kernel_basis: factorization failed");
  }
  const int n = problem.size();
  std::mt19937_64 rng(0xb1f);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd y(n, count);
  for (int j = 0; j < count; ++j)
    for (int i = 0; i < n; ++i) y(i, j) = dist(rng);
  for (int it = 0; it < 20; ++it) {
    Eigen::MatrixXd next(n, count);
    for (int j = 0; j < count; ++j) next.col(j) = lu.solve(Vector(y.col(j)));
    if (!next.allFinite()) fail(ErrorCode::degenerate_point, "kernel_basis: non-finite iterate");
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(next);
    y = qr.householderQ() * Eigen::MatrixXd::Identity(n, count);
  }
  std::vector<Vector> out;
  for (int j = 0; j < count; ++j) out.emplace_back(y.col(j));
  return out;
}

Branch switch_branch_along(const SteadyProblem& problem, const EventRecord& event,
                           const Vector& field_direction, const ContinuationSettings& settings) {
  const int n = problem.size();
  require(field_direction.size() == n, "switch_branch: direction size");
  const ArclengthMetric metric(n, settings.xi);
  Vector tau = extend(field_direction, 0.0);
  if (event.tangent.size() == n + 1) tau -= metric.dot(tau, event.tangent) * event.tangent;
  const double norm = metric.norm(tau);
  if (!(norm > 0.0)) fail(ErrorCode::switch_failure, "switch_branch: direction parallel to branch");
  tau /= norm;
  const Vector z_ev = extend(event.state.fields, event.state.param_value);

  CorrectorResult c;
  double delta = settings.switch_delta;
  for (int attempt = 0; attempt <= settings.switch_retries; ++attempt, delta *= 2.0) {
    c = corrector(problem, z_ev + delta * tau, z_ev, tau, delta, settings);
    if (c.converged) break;
  }
  if (!c.converged) fail(ErrorCode::switch_failure, "switch_branch: corrector failed for all retries");
  BranchPoint start = evaluate_point(problem, c.fields, c.param, tau, settings);
  start.step_index = 0;
  Branch br = continue_branch(problem, start, settings);
  br.origin_event = event.id;
  return br;
}

Branch switch_branch(const SteadyProblem& problem, const EventRecord& event, int direction,
                     const ContinuationSettings& settings) {
  require(event.kind == EventKind::branch_point, "switch_branch: event is not a branch point");
  require(direction == 1 || direction == -1, "switch_branch: direction must be +1 or -1");
  Vector psi = kernel_vector(problem, event.state);
  Branch br = switch_branch_along(problem, event, direction * psi, settings);
  br.direction = direction;
  return br;
}

double max_residual(const SteadyProblem& problem, const Branch& branch) {
  double worst = 0.0;
  for (const BranchPoint& p : branch.points)
    worst = std::max(worst, problem.residual(p.state.fields, p.param()).lpNorm<Eigen::Infinity>());
  return worst;
}

}  // namespace xdcont
