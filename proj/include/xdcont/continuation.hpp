#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xdcont/models.hpp"
#include "xdcont/stability.hpp"

namespace xdcont {

struct ContinuationSettings {
  double ds0 = 1e-3;
  double ds_min = 1e-7;
  double ds_max = 1e-2;
  double newton_tol = 1e-10;
  int newton_max_iter = 10;
  int max_steps = 2000;
  double param_lo = 0.0;
  double param_hi = 1.0;
  int n_eigs = 10;
  double eig_shift = 0.1;
  bool detect_branch = true;
  bool detect_fold = true;
  bool detect_hopf = true;
  bool compute_stability = true;

  /// Weight of the field block in the arclength metric; fields are scaled by
  /// 1/N so xi balances their RMS against the parameter.
  double xi = 0.5;
  double event_tol = 1e-6;
  double grow = 1.3;
  int fast_iterations = 3;
  double unstable_tol = 1e-8;
  double hopf_imag_tol = 1e-6;
  /// Largest |Re| of the crossing pair accepted at a localized Hopf point.
  double hopf_test_tol = 1e-4;
  /// Clustered eigenvalue crossings closer than this are one event.
  double multiplicity_tol = 1e-8;

  /// Initial offset along the kernel direction, in arclength-metric units.
  double switch_delta = 1e-3;
  int switch_retries = 3;

  /// Stop a branch once it returns to the homogeneous branch (used to trace
  /// closed loops of non-homogeneous states).
  bool stop_on_homogeneous = true;
  double landing_fraction = 0.05;

  void validate() const;
};

enum class EventKind { branch_point, fold, hopf };
std::string to_string(EventKind kind);
/// Short tag used in branch tables: BP, FP, HP.
std::string event_tag(EventKind kind);

/// Extended vector (fields, parameter) in the weighted arclength metric.
struct ArclengthMetric {
  double field_weight = 0.0;  // xi / N
  double param_weight = 0.0;  // 1 - xi

  ArclengthMetric(int n, double xi) : field_weight(xi / n), param_weight(1.0 - xi) {}
  double dot(const Vector& a, const Vector& b) const;
  double norm(const Vector& a) const { return std::sqrt(dot(a, a)); }
};

struct BranchPoint {
  State state;
  Measures measures;
  int n_unstable = 0;
  StabilityClass stability;
  std::vector<Complex> eigenvalues;
  /// Unit tangent (fields, parameter) in the arclength metric.
  Vector tangent;
  int step_index = 0;
  double residual_norm = 0.0;
  int newton_iterations = 0;
  /// Sign of det [[J, G_p], [t^T]]; flips at simple branch points.
  double bordered_sign = 1.0;
  double ds = 0.0;
  bool negative_coefficient = false;
  /// 0 <= u2 <= M and non-negative densities.
  bool bounds_ok = true;
  std::string event_flag;

  double param() const { return state.param_value; }
  double tangent_param() const { return tangent[tangent.size() - 1]; }
};

struct EventRecord {
  int id = -1;
  EventKind kind = EventKind::branch_point;
  double param_value = 0.0;
  double param_lo = 0.0;
  double param_hi = 0.0;
  State state;
  Vector tangent;
  std::pair<double, double> test_values{0.0, 0.0};
  int multiplicity = 1;
  int step_index = 0;
  /// Eigenvalue responsible for the crossing (Hopf: the pair member with
  /// positive imaginary part).
  Complex crossing{0.0, 0.0};
  bool localized = true;
  int n_unstable_before = 0;
  int n_unstable_after = 0;
};

enum class BranchStatus { running, param_range, max_steps, ds_underflow, degenerate, landed };
std::string to_string(BranchStatus status);

struct Branch {
  std::vector<BranchPoint> points;
  std::vector<EventRecord> events;
  /// -1 for a branch started from the homogeneous state, otherwise the id of
  /// the event it was switched from.
  int origin_event = -1;
  int direction = 0;
  std::string label;
  BranchStatus status = BranchStatus::running;
  /// Parameter at which the branch rejoined the homogeneous branch.
  std::optional<double> landing_param;
  /// Last point before landing (used to tell which side it arrived from).
  std::optional<State> landing_state;
};

/// Homogeneous starting point, stability classified, tangent pointing in the
/// direction of `direction` (+1 increasing parameter, -1 decreasing).
BranchPoint init_from_homogeneous(const SteadyProblem& problem, double param_value,
                                  const ContinuationSettings& settings, int direction = -1);

struct TangentResult {
  Vector tangent;
  double bordered_sign = 0.0;
};

/// Unit null direction of [J | G_p] oriented so that <t, previous> > 0.
/// Throws degenerate-point when the bordered matrix is singular.
TangentResult tangent(const SparseMatrix& jacobian, const Vector& param_derivative,
                      const Vector& previous, const ArclengthMetric& metric);

struct CorrectorResult {
  bool converged = false;
  Vector fields;
  double param = 0.0;
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Newton on [G(x, p); <t, z - z_ref> - s] from `predicted`. Never throws on
/// non-convergence.
CorrectorResult corrector(const SteadyProblem& problem, const Vector& predicted,
                          const Vector& reference, const Vector& direction, double s,
                          const ContinuationSettings& settings);

/// Fully evaluated branch point at a corrected state: tangent, stability,
/// measures.
BranchPoint evaluate_point(const SteadyProblem& problem, Vector fields, double param,
                           const Vector& previous_tangent, const ContinuationSettings& settings);

Branch continue_branch(const SteadyProblem& problem, const BranchPoint& start,
                       const ContinuationSettings& settings);

/// Bisection-localizes an event of `kind` between two consecutive points.
/// Throws invalid-bracket when the test function does not change across it.
EventRecord locate_event(const SteadyProblem& problem, const BranchPoint& left,
                         const BranchPoint& right, EventKind kind,
                         const ContinuationSettings& settings);

/// Null vector of the Jacobian at `s` (inverse iteration), sign-normalized so
/// that the last component at node 0 is positive when it is not negligible.
Vector kernel_vector(const SteadyProblem& problem, const State& s);

/// Orthonormal basis of the `count` smallest-magnitude directions of the
/// Jacobian at `s` (block inverse iteration), for multiple kernels.
std::vector<Vector> kernel_basis(const SteadyProblem& problem, const State& s, int count);

Branch switch_branch(const SteadyProblem& problem, const EventRecord& event, int direction,
                     const ContinuationSettings& settings);

/// Switch along an explicit direction in field space (e.g. a combination of
/// kernel vectors at a multiplicity-2 event).
Branch switch_branch_along(const SteadyProblem& problem, const EventRecord& event,
                           const Vector& field_direction, const ContinuationSettings& settings);

/// Max-norm of the residual and the arclength constraint of stored points.
double max_residual(const SteadyProblem& problem, const Branch& branch);

}  // namespace xdcont
