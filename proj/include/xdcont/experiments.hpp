#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xdcont/continuation.hpp"

namespace xdcont {

struct SweepConfig {
  Params params;
  DomainSpec domain = DomainSpec::interval(1.0);
  int nx = 26;
  int ny = 101;
  /// "d" or "r1".
  std::string param_name = "d";
  std::vector<double> eps_list{0.05, 0.01, 0.005, 0.001};
  double param_start = 0.04;
  int direction = -1;
  /// Number of leading branch points kept per eps (d study).
  int events = 3;
  ContinuationSettings settings;
  int threads = 1;
};

struct SweepRow {
  double eps = 0.0;
  /// 1-based position of the event along the homogeneous branch.
  int index = 0;
  EventKind kind = EventKind::branch_point;
  std::optional<double> value;
  std::optional<double> reference;
};

struct SweepResult {
  std::string param_name;
  std::vector<SweepRow> rows;
  /// Cross-diffusion values on the same mesh, in branch order.
  std::vector<double> reference;
};

/// Default eps ladders for the two studies.
std::vector<double> default_eps_ladder(const std::string& param_name);

/// Homogeneous-branch continuation of the fast model for every eps. Runs are
/// independent and may use `threads` workers; rows are sorted by (eps desc,
/// index).
SweepResult sweep_epsilon(const SweepConfig& config);

/// Reference values of the cross-diffusion system on the same mesh.
std::vector<double> cross_reference(const SweepConfig& config);

struct OrderFit {
  int index = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int rows_used = 0;
};

/// Least-squares slope of log|ref - value| against log eps per event index.
/// Throws insufficient_data when any event has fewer than 3 usable rows.
std::vector<OrderFit> fit_order(const SweepResult& result);

/// Same fit for one event only.
OrderFit fit_order(const SweepResult& result, int index);

struct HalfBranch {
  int origin = -1;  // index into RingReport::branch_points
  int direction = 0;
  std::optional<int> landing;
  int landing_side = 0;
  Branch branch;
};

struct RingReport {
  std::vector<EventRecord> branch_points;  // homogeneous-branch events, ascending
  std::vector<HalfBranch> halves;
  int closed_loops = 0;
  int open_segments = 0;
  /// Branch-point indices grouped by loop.
  std::vector<std::vector<int>> loops;
};

struct RingOptions {
  double param_lo = 0.0;
  double param_hi = 1.0;
  /// Homogeneous continuation starts here and runs upward.
  double param_start = 0.0;
  /// Window for the switched branches; defaults to [param_lo, param_hi]. Loops
  /// may leave the range where the homogeneous state is admissible.
  std::optional<double> branch_lo;
  std::optional<double> branch_hi;
  ContinuationSettings settings;
};

/// Traces every branch emanating from the homogeneous branch and counts closed
/// loops of non-homogeneous states.
RingReport ring_report(const SteadyProblem& problem, const RingOptions& opts);

}  // namespace xdcont
