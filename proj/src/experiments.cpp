#include "xdcont/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "xdcont/error.hpp"
#include "xdcont/turing.hpp"

namespace xdcont {

std::vector<double> default_eps_ladder(const std::string& param_name) {
  if (param_name == "r1") return {0.01, 0.005, 0.001, 5e-4, 4e-4, 1e-4};
  return {0.05, 0.01, 0.005, 0.001};
}

namespace {

std::shared_ptr<const Mesh> sweep_mesh(const SweepConfig& c) {
  return std::make_shared<const Mesh>(build_mesh(c.domain, c.nx, c.ny));
}

std::vector<double> homogeneous_branch_points(const SteadyProblem& problem, const SweepConfig& c) {
  const BranchPoint start = init_from_homogeneous(problem, c.param_start, c.settings, c.direction);
  const Branch b = continue_branch(problem, start, c.settings);
  std::vector<double> out;
  for (const EventRecord& ev : b.events)
    if (ev.kind == EventKind::branch_point)
      for (int k = 0; k < std::max(1, ev.multiplicity); ++k) out.push_back(ev.param_value);
  return out;
}

double nearest(const std::vector<double>& values, double x) {
  double best = values.front();
  for (double v : values)
    if (std::abs(v - x) < std::abs(best - x)) best = v;
  return best;
}

}  // namespace

std::vector<double> cross_reference(const SweepConfig& config) {
  const auto mesh = sweep_mesh(config);
  if (config.param_name == "d") {
    const int n = std::min(mesh->node_count(), std::max(64, 4 * config.events));
    const std::vector<double> lambdas = discrete_laplace_spectrum(*mesh, n);
    std::vector<double> ds;
    for (double lambda : lambdas) {
      if (lambda <= 1e-9) continue;
      if (auto d = critical_d(config.params, lambda)) ds.push_back(*d);
    }
    std::sort(ds.begin(), ds.end(), std::greater<>());
    if (static_cast<int>(ds.size()) > config.events) ds.resize(config.events);
    return ds;
  }
  const SteadyProblem problem(mesh, config.params, ModelKind::cross, config.param_name);
  return homogeneous_branch_points(problem, config);
}

SweepResult sweep_epsilon(const SweepConfig& config) {
  require(!config.eps_list.empty(), "sweep_epsilon: empty eps list");
  for (double e : config.eps_list) require(e > 0.0, "sweep_epsilon: eps must be positive");
  config.settings.validate();
  const auto mesh = sweep_mesh(config);

  SweepResult result;
  result.param_name = config.param_name;
  result.reference = cross_reference(config);

  std::vector<std::vector<double>> found(config.eps_list.size());
  std::vector<std::exception_ptr> errors(config.eps_list.size());
  std::atomic<size_t> next{0};
  const auto worker = [&] {
    for (size_t i = next++; i < config.eps_list.size(); i = next++) {
      try {
        Params p = config.params;
        p.eps = config.eps_list[i];
        const SteadyProblem problem(mesh, p, ModelKind::fast, config.param_name);
        found[i] = homogeneous_branch_points(problem, config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int nthreads = std::clamp<int>(config.threads, 1, static_cast<int>(config.eps_list.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<size_t> order(config.eps_list.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return config.eps_list[a] > config.eps_list[b]; });

  const bool by_index = config.param_name == "d";
  for (size_t i : order) {
    const std::vector<double>& vals = found[i];
    const int count = by_index ? config.events : static_cast<int>(vals.size());
    for (int k = 0; k < count; ++k) {
      SweepRow row;
      row.eps = config.eps_list[i];
      row.index = k + 1;
      if (k < static_cast<int>(vals.size())) row.value = vals[k];
      if (by_index) {
        if (k < static_cast<int>(result.reference.size())) row.reference = result.reference[k];
      } else if (row.value && !result.reference.empty()) {
        row.reference = nearest(result.reference, *row.value);
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

OrderFit fit_order(const SweepResult& result, int index) {
  std::vector<double> xs, ys;
  for (const SweepRow& r : result.rows) {
    if (r.index != index || !r.value || !r.reference) continue;
    const double diff = std::abs(*r.reference - *r.value);
    if (!(diff > 0.0)) continue;
    xs.push_back(std::log(r.eps));
    ys.push_back(std::log(diff));
  }
  const int n = static_cast<int>(xs.size());
  if (n < 3)
    fail(ErrorCode::insufficient_data,
         "fit_order: event " + std::to_string(index) + " has " + std::to_string(n) + " usable rows");
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) fail(ErrorCode::insufficient_data, "fit_order: eps values are not distinct");
  OrderFit fit;
  fit.index = index;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.rows_used = n;
  return fit;
}

std::vector<OrderFit> fit_order(const SweepResult& result) {
  std::vector<int> indices;
  for (const SweepRow& r : result.rows)
    if (std::find(indices.begin(), indices.end(), r.index) == indices.end()) indices.push_back(r.index);
  std::sort(indices.begin(), indices.end());
  std::vector<OrderFit> fits;
  for (int i : indices) fits.push_back(fit_order(result, i));
  return fits;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

int port(int bp, int side) { return 2 * bp + (side > 0 ? 0 : 1); }

}  // namespace

RingReport ring_report(const SteadyProblem& problem, const RingOptions& opts) {
  RingReport report;
  ContinuationSettings hs = opts.settings;
  hs.param_lo = opts.param_lo;
  hs.param_hi = opts.param_hi;
  const BranchPoint start = init_from_homogeneous(problem, opts.param_start, hs, +1);
  const Branch hom = continue_branch(problem, start, hs);
  for (const EventRecord& ev : hom.events)
    if (ev.kind == EventKind::branch_point && ev.param_value > opts.param_lo &&
        ev.param_value < opts.param_hi)
      report.branch_points.push_back(ev);
  std::sort(report.branch_points.begin(), report.branch_points.end(),
            [](const EventRecord& a, const EventRecord& b) { return a.param_value < b.param_value; });
  const int nbp = static_cast<int>(report.branch_points.size());
  for (int i = 0; i < nbp; ++i) report.branch_points[i].id = i;
  if (nbp == 0) return report;

  double spacing = opts.param_hi - opts.param_lo;
  for (int i = 1; i < nbp; ++i)
    spacing = std::min(spacing, report.branch_points[i].param_value - report.branch_points[i - 1].param_value);
  const double match_tol = 0.25 * spacing;

  std::vector<Vector> kernels(nbp);
  for (int i = 0; i < nbp; ++i) kernels[i] = kernel_vector(problem, report.branch_points[i].state);

  ContinuationSettings ss = hs;
  ss.stop_on_homogeneous = true;
  ss.param_lo = opts.branch_lo.value_or(opts.param_lo);
  ss.param_hi = opts.branch_hi.value_or(opts.param_hi);
  std::vector<bool> visited(2 * nbp, false);
  UnionFind uf(2 * nbp);
  std::vector<bool> open(2 * nbp, false);
  for (int i = 0; i < nbp; ++i) uf.unite(port(i, +1), port(i, -1));

  for (int i = 0; i < nbp; ++i) {
    if (report.branch_points[i].multiplicity > 1) continue;
    for (int side : {+1, -1}) {
      if (visited[port(i, side)]) continue;
      visited[port(i, side)] = true;
      HalfBranch hb;
      hb.origin = i;
      hb.direction = side;
      bool ok = true;
      try {
        hb.branch = switch_branch(problem, report.branch_points[i], side, ss);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::switch_failure) throw;
        ok = false;
      }
      if (ok && hb.branch.status == BranchStatus::landed && hb.branch.landing_param) {
        const double lp = *hb.branch.landing_param;
        int best = -1;
        for (int j = 0; j < nbp; ++j)
          if (std::abs(report.branch_points[j].param_value - lp) <= match_tol &&
              (best < 0 || std::abs(report.branch_points[j].param_value - lp) <
                               std::abs(report.branch_points[best].param_value - lp)))
            best = j;
        if (best >= 0) {
          hb.landing = best;
          const Vector offset = hb.branch.landing_state->fields -
                                problem.homogeneous(hb.branch.landing_state->param_value);
          hb.landing_side = offset.dot(kernels[best]) >= 0.0 ? +1 : -1;
          visited[port(best, hb.landing_side)] = true;
          uf.unite(port(i, side), port(best, hb.landing_side));
        }
      }
      if (!hb.landing) open[port(i, side)] = true;
      report.halves.push_back(std::move(hb));
    }
  }

  std::map<int, std::vector<int>> groups;
  std::map<int, bool> group_open;
  for (int i = 0; i < nbp; ++i) {
    if (report.branch_points[i].multiplicity > 1) continue;
    const int root = uf.find(port(i, +1));
    groups[root].push_back(i);
    group_open[root] = group_open[root] || open[port(i, +1)] || open[port(i, -1)];
  }
  for (const auto& [root, members] : groups) {
    if (group_open[root]) {
      ++report.open_segments;
    } else {
      ++report.closed_loops;
      report.loops.push_back(members);
    }
  }
  return report;
}

}  // namespace xdcont
