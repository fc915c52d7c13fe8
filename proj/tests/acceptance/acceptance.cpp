// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "xdcont/cli_io.hpp"
#include "xdcont/continuation.hpp"
#include "xdcont/error.hpp"
#include "xdcont/experiments.hpp"
#include "xdcont/stability.hpp"
#include "xdcont/turing.hpp"

using namespace xdcont;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Report {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      if (!failures_.empty()) failures_ += "; ";
      failures_ += what;
    }
  }
  void note(const std::string& s) {
    if (!notes_.empty()) notes_ += "; ";
    notes_ += s;
  }
  Outcome outcome() const { return {pass_, pass_ ? notes_ : failures_ + (notes_.empty() ? "" : " | " + notes_)}; }

 private:
  bool pass_ = true;
  std::string failures_;
  std::string notes_;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Number of decimals printed in a table entry such as "0.02049".
double printed_unit(const std::string& entry) {
  const auto dot = entry.find('.');
  const int decimals = dot == std::string::npos ? 0 : static_cast<int>(entry.size() - dot - 1);
  return std::pow(10.0, -decimals);
}

/// The computed value reproduces a printed table entry when rounding or
/// truncating it to the printed precision gives that entry.
bool reproduces(double value, const std::string& entry) {
  const double unit = printed_unit(entry);
  const double ref = std::stod(entry);
  const double rounded = std::round(value / unit) * unit;
  const double truncated = std::trunc(value / unit) * unit;
  return std::abs(rounded - ref) < 0.01 * unit || std::abs(truncated - ref) < 0.01 * unit;
}

std::shared_ptr<const Mesh> interval_mesh(int n) {
  return std::make_shared<const Mesh>(build_interval_mesh(1.0, n));
}

std::shared_ptr<const Mesh> default_rectangle() {
  return std::make_shared<const Mesh>(build_rectangle_mesh(DomainSpec::rectangle(1.0, 4.0, -0.5, -2.0), 26, 101));
}

std::vector<double> branch_points(const Branch& b) {
  std::vector<double> out;
  for (const auto& e : b.events)
    if (e.kind == EventKind::branch_point) out.push_back(e.param_value);
  return out;
}

Branch homogeneous_d_branch(const SteadyProblem& prob, double lo, double hi, double start,
                            ContinuationSettings s = {}) {
  s.param_lo = lo;
  s.param_hi = hi;
  return continue_branch(prob, init_from_homogeneous(prob, start, s, -1), s);
}

// ---------------------------------------------------------------- 1

Outcome turing_1d() {
  Report r;
  const auto t0 = Clock::now();
  PredictionOptions o;
  o.lo = 0.0;
  o.hi = 0.04;
  o.lambda_max = 25.0 * M_PI * M_PI + 1.0;
  const auto preds = predict_bifurcations(Params::table1(), DomainSpec::interval(1.0), "d", o);
  const std::vector<std::string> table{"0.032788", "0.02049", "0.01138", "0.00699", "0.00467"};
  r.check(preds.size() == table.size(), "expected 5 predictions, got " + std::to_string(preds.size()));
  for (size_t k = 0; k < std::min(preds.size(), table.size()); ++k) {
    r.check(preds[k].mode.indices.front()[0] == static_cast<int>(k) + 1, "mode order");
    r.check(reproduces(preds[k].critical_value, table[k]),
            "k=" + std::to_string(k + 1) + fmt(" got %.7f", preds[k].critical_value) + " want " + table[k]);
  }
  const double secs = seconds_since(t0);
  r.check(secs < 1.0, fmt("runtime %.3f s", secs));
  r.note(fmt("d_B(lambda_1)=%.7f, runtime %.4f s", preds.empty() ? NAN : preds[0].critical_value, secs));
  return r.outcome();
}

// ---------------------------------------------------------------- 2

Outcome turing_2d() {
  Report r;
  const auto t0 = Clock::now();
  PredictionOptions o;
  o.lo = 0.0;
  o.hi = 0.04;
  o.lambda_max = 41.0;
  const auto preds = predict_bifurcations(Params::table1(), DomainSpec::rectangle(1.0, 4.0), "d", o);
  struct Row {
    int n, m;
    std::string value;
  };
  const std::vector<Row> table{{1, 1, "0.0329340"}, {0, 4, "0.032788"}, {1, 0, "0.032788"}, {1, 2, "0.032783"},
                               {0, 5, "0.031545"},  {1, 3, "0.031545"}, {1, 4, "0.02921"},  {0, 6, "0.027865"},
                               {1, 5, "0.02627"},   {0, 7, "0.02397"},  {0, 3, "0.0236"},   {0, 8, "0.02049"},
                               {2, 0, "0.02049"},   {2, 1, "0.02029"}};
  // position of each table mode in the computed (descending) list
  std::vector<int> position;
  for (const Row& row : table) {
    int found = -1;
    double value = NAN;
    for (size_t i = 0; i < preds.size(); ++i)
      for (const auto& idx : preds[i].mode.indices)
        if (idx[0] == row.n && idx[1] == row.m) {
          found = static_cast<int>(i);
          value = preds[i].critical_value;
        }
    const std::string tag = "(" + std::to_string(row.n) + "," + std::to_string(row.m) + ")";
    r.check(found >= 0, tag + " missing");
    if (found >= 0) r.check(reproduces(value, row.value), tag + fmt(" got %.7f", value) + " want " + row.value);
    position.push_back(found);
  }
  r.check(std::is_sorted(position.begin(), position.end()), "table order not reproduced");
  r.check(position[1] == position[2], "(0,4)/(1,0) not degenerate");
  r.check(position[10] < position[11], "(0,3) not before (0,8)");
  const double secs = seconds_since(t0);
  r.check(secs < 1.0, fmt("runtime %.3f s", secs));
  r.note("14 rows matched, runtime " + fmt("%.4f s", secs));
  return r.outcome();
}

// ---------------------------------------------------------------- 3

Outcome continuation_vs_oracle() {
  Report r;
  const auto t0 = Clock::now();
  const Params p = Params::table1(0.04);
  std::vector<std::vector<double>> located;
  for (int n : {26, 51, 101}) {
    const SteadyProblem prob(interval_mesh(n), p, ModelKind::cross, "d");
    located.push_back(branch_points(homogeneous_d_branch(prob, 0.009, 0.05, 0.04)));
  }
  const double table_db[] = {0.03279, 0.02046, 0.01133};
  const double pi2 = M_PI * M_PI;
  for (int k = 0; k < 3; ++k) {
    const std::string tag = "B" + std::to_string(k + 1);
    if (located[0].size() <= static_cast<size_t>(k) || located[2].size() <= static_cast<size_t>(k)) {
      r.check(false, tag + " not located on every mesh");
      continue;
    }
    r.check(std::abs(located[0][k] - table_db[k]) <= 2e-4, tag + fmt(" at %.6f (26 nodes)", located[0][k]));
    const double exact = critical_d(p, pi2 * (k + 1) * (k + 1)).value();
    const double e26 = std::abs(located[0][k] - exact);
    const double e51 = std::abs(located[1][k] - exact);
    const double e101 = std::abs(located[2][k] - exact);
    const double order = std::log(e26 / e101) / std::log(100.0 / 25.0);
    r.check(e51 < e26 && e101 < e51, tag + " error not decreasing under refinement");
    r.check(order >= 1.8, tag + fmt(" order %.3f", order));
    r.note(tag + fmt(" %.6f (26) order %.2f", located[0][k], order));
  }
  const double secs = seconds_since(t0);
  r.check(secs < 60.0, fmt("runtime %.1f s", secs));
  r.note(fmt("runtime %.1f s", secs));
  return r.outcome();
}

// ---------------------------------------------------------------- 4

double worst_block_mismatch(const SteadyProblem& prob, double d, const std::vector<double>& lambdas,
                            const SpectrumOptions& so, int& checked) {
  const auto lin = linearize_model(prob.params_at(d), prob.model());
  const auto spec = leading_spectrum(prob.jacobian(prob.homogeneous(d), d), prob.mass_block(), so);
  double worst = 0.0;
  for (const Complex& mu : spec.eigenvalues) {
    double best = 1e300;
    for (double l : lambdas)
      for (const Complex& z : mode_eigenvalues(lin, l)) best = std::min(best, std::abs(z - mu));
    worst = std::max(worst, best / std::abs(mu));
    ++checked;
  }
  return worst;
}

Outcome stability_block_check() {
  Report r;
  const auto t0 = Clock::now();
  const auto mesh = interval_mesh(26);
  const SteadyProblem prob(mesh, Params::table1(0.04), ModelKind::cross, "d");
  const auto lambdas = discrete_laplace_spectrum(*mesh, mesh->node_count());
  SpectrumOptions so;
  so.count = 10;
  double worst = 0.0;
  int checked = 0;
  for (int i = 0; i < 20; ++i) {
    const double d = 0.003 + (0.04 - 0.003) * i / 19.0;
    worst = std::max(worst, worst_block_mismatch(prob, d, lambdas, so, checked));
  }
  r.check(worst <= 1e-8, fmt("worst relative mismatch %.3g", worst));
  const double secs = seconds_since(t0);
  r.check(secs < 60.0, fmt("runtime %.1f s", secs));
  r.note(std::to_string(checked) + fmt(" eigenvalues at 20 states, worst relative mismatch %.2g, runtime %.2f s", worst, secs));
  return r.outcome();
}

// ---------------------------------------------------------------- 5

Outcome eps_convergence() {
  Report r;
  const auto t0 = Clock::now();
  RunConfig cfg = load_config(XDCONT_CONFIG_DIR "/table1_1d_eps.json");
  SweepConfig c;
  c.params = cfg.params;
  c.domain = cfg.domain;
  c.nx = cfg.nx;
  c.ny = cfg.ny;
  c.param_name = "d";
  c.eps_list = {0.05, 0.01, 0.005, 0.001};
  c.param_start = cfg.param_start;
  c.direction = cfg.direction;
  c.events = 3;
  c.settings = cfg.continuation;
  const SweepResult res = sweep_epsilon(c);
  const auto fits = fit_order(res);
  for (const auto& f : fits) {
    r.check(f.slope >= 0.7 && f.slope <= 1.3, "B" + std::to_string(f.index) + fmt(" slope %.3f", f.slope));
    r.note("B" + std::to_string(f.index) + fmt(" slope %.3f", f.slope));
  }
  r.check(fits.size() == 3, "expected fits for B1-B3");
  std::optional<double> b1;
  for (const auto& row : res.rows)
    if (row.eps == 0.05 && row.index == 1) b1 = row.value;
  r.check(b1 && *b1 < 0.015, b1 ? fmt("eps=0.05 B1 at %.5f", *b1) : "eps=0.05 B1 missing");
  if (b1) r.note(fmt("eps=0.05 B1 %.5f", *b1));
  const double secs = seconds_since(t0);
  r.check(secs < 600.0, fmt("runtime %.1f s", secs));
  r.note(fmt("runtime %.1f s", secs));
  return r.outcome();
}

// ---------------------------------------------------------------- 6

RingReport rings_from(const std::string& config) {
  const RunConfig c = load_config(fs::path(XDCONT_CONFIG_DIR) / config);
  const SteadyProblem prob = build_problem(c);
  RingOptions o;
  o.param_lo = c.continuation.param_lo;
  o.param_hi = c.continuation.param_hi;
  o.param_start = c.param_start;
  o.branch_lo = c.branch_lo;
  o.branch_hi = c.branch_hi;
  o.settings = c.continuation;
  return ring_report(prob, o);
}

Outcome ring_topology() {
  Report r;
  const auto t0 = Clock::now();
  const RingReport fast = rings_from("r1_fast_rings.json");
  const RingReport cross = rings_from("r1_cross_rings.json");
  r.check(fast.closed_loops == 1, "eps=0.01 loops " + std::to_string(fast.closed_loops));
  r.check(cross.closed_loops == 3, "cross loops " + std::to_string(cross.closed_loops));
  r.note("eps=0.01: " + std::to_string(fast.closed_loops) + " loop(s), " + std::to_string(fast.open_segments) +
         " open; cross: " + std::to_string(cross.closed_loops) + " loop(s), " +
         std::to_string(cross.open_segments) + " open");
  const double secs = seconds_since(t0);
  r.check(secs < 1200.0, fmt("runtime %.1f s", secs));
  r.note(fmt("runtime %.1f s", secs));
  return r.outcome();
}

// ---------------------------------------------------------------- 7, 8 (shared 2D data)

struct TwoD {
  std::shared_ptr<const Mesh> mesh = default_rectangle();
  SteadyProblem prob{mesh, Params::table1(0.04), ModelKind::cross, "d"};
  ContinuationSettings settings;
  Branch hom;
  const EventRecord* first_simple = nullptr;
  double seconds = 0.0;
};

TwoD& two_d() {
  static TwoD data = [] {
    TwoD t;
    const auto t0 = Clock::now();
    t.settings.n_eigs = 20;
    t.hom = homogeneous_d_branch(t.prob, 0.0325, 0.05, 0.04, t.settings);
    for (const auto& e : t.hom.events)
      if (e.kind == EventKind::branch_point && e.multiplicity == 1) {
        t.first_simple = &e;
        break;
      }
    t.seconds = seconds_since(t0);
    return t;
  }();
  return data;
}

/// Number of stable points of `b` at parameter value x, counted as crossings
/// of x by segments whose endpoints are both stable.
int stable_crossings(const Branch& b, double x) {
  int count = 0;
  for (size_t i = 1; i < b.points.size(); ++i) {
    const BranchPoint& a = b.points[i - 1];
    const BranchPoint& c = b.points[i];
    if (a.n_unstable != 0 || c.n_unstable != 0) continue;
    if ((a.param() - x) * (c.param() - x) < 0.0) ++count;
  }
  return count;
}

Outcome events_2d(Branch* first_branch_out) {
  Report r;
  const auto t0 = Clock::now();
  TwoD& t = two_d();
  const auto bps = branch_points(t.hom);
  r.check(!bps.empty(), "no branch point on the homogeneous branch");
  if (!bps.empty()) {
    r.check(std::abs(bps.front() - 0.0329346) <= 5e-4, fmt("first BP %.7f", bps.front()));
    r.note(fmt("first BP %.7f", bps.front()));
  }
  if (!t.first_simple) {
    r.check(false, "no simple branch point to switch at");
    return r.outcome();
  }
  const double origin = t.first_simple->param_value;
  ContinuationSettings s = t.settings;
  s.param_lo = origin - 1e-3;
  s.param_hi = origin + 1e-3;
  s.max_steps = 200;
  int stable_states = 0;
  std::vector<double> fold_params;
  for (int dir : {+1, -1}) {
    Branch b = switch_branch(t.prob, *t.first_simple, dir, s);
    std::vector<double> folds;
    for (const auto& e : b.events)
      if (e.kind == EventKind::fold) folds.push_back(e.param_value);
    r.check(folds.size() == 2, "direction " + std::to_string(dir) + ": " + std::to_string(folds.size()) + " folds");
    if (folds.size() == 2) {
      const double mid = 0.5 * (folds[0] + folds[1]);
      stable_states += stable_crossings(b, mid);
      if (dir == 1) fold_params = folds;
    }
    if (dir == 1 && first_branch_out) *first_branch_out = std::move(b);
  }
  r.check(stable_states >= 4, "coexisting stable states " + std::to_string(stable_states));
  if (fold_params.size() == 2)
    r.note(fmt("folds at %.7f and %.7f", fold_params[0], fold_params[1]) + ", " + std::to_string(stable_states) +
           " stable states between them");
  const double secs = t.seconds + seconds_since(t0);
  r.check(secs < 1800.0, fmt("runtime %.1f s", secs));
  r.note(fmt("runtime %.1f s", secs));
  return r.outcome();
}

Outcome hopf_2d() {
  Report r;
  const auto t0 = Clock::now();
  TwoD& t = two_d();
  if (!t.first_simple) {
    r.check(false, "no simple branch point to switch at");
    return r.outcome();
  }
  ContinuationSettings s = t.settings;
  s.param_lo = 0.0270;
  s.param_hi = 0.05;
  s.max_steps = 40;
  const Branch first = switch_branch(t.prob, *t.first_simple, +1, s);
  const EventRecord* secondary_bp = nullptr;
  for (const auto& e : first.events)
    if (e.kind == EventKind::branch_point && e.multiplicity == 1) {
      secondary_bp = &e;
      break;
    }
  r.check(secondary_bp != nullptr, "no branch point on the first branch");
  if (!secondary_bp) return r.outcome();
  r.note(fmt("secondary BP %.7f", secondary_bp->param_value));
  s.param_lo = 0.025;
  s.max_steps = 40;
  const Branch second = switch_branch(t.prob, *secondary_bp, +1, s);
  const EventRecord* hopf = nullptr;
  for (const auto& e : second.events)
    if (e.kind == EventKind::hopf) {
      hopf = &e;
      break;
    }
  r.check(hopf != nullptr, "no Hopf event on the secondary branch");
  if (hopf) {
    r.check(std::abs(hopf->crossing.imag()) >= 1e-4, fmt("|Im| %.3g", std::abs(hopf->crossing.imag())));
    r.check(hopf->n_unstable_after - hopf->n_unstable_before == 2 ||
                hopf->n_unstable_before - hopf->n_unstable_after == 2,
            "unstable count does not change by a pair");
    r.note(fmt("Hopf at d=%.7f", hopf->param_value) +
           fmt(", crossing %.2g%+.4gi", hopf->crossing.real(), hopf->crossing.imag()));
  }
  r.note(fmt("runtime %.1f s", seconds_since(t0)));
  return r.outcome();
}

// ---------------------------------------------------------------- 9

Outcome fast_invariants() {
  Report r;
  const auto t0 = Clock::now();
  Params base = Params::table1(0.03);
  std::vector<FastEquilibrium> eq;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
    base.eps = eps;
    eq.push_back(equilibrium_fast(base));
  }
  bool bitwise = true;
  for (const auto& e : eq) bitwise = bitwise && e.u1 == eq[0].u1 && e.u2 == eq[0].u2 && e.v == eq[0].v;
  r.check(bitwise, "homogeneous equilibrium depends on eps");

  const auto mesh = interval_mesh(26);
  for (double eps : {1e-3, 1e-4}) {
    Params p = Params::table1(0.04);
    p.eps = eps;
    const SteadyProblem prob(mesh, p, ModelKind::fast, "d");
    ContinuationSettings s;
    s.param_lo = 0.005;
    s.param_hi = 0.05;
    const Branch hom = continue_branch(prob, init_from_homogeneous(prob, 0.04, s), s);
    const EventRecord* b1 = nullptr;
    for (const auto& e : hom.events)
      if (e.kind == EventKind::branch_point) {
        b1 = &e;
        break;
      }
    if (!b1) {
      r.check(false, fmt("eps=%g: no branch point", eps));
      continue;
    }
    s.max_steps = 150;
    double worst = 0.0, worst_res = 0.0;
    size_t states = 0;
    for (int dir : {+1, -1}) {
      const Branch b = switch_branch(prob, *b1, dir, s);
      for (const auto& pt : b.points) {
        worst = std::max(worst, exchange_term(*mesh, p, pt.state.fields).lpNorm<Eigen::Infinity>());
        worst_res = std::max(worst_res, prob.residual(pt.state.fields, pt.param()).lpNorm<Eigen::Infinity>());
        ++states;
      }
    }
    r.check(states > 20, fmt("eps=%g: too few states", eps));
    r.check(worst_res <= s.newton_tol, fmt("eps=%g: residual %.2g", eps, worst_res));
    r.check(worst <= 10.0 * eps, fmt("eps=%g: defect %.3g", eps, worst));
    r.note(fmt("eps=%g: max defect %.3g", eps, worst) + " over " + std::to_string(states) + " states");
  }
  const double secs = seconds_since(t0);
  r.check(secs < 300.0, fmt("runtime %.1f s", secs));
  r.note(fmt("runtime %.1f s", secs));
  return r.outcome();
}

// ---------------------------------------------------------------- 10

Vector perturbed(const Mesh& mesh, const Params& p, ModelKind model, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  Vector x = homogeneous_fields(mesh, p, model);
  const int n = mesh.node_count();
  for (int c = 0; c < components(model); ++c) {
    const double a = phase(rng), b = phase(rng);
    for (int i = 0; i < n; ++i) x[c * n + i] *= 1.0 + 0.3 * std::sin(3.0 * mesh.x(i) + a) * std::cos(2.0 * mesh.y(i) + b);
  }
  return x;
}

double fd_error(const SteadyProblem& prob, const Vector& x, double pv, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  const SparseMatrix j = prob.jacobian(x, pv);
  const double h = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    Vector dx(x.size());
    for (int i = 0; i < dx.size(); ++i) dx[i] = normal(rng);
    dx /= dx.norm();
    const Vector fd = (prob.residual(x + h * dx, pv) - prob.residual(x - h * dx, pv)) / (2 * h);
    const Vector jd = j * dx;
    worst = std::max(worst, (fd - jd).norm() / jd.norm());
  }
  return worst;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome property_suite() {
  Report r;
  const auto t0 = Clock::now();
  const std::vector<std::shared_ptr<const Mesh>> meshes{
      interval_mesh(26), interval_mesh(101),
      std::make_shared<const Mesh>(build_rectangle_mesh(DomainSpec::rectangle(1.0, 4.0), 26, 101)),
      std::make_shared<const Mesh>(build_rectangle_mesh(DomainSpec::rectangle(2.0, 1.0), 13, 7))};

  double worst_k = 0.0, worst_m = 0.0;
  for (const auto& m : meshes) {
    const SparseMatrix k = assemble_stiffness(*m, 1.0);
    double knorm = 0.0;
    for (int c = 0; c < k.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(k, c); it; ++it) knorm += it.value() * it.value();
    worst_k = std::max(worst_k, (k * Vector::Ones(m->node_count())).norm() / std::sqrt(knorm));
    const SparseMatrix mass = assemble_mass(*m, 1.0);
    const double total = Vector::Ones(m->node_count()).dot(mass * Vector::Ones(m->node_count()));
    worst_m = std::max(worst_m, std::abs(total - m->domain().measure()) / m->domain().measure());
  }
  r.check(worst_k <= 1e-12, fmt("|K 1|/|K| = %.2g", worst_k));
  r.check(worst_m <= 1e-12, fmt("mass total error %.2g", worst_m));

  double worst_fd = 0.0;
  unsigned seed = 1;
  for (const auto& m : {meshes[0], meshes[3]})
    for (ModelKind kind : {ModelKind::cross, ModelKind::fast}) {
      Params p = Params::table1(0.025);
      p.eps = 1e-3;
      const SteadyProblem prob(m, p, kind, "d");
      worst_fd = std::max(worst_fd, fd_error(prob, perturbed(*m, p, kind, seed), 0.025, seed + 100));
      ++seed;
    }
  r.check(worst_fd <= 1e-6, fmt("Jacobian vs central differences %.2g", worst_fd));

  // reflection symmetry of switched 1D states
  const auto line = meshes[0];
  const SteadyProblem prob(line, Params::table1(0.04), ModelKind::cross, "d");
  ContinuationSettings s;
  s.param_lo = 0.01;
  s.param_hi = 0.05;
  const Branch hom = continue_branch(prob, init_from_homogeneous(prob, 0.04, s), s);
  const Branch sw = switch_branch(prob, hom.events.front(), +1, s);
  const int n = line->node_count();
  double worst_reflect = 0.0;
  for (const auto& pt : sw.points) {
    Vector x(pt.state.fields.size());
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < n; ++i) x[c * n + line->mirror_x(i)] = pt.state.fields[c * n + i];
    for (int it = 0; it < 2; ++it) {
      Eigen::SparseLU<SparseMatrix> lu(prob.jacobian(x, pt.param()));
      x -= lu.solve(prob.residual(x, pt.param()));
    }
    worst_reflect = std::max(worst_reflect, prob.residual(x, pt.param()).lpNorm<Eigen::Infinity>());
  }
  r.check(worst_reflect <= s.newton_tol, fmt("reflected state residual %.2g", worst_reflect));

  // byte-identical CSV output
  const fs::path root = fs::temp_directory_path() / "xdcont_acceptance";
  fs::remove_all(root);
  RunConfig c = load_config(XDCONT_CONFIG_DIR "/table1_1d.json");
  c.diagram.switch_points = 2;
  std::ostringstream log;
  c.output_dir = root / "a";
  const int ra = run(c, log);
  c.output_dir = root / "b";
  const int rb = run(c, log);
  r.check(ra == 0 && rb == 0, "diagram run failed");
  int files = 0, identical = 0;
  if (ra == 0 && rb == 0)
    for (const auto& e : fs::directory_iterator(root / "a" / "branches")) {
      ++files;
      if (slurp(e.path()) == slurp(root / "b" / "branches" / e.path().filename())) ++identical;
    }
  r.check(files > 0 && files == identical, std::to_string(identical) + "/" + std::to_string(files) + " CSVs identical");
  fs::remove_all(root);

  r.note(fmt("|K1|/|K| %.1g, mass err %.1g", worst_k, worst_m) + fmt(", FD %.1g, reflect %.1g", worst_fd, worst_reflect) +
         ", " + std::to_string(files) + " identical CSVs");
  const double secs = seconds_since(t0);
  r.check(secs < 120.0, fmt("runtime %.1f s", secs));
  r.note(fmt("runtime %.1f s", secs));
  return r.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Turing 1D table", turing_1d},
      {"Turing 2D table", turing_2d},
      {"continuation vs oracle (1D)", continuation_vs_oracle},
      {"stability block check", stability_block_check},
      {"eps-convergence (1D, d)", eps_convergence},
      {"r1 ring topology", ring_topology},
      {"2D events", [] { return events_2d(nullptr); }},
      {"2D Hopf detection", hopf_2d},
      {"fast-model invariants", fast_invariants},
      {"property suite", property_suite},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    if (!wanted(k)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", k, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
