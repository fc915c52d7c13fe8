#include "xdcont/cli_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "xdcont/error.hpp"

namespace xdcont {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Study s) {
  switch (s) {
    case Study::single_branch: return "single-branch";
    case Study::full_diagram: return "full-diagram";
    case Study::turing: return "turing";
    case Study::sweep_eps: return "sweep-eps";
    case Study::rings: return "rings";
  }
  return "unknown";
}

Study study_from_string(const std::string& name) {
  for (Study s : {Study::single_branch, Study::full_diagram, Study::turing, Study::sweep_eps, Study::rings})
    if (to_string(s) == name) return s;
  fail(ErrorCode::validation_error, "study: unknown value '" + name + "'");
}

// ---------------------------------------------------------------- config

namespace {

// Reads one JSON object, remembering consumed keys so leftovers can be
// rejected as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::parse_error, where() + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(ErrorCode::parse_error, field(key) + ": expected a number");
    return v.get<double>();
  }
  int integer(const std::string& key, int def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(ErrorCode::parse_error, field(key) + ": expected an integer");
    return v.get<int>();
  }
  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(ErrorCode::parse_error, field(key) + ": expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(ErrorCode::parse_error, field(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(ErrorCode::parse_error, field(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) fail(ErrorCode::parse_error, field(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::optional<std::pair<double, double>> range(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const auto v = numbers(key, {});
    if (v.size() != 2) fail(ErrorCode::parse_error, field(key) + ": expected [lo, hi]");
    if (!(v[1] > v[0])) fail(ErrorCode::validation_error, field(key) + ": lo must be below hi");
    return std::make_pair(v[0], v[1]);
  }
  std::optional<Section> child(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return Section(j_.at(key), field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(ErrorCode::validation_error, field(it.key()) + ": unknown key");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) fail(ErrorCode::validation_error, field + ": " + what);
}

}  // namespace

RunConfig parse_config(const json& j) {
  RunConfig c;
  Section root(j, "");
  c.model = model_kind_from_string(root.string("model", "cross"));
  c.study = study_from_string(root.string("study", "full-diagram"));
  c.output_dir = root.string("output_dir", "out");
  c.threads = root.integer("threads", 1);
  check(c.threads >= 1, "threads", "must be >= 1");
  c.seed = static_cast<std::uint64_t>(root.integer("seed", 0));

  if (auto d = root.child("domain")) {
    const std::string kind = d->string("kind", "interval");
    const DomainKind k = domain_kind_from_string(kind);
    const double lx = d->number("lx", 1.0);
    if (k == DomainKind::interval) {
      c.domain = DomainSpec::interval(lx, d->number("offset", 0.0));
    } else {
      const double ly = d->number("ly", 4.0);
      c.domain = DomainSpec::rectangle(lx, ly);
      if (d->has("offset")) {
        const auto off = d->numbers("offset", {});
        check(off.size() == 2, d->field("offset"), "expected [x0, y0]");
        c.domain = DomainSpec::rectangle(lx, ly, off[0], off[1]);
      }
    }
    d->finish();
  }
  try {
    c.domain.validate();
  } catch (const Error& e) {
    fail(ErrorCode::validation_error, std::string("domain: ") + e.what());
  }

  bool ny_given = false;
  if (auto m = root.child("mesh")) {
    c.nx = m->integer("nx", 26);
    ny_given = m->has("ny");
    c.ny = m->integer("ny", 101);
    m->finish();
  }
  check(c.nx >= 2, "mesh.nx", "must be >= 2");
  if (c.domain.kind == DomainKind::rectangle) {
    check(c.ny >= 2, "mesh.ny", "must be >= 2");
    if (!ny_given) c.notes.push_back("mesh.ny not given; defaulted to " + std::to_string(c.ny));
  }

  c.params = Params::table1();
  if (auto p = root.child("params")) {
    c.params.tie = p->boolean("tie", true);
    if (p->has("d")) c.params.set("d", p->number("d", 0.0));
    for (const std::string& name : Params::names()) {
      if (name == "d") continue;
      if (p->has(name)) {
        const double v = p->number(name, 0.0);
        if (name == "d1") c.params.d1 = v;
        else if (name == "d2") c.params.d2 = v;
        else c.params.set(name, v);
      }
    }
    p->finish();
  }
  if (c.model == ModelKind::fast)
    check(c.params.eps > 0.0, "params.eps", "must be positive for the fast model");
  validate(c.params, c.model);

  ContinuationSettings& s = c.continuation;
  s.n_eigs = c.domain.dim() == 1 ? 10 : 20;
  if (auto k = root.child("continuation")) {
    c.param_name = k->string("param", "d");
    const auto& names = Params::names();
    check(c.param_name == "d" || std::find(names.begin(), names.end(), c.param_name) != names.end(),
          k->field("param"), "unknown parameter '" + c.param_name + "'");
    c.param_start = k->number("start", c.params.get(c.param_name));
    c.direction = k->integer("direction", -1);
    if (auto r = k->range("range")) {
      s.param_lo = r->first;
      s.param_hi = r->second;
    } else {
      s.param_lo = 0.0;
      s.param_hi = 2.0 * std::max(std::abs(c.param_start), 1e-3);
    }
    if (auto r = k->range("branch_range")) {
      c.branch_lo = r->first;
      c.branch_hi = r->second;
    }
    s.ds0 = k->number("ds0", s.ds0);
    s.ds_min = k->number("ds_min", s.ds_min);
    s.ds_max = k->number("ds_max", s.ds_max);
    s.newton_tol = k->number("newton_tol", s.newton_tol);
    s.newton_max_iter = k->integer("newton_max_iter", s.newton_max_iter);
    s.max_steps = k->integer("max_steps", s.max_steps);
    s.n_eigs = k->integer("n_eigs", s.n_eigs);
    s.eig_shift = k->number("eig_shift", s.eig_shift);
    s.detect_branch = k->boolean("detect_branch", s.detect_branch);
    s.detect_fold = k->boolean("detect_fold", s.detect_fold);
    s.detect_hopf = k->boolean("detect_hopf", s.detect_hopf);
    s.compute_stability = k->boolean("compute_stability", s.compute_stability);
    s.xi = k->number("xi", s.xi);
    s.event_tol = k->number("event_tol", s.event_tol);
    s.grow = k->number("grow", s.grow);
    s.unstable_tol = k->number("unstable_tol", s.unstable_tol);
    s.hopf_imag_tol = k->number("hopf_imag_tol", s.hopf_imag_tol);
    s.hopf_test_tol = k->number("hopf_test_tol", s.hopf_test_tol);
    s.switch_delta = k->number("switch_delta", s.switch_delta);
    s.switch_retries = k->integer("switch_retries", s.switch_retries);
    s.stop_on_homogeneous = k->boolean("stop_on_homogeneous", s.stop_on_homogeneous);
    s.landing_fraction = k->number("landing_fraction", s.landing_fraction);
    k->finish();
  } else {
    c.param_start = c.params.get(c.param_name);
    s.param_lo = 0.0;
    s.param_hi = 2.0 * std::max(std::abs(c.param_start), 1e-3);
  }
  check(c.direction == 1 || c.direction == -1, "continuation.direction", "must be +1 or -1");
  check(c.param_start >= s.param_lo && c.param_start <= s.param_hi, "continuation.start",
        "must lie inside continuation.range");
  s.validate();
  c.params.set(c.param_name, c.param_start);

  if (auto d = root.child("diagram")) {
    c.diagram.switch_points = d->integer("switch_points", c.diagram.switch_points);
    c.diagram.depth = d->integer("depth", c.diagram.depth);
    c.diagram.secondary_points = d->integer("secondary_points", c.diagram.secondary_points);
    d->finish();
  }
  check(c.diagram.switch_points >= 0, "diagram.switch_points", "must be >= 0");
  check(c.diagram.depth == 1 || c.diagram.depth == 2, "diagram.depth", "must be 1 or 2");
  check(c.diagram.secondary_points >= 0, "diagram.secondary_points", "must be >= 0");

  c.turing.lo = s.param_lo;
  c.turing.hi = s.param_hi;
  if (auto t = root.child("turing")) {
    if (auto r = t->range("range")) {
      c.turing.lo = r->first;
      c.turing.hi = r->second;
    }
    c.turing.lambda_max = t->number("lambda_max", c.turing.lambda_max);
    c.turing.scan_points = t->integer("scan_points", c.turing.scan_points);
    t->finish();
  }
  check(c.turing.lambda_max > 0.0, "turing.lambda_max", "must be positive");
  check(c.turing.scan_points >= 2, "turing.scan_points", "must be >= 2");

  c.sweep_eps = default_eps_ladder(c.param_name);
  if (auto w = root.child("sweep")) {
    c.sweep_eps = w->numbers("eps", c.sweep_eps);
    c.sweep_events = w->integer("events", c.sweep_events);
    w->finish();
  }
  for (double e : c.sweep_eps) check(e > 0.0, "sweep.eps", "values must be positive");
  check(!c.sweep_eps.empty(), "sweep.eps", "must not be empty");
  check(c.sweep_events >= 1, "sweep.events", "must be >= 1");

  root.finish();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
  return parse_config(j);
}

std::shared_ptr<const Mesh> build_config_mesh(const RunConfig& c) {
  return std::make_shared<const Mesh>(build_mesh(c.domain, c.nx, c.ny));
}

SteadyProblem build_problem(const RunConfig& c) {
  return SteadyProblem(build_config_mesh(c), c.params, c.model, c.param_name);
}

// ---------------------------------------------------------------- emission

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_branch_csv(std::ostream& out, const Branch& branch) {
  out << "step,param,v_at_origin,u_L1,u_L2,n_unstable,event_flag\n";
  for (const BranchPoint& p : branch.points) {
    out << p.step_index << ',' << format_double(p.param()) << ','
        << format_double(p.measures.v_at_origin) << ',' << format_double(p.measures.u_l1) << ','
        << format_double(p.measures.u_l2) << ',' << p.n_unstable << ',' << p.event_flag << '\n';
  }
}

CsvBranch to_csv_branch(const Branch& branch, const std::string& label) {
  CsvBranch b;
  b.label = label;
  for (const BranchPoint& p : branch.points) {
    b.step.push_back(p.step_index);
    b.param.push_back(p.param());
    b.v_at_origin.push_back(p.measures.v_at_origin);
    b.u_l1.push_back(p.measures.u_l1);
    b.u_l2.push_back(p.measures.u_l2);
    b.n_unstable.push_back(p.n_unstable);
    b.event_flag.push_back(p.event_flag);
  }
  return b;
}

CsvBranch read_branch_csv(std::istream& in, std::string label) {
  CsvBranch b;
  b.label = std::move(label);
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,param,v_at_origin", 0) != 0)
    fail(ErrorCode::parse_error, "branch csv '" + b.label + "': missing header");
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 7)
      fail(ErrorCode::parse_error, "branch csv '" + b.label + "' row " + std::to_string(row) + ": expected 7 columns");
    try {
      b.step.push_back(std::stoi(cells[0]));
      b.param.push_back(std::stod(cells[1]));
      b.v_at_origin.push_back(std::stod(cells[2]));
      b.u_l1.push_back(std::stod(cells[3]));
      b.u_l2.push_back(std::stod(cells[4]));
      b.n_unstable.push_back(std::stoi(cells[5]));
    } catch (const std::exception&) {
      fail(ErrorCode::parse_error, "branch csv '" + b.label + "' row " + std::to_string(row) + ": bad number");
    }
    b.event_flag.push_back(cells[6]);
  }
  return b;
}

namespace {

const std::vector<double>& measure_of(const CsvBranch& b, const std::string& m) {
  if (m == "v_at_origin") return b.v_at_origin;
  if (m == "u_L1") return b.u_l1;
  if (m == "u_L2") return b.u_l2;
  fail(ErrorCode::invalid_argument, "unknown measure '" + m + "'");
}

std::string fixed(double x, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

std::string tick_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

// Linear map from data to pixel space with a plain frame and ticks.
struct Frame {
  double x0, x1, y0, y1;
  int w, h;
  double left = 80, right = 20, top = 20, bottom = 60;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * (w - left - right); }
  double py(double y) const { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); }

  void pad() {
    if (!(x1 > x0)) { x0 -= 0.5; x1 += 0.5; }
    if (!(y1 > y0)) { y0 -= 0.5; y1 += 0.5; }
    const double dx = 0.03 * (x1 - x0), dy = 0.05 * (y1 - y0);
    x0 -= dx; x1 += dx; y0 -= dy; y1 += dy;
  }

  void axes(std::ostream& os, const std::string& xlabel, const std::string& ylabel) const {
    os << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\""
       << fixed(w - left - right) << "\" height=\"" << fixed(h - top - bottom)
       << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
      os << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << fixed(h - bottom + 18)
         << "\" font-size=\"12\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
      os << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(py(yv) + 4)
         << "\" font-size=\"12\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
    }
    os << "<text x=\"" << fixed(left + (w - left - right) / 2) << "\" y=\"" << fixed(h - 15.0)
       << "\" font-size=\"14\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    os << "<text x=\"18\" y=\"" << fixed(top + (h - top - bottom) / 2)
       << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << fixed(top + (h - top - bottom) / 2) << ")\">" << ylabel << "</text>\n";
  }
};

const char* palette(size_t i) {
  static const char* colors[] = {"#000000", "#1f5fbf", "#c0392b", "#27ae60", "#8e44ad",
                                 "#d35400", "#16a085", "#7f8c8d", "#b8860b", "#e84393"};
  return colors[i % 10];
}

}  // namespace

std::string render_diagram_svg(const std::vector<CsvBranch>& branches, const SvgOptions& opts) {
  Frame f{1e300, -1e300, 1e300, -1e300, opts.width, opts.height};
  for (const CsvBranch& b : branches) {
    const auto& m = measure_of(b, opts.measure);
    for (size_t i = 0; i < b.param.size(); ++i) {
      f.x0 = std::min(f.x0, b.param[i]);
      f.x1 = std::max(f.x1, b.param[i]);
      f.y0 = std::min(f.y0, m[i]);
      f.y1 = std::max(f.y1, m[i]);
    }
  }
  if (f.x0 > f.x1) f = Frame{0, 1, 0, 1, opts.width, opts.height};
  f.pad();

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width << "\" height=\""
     << opts.height << "\" viewBox=\"0 0 " << opts.width << ' ' << opts.height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f.axes(os, opts.param_label, opts.measure);
  for (size_t bi = 0; bi < branches.size(); ++bi) {
    const CsvBranch& b = branches[bi];
    const auto& m = measure_of(b, opts.measure);
    const char* color = palette(bi);
    size_t i = 0;
    while (i + 1 < b.param.size()) {
      const bool stable = b.n_unstable[i + 1] == 0;
      size_t j = i + 1;
      while (j + 1 < b.param.size() && (b.n_unstable[j + 1] == 0) == stable) ++j;
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
         << (stable ? "3" : "1") << "\" points=\"";
      for (size_t k = i; k <= j; ++k) os << (k > i ? " " : "") << fixed(f.px(b.param[k])) << ',' << fixed(f.py(m[k]));
      os << "\"/>\n";
      i = j;
    }
    for (size_t k = 0; k < b.param.size(); ++k) {
      const std::string& flag = b.event_flag[k];
      if (flag.empty()) continue;
      const double x = f.px(b.param[k]), y = f.py(m[k]);
      if (flag.find("BP") != std::string::npos)
        os << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(y) << "\" r=\"5\" fill=\"none\" stroke=\""
           << color << "\" stroke-width=\"1.5\"/>\n";
      if (flag.find("FP") != std::string::npos)
        os << "<path d=\"M" << fixed(x - 5) << ',' << fixed(y - 5) << " L" << fixed(x + 5) << ','
           << fixed(y + 5) << " M" << fixed(x - 5) << ',' << fixed(y + 5) << " L" << fixed(x + 5) << ','
           << fixed(y - 5) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
      if (flag.find("HP") != std::string::npos)
        os << "<rect x=\"" << fixed(x - 4) << "\" y=\"" << fixed(y - 4)
           << "\" width=\"8\" height=\"8\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

void write_turing_csv(std::ostream& out, const std::vector<TuringPrediction>& preds) {
  out << "n,m,lambda,multiplicity,param,critical_value\n";
  for (const TuringPrediction& p : preds) {
    for (const auto& idx : p.mode.indices)
      out << idx[0] << ',' << idx[1] << ',' << format_double(p.mode.lambda) << ','
          << p.mode.multiplicity() << ',' << p.param_name << ',' << format_double(p.critical_value) << '\n';
  }
}

void write_critical_curve_csv(std::ostream& out, const Params& p, double lambda_max, int samples) {
  require(samples >= 2, "critical curve: samples must be >= 2");
  out << "lambda,d_B\n";
  for (int i = 1; i <= samples; ++i) {
    const double lambda = lambda_max * i / samples;
    const auto d = critical_d(p, lambda);
    out << format_double(lambda) << ',' << (d ? format_double(*d) : std::string()) << '\n';
  }
}

std::string render_critical_curve_svg(const Params& p, const std::vector<LaplaceMode>& modes,
                                      double lambda_max, int samples) {
  std::vector<std::pair<double, double>> pts;
  for (int i = 1; i <= samples; ++i) {
    const double lambda = lambda_max * i / samples;
    if (auto d = critical_d(p, lambda)) pts.emplace_back(lambda, *d);
  }
  Frame f{0.0, lambda_max, 0.0, 1e-3, 800, 560};
  for (const auto& [l, d] : pts) f.y1 = std::max(f.y1, d);
  f.pad();
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"560\" viewBox=\"0 0 800 560\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f.axes(os, "lambda", "d_B");
  // contiguous pieces where d_B exists
  size_t i = 0;
  while (i < pts.size()) {
    size_t j = i;
    while (j + 1 < pts.size() && pts[j + 1].first - pts[j].first < 1.5 * lambda_max / samples) ++j;
    os << "<polyline fill=\"none\" stroke=\"#000\" stroke-width=\"2\" points=\"";
    for (size_t k = i; k <= j; ++k) os << (k > i ? " " : "") << fixed(f.px(pts[k].first)) << ',' << fixed(f.py(pts[k].second));
    os << "\"/>\n";
    i = j + 1;
  }
  for (const LaplaceMode& m : modes) {
    if (m.lambda <= 0.0 || m.lambda > lambda_max) continue;
    if (auto d = critical_d(p, m.lambda))
      os << "<circle cx=\"" << fixed(f.px(m.lambda)) << "\" cy=\"" << fixed(f.py(*d))
         << "\" r=\"4\" fill=\"#c0392b\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  out << "eps,event,value,ref,abs_diff\n";
  for (const SweepRow& row : r.rows) {
    out << format_double(row.eps) << ",B" << row.index << ',';
    out << (row.value ? format_double(*row.value) : std::string()) << ',';
    out << (row.reference ? format_double(*row.reference) : std::string()) << ',';
    if (row.value && row.reference) out << format_double(std::abs(*row.reference - *row.value));
    out << '\n';
  }
}

json fit_summary(const SweepResult& r) {
  json out = json::object();
  std::set<int> indices;
  for (const SweepRow& row : r.rows) indices.insert(row.index);
  for (int i : indices) {
    const std::string key = "B" + std::to_string(i);
    try {
      const OrderFit f = fit_order(r, i);
      out[key] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"rows", f.rows_used}};
    } catch (const Error& e) {
      out[key] = {{"error", to_string(e.code())}, {"message", e.what()}};
    }
  }
  return out;
}

json error_json(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e))
    return {{"error", to_string(err->code())}, {"message", err->what()}};
  return {{"error", "internal"}, {"message", e.what()}};
}

// ---------------------------------------------------------------- studies

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorCode::io_error, "write failed for '" + path.string() + "'");
}

template <class F>
void write_with(const fs::path& path, F&& fill) {
  std::ostringstream os;
  fill(os);
  write_text(path, os.str());
}

std::string padded(int i, int width = 3) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << i;
  return os.str();
}

void write_vector(std::ostream& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << '\n';
}

Vector read_vector(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  std::vector<double> vals;
  double x;
  while (in >> x) vals.push_back(x);
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

struct LabeledBranch {
  std::string label;
  Branch branch;
};

// Writes branches, events with snapshots, the manifest, and diagrams.
void emit_diagram(const RunConfig& c, const SteadyProblem& problem,
                  std::vector<LabeledBranch>& branches, std::ostream& log) {
  const fs::path out = c.output_dir;
  fs::create_directories(out / "branches");
  fs::create_directories(out / "snapshots");
  json events = json::array();
  json manifest = json::array();
  std::vector<CsvBranch> csv;
  for (size_t bi = 0; bi < branches.size(); ++bi) {
    const auto& [label, br] = branches[bi];
    const std::string file = "branches/branch_" + padded(static_cast<int>(bi)) + ".csv";
    write_with(out / file, [&](std::ostream& os) { write_branch_csv(os, br); });
    csv.push_back(to_csv_branch(br, label));
    json ev_ids = json::array();
    for (const EventRecord& ev : br.events) {
      const std::string snap = "snapshots/event_" + padded(ev.id) + ".txt";
      const std::string tang = "snapshots/event_" + padded(ev.id) + "_tangent.txt";
      write_with(out / snap, [&](std::ostream& os) {
        write_state_snapshot(os, ev.state, problem.param_name(), problem.mesh().node_count());
      });
      write_with(out / tang, [&](std::ostream& os) { write_vector(os, ev.tangent); });
      events.push_back({{"id", ev.id},
                        {"kind", to_string(ev.kind)},
                        {"param_value", ev.param_value},
                        {"param_lo", ev.param_lo},
                        {"param_hi", ev.param_hi},
                        {"branch", label},
                        {"step", ev.step_index},
                        {"multiplicity", ev.multiplicity},
                        {"localized", ev.localized},
                        {"crossing", {ev.crossing.real(), ev.crossing.imag()}},
                        {"n_unstable_before", ev.n_unstable_before},
                        {"n_unstable_after", ev.n_unstable_after},
                        {"snapshot", snap},
                        {"tangent", tang}});
      ev_ids.push_back(ev.id);
    }
    json entry = {{"label", label},
                  {"file", file},
                  {"origin_event", br.origin_event},
                  {"direction", br.direction},
                  {"status", to_string(br.status)},
                  {"points", br.points.size()},
                  {"events", ev_ids},
                  {"max_residual", max_residual(problem, br)}};
    if (br.landing_param) entry["landing_param"] = *br.landing_param;
    manifest.push_back(entry);
    log << "branch " << label << ": " << br.points.size() << " points, " << br.events.size()
        << " events, status " << to_string(br.status) << "\n";
  }
  write_text(out / "events.json", events.dump(2) + "\n");
  write_text(out / "branches.json", manifest.dump(2) + "\n");
  SvgOptions so;
  so.param_label = problem.param_name();
  write_text(out / "diagram.svg", render_diagram_svg(csv, so));
  so.measure = "u_L1";
  write_text(out / "diagram_u_L1.svg", render_diagram_svg(csv, so));
}

// Assigns globally unique event ids across branches in emission order.
void number_events(std::vector<LabeledBranch>& branches) {
  int next = 0;
  for (auto& lb : branches)
    for (auto& ev : lb.branch.events) ev.id = next++;
}

template <class Task>
void run_parallel(int threads, size_t n, Task&& task) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<size_t> next{0};
  const auto worker = [&] {
    for (size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int nt = std::clamp<int>(threads, 1, std::max<int>(1, static_cast<int>(n)));
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string sign_tag(int dir) { return dir > 0 ? "+" : "-"; }

}  // namespace

void run_turing(const RunConfig& c, std::ostream& log) {
  PredictionOptions po = c.turing;
  const auto preds = predict_bifurcations(c.params, c.domain, c.param_name, po);
  write_with(c.output_dir / "turing.csv", [&](std::ostream& os) { write_turing_csv(os, preds); });
  const auto modes = laplacian_spectrum(c.domain, po.lambda_max);
  Params p = c.params;
  write_with(c.output_dir / "critical_curve.csv",
             [&](std::ostream& os) { write_critical_curve_csv(os, p, po.lambda_max, 400); });
  write_text(c.output_dir / "critical_curve.svg", render_critical_curve_svg(p, modes, po.lambda_max, 400));
  log << "turing: " << preds.size() << " predicted " << c.param_name << " values\n";
  for (const auto& pr : preds) {
    log << "  (";
    for (size_t i = 0; i < pr.mode.indices.size(); ++i)
      log << (i ? "; " : "") << pr.mode.indices[i][0] << ',' << pr.mode.indices[i][1];
    log << ") lambda=" << format_double(pr.mode.lambda) << " " << c.param_name << "="
        << format_double(pr.critical_value) << "\n";
  }
}

void run_sweep(const RunConfig& c, std::ostream& log) {
  SweepConfig sc;
  sc.params = c.params;
  sc.domain = c.domain;
  sc.nx = c.nx;
  sc.ny = c.ny;
  sc.param_name = c.param_name;
  sc.eps_list = c.sweep_eps;
  sc.param_start = c.param_start;
  sc.direction = c.direction;
  sc.events = c.sweep_events;
  sc.settings = c.continuation;
  sc.settings.detect_fold = false;
  sc.settings.detect_hopf = false;
  sc.threads = c.threads;
  const SweepResult r = sweep_epsilon(sc);
  write_with(c.output_dir / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, r); });
  const json fit = fit_summary(r);
  write_text(c.output_dir / "fit.json", fit.dump(2) + "\n");
  log << "sweep-eps: " << r.rows.size() << " rows\n";
  for (auto it = fit.begin(); it != fit.end(); ++it) {
    if (it->contains("slope"))
      log << "  " << it.key() << " slope " << format_double((*it)["slope"].get<double>()) << "\n";
    else
      log << "  " << it.key() << " " << (*it)["message"].get<std::string>() << "\n";
  }
}

void run_diagram(const RunConfig& c, std::ostream& log) {
  const SteadyProblem problem = build_problem(c);
  log << "mesh: " << problem.mesh().node_count() << " nodes, " << problem.mesh().element_count()
      << " elements, " << problem.size() << " unknowns\n";
  std::vector<LabeledBranch> branches;
  {
    const BranchPoint start = init_from_homogeneous(problem, c.param_start, c.continuation, c.direction);
    branches.push_back({"hom", continue_branch(problem, start, c.continuation)});
  }
  number_events(branches);

  if (c.study == Study::full_diagram && c.diagram.switch_points > 0) {
    ContinuationSettings ss = c.continuation;
    if (c.branch_lo) ss.param_lo = *c.branch_lo;
    if (c.branch_hi) ss.param_hi = *c.branch_hi;

    struct Task {
      std::string label;
      const EventRecord* event;
      int direction;
    };
    std::vector<Task> tasks;
    int k = 0;
    for (const EventRecord& ev : branches[0].branch.events) {
      if (ev.kind != EventKind::branch_point || ev.multiplicity != 1) continue;
      if (k++ >= c.diagram.switch_points) break;
      for (int dir : {+1, -1}) tasks.push_back({"b" + std::to_string(k) + sign_tag(dir), &ev, dir});
    }
    std::vector<Branch> level1(tasks.size());
    run_parallel(c.threads, tasks.size(), [&](size_t i) {
      level1[i] = switch_branch(problem, *tasks[i].event, tasks[i].direction, ss);
    });
    const size_t first_new = branches.size();
    for (size_t i = 0; i < tasks.size(); ++i) branches.push_back({tasks[i].label, std::move(level1[i])});
    number_events(branches);

    if (c.diagram.depth >= 2 && c.diagram.secondary_points > 0) {
      std::vector<Task> sec;
      for (size_t bi = first_new; bi < branches.size(); ++bi) {
        const Branch& br = branches[bi].branch;
        int m = 0;
        for (const EventRecord& ev : br.events) {
          if (ev.kind != EventKind::branch_point || ev.multiplicity != 1) continue;
          if (br.landing_param && ev.param_value == *br.landing_param) continue;
          if (m++ >= c.diagram.secondary_points) break;
          for (int dir : {+1, -1})
            sec.push_back({branches[bi].label + ".b" + std::to_string(m) + sign_tag(dir), &ev, dir});
        }
      }
      std::vector<Branch> level2(sec.size());
      run_parallel(c.threads, sec.size(), [&](size_t i) {
        level2[i] = switch_branch(problem, *sec[i].event, sec[i].direction, ss);
      });
      for (size_t i = 0; i < sec.size(); ++i) branches.push_back({sec[i].label, std::move(level2[i])});
      number_events(branches);
    }
  }
  emit_diagram(c, problem, branches, log);
}

void run_rings(const RunConfig& c, std::ostream& log) {
  const SteadyProblem problem = build_problem(c);
  RingOptions o;
  o.param_lo = c.continuation.param_lo;
  o.param_hi = c.continuation.param_hi;
  o.param_start = c.param_start;
  o.branch_lo = c.branch_lo;
  o.branch_hi = c.branch_hi;
  o.settings = c.continuation;
  const RingReport r = ring_report(problem, o);

  std::vector<LabeledBranch> branches;
  for (const HalfBranch& h : r.halves)
    branches.push_back({"bp" + std::to_string(h.origin) + sign_tag(h.direction), h.branch});
  number_events(branches);
  emit_diagram(c, problem, branches, log);

  json bps = json::array();
  for (const EventRecord& ev : r.branch_points)
    bps.push_back({{"index", ev.id}, {"param_value", ev.param_value}, {"multiplicity", ev.multiplicity}});
  json halves = json::array();
  for (size_t i = 0; i < r.halves.size(); ++i) {
    const HalfBranch& h = r.halves[i];
    json e = {{"origin", h.origin},
              {"direction", h.direction},
              {"status", to_string(h.branch.status)},
              {"file", "branches/branch_" + padded(static_cast<int>(i)) + ".csv"}};
    if (h.landing) {
      e["landing"] = *h.landing;
      e["landing_side"] = h.landing_side;
    }
    halves.push_back(e);
  }
  const json out = {{"model", to_string(c.model)},
                    {"eps", c.model == ModelKind::fast ? json(c.params.eps) : json(nullptr)},
                    {"param", c.param_name},
                    {"closed_loops", r.closed_loops},
                    {"open_segments", r.open_segments},
                    {"loops", r.loops},
                    {"branch_points", bps},
                    {"half_branches", halves}};
  write_text(c.output_dir / "rings.json", out.dump(2) + "\n");
  log << "rings: " << r.closed_loops << " closed loops, " << r.open_segments << " open segments\n";
}

int run(const RunConfig& config, std::ostream& log) {
  try {
    fs::create_directories(config.output_dir);
    for (const std::string& note : config.notes) log << "note: " << note << "\n";
    log << "study " << to_string(config.study) << ", model " << to_string(config.model) << ", param "
        << config.param_name << "\n";
    switch (config.study) {
      case Study::turing: run_turing(config, log); break;
      case Study::sweep_eps: run_sweep(config, log); break;
      case Study::rings: run_rings(config, log); break;
      case Study::single_branch:
      case Study::full_diagram: run_diagram(config, log); break;
    }
    return 0;
  } catch (const std::exception& e) {
    const json err = error_json(e);
    log << err.dump() << "\n";
    try {
      write_text(config.output_dir / "error.json", err.dump(2) + "\n");
    } catch (const std::exception&) {
    }
    return 1;
  }
}

void run_switch(const RunConfig& c, const SwitchRequest& req, std::ostream& log) {
  const fs::path out = c.output_dir;
  std::ifstream in(out / "events.json");
  if (!in) fail(ErrorCode::io_error, "no events.json in '" + out.string() + "'; run the diagram first");
  json events;
  try {
    events = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse_error, std::string("events.json: ") + e.what());
  }
  const json* rec = nullptr;
  for (const json& e : events)
    if (e.at("id").get<int>() == req.event_id) rec = &e;
  if (!rec) fail(ErrorCode::invalid_argument, "event id " + std::to_string(req.event_id) + " not found");
  if (rec->at("kind").get<std::string>() != "branch_point")
    fail(ErrorCode::invalid_argument, "event " + std::to_string(req.event_id) + " is not a branch point");

  std::ifstream sin(out / rec->at("snapshot").get<std::string>());
  if (!sin) fail(ErrorCode::io_error, "missing snapshot for event " + std::to_string(req.event_id));
  const StateSnapshot snap = read_state_snapshot(sin);
  const SteadyProblem problem = build_problem(c);
  if (snap.state.fields.size() != problem.size())
    fail(ErrorCode::validation_error, "snapshot does not match the configured mesh and model");

  EventRecord ev;
  ev.id = req.event_id;
  ev.kind = EventKind::branch_point;
  ev.state = snap.state;
  ev.param_value = snap.state.param_value;
  ev.tangent = read_vector(out / rec->at("tangent").get<std::string>());
  ev.multiplicity = rec->at("multiplicity").get<int>();

  ContinuationSettings ss = c.continuation;
  if (c.branch_lo) ss.param_lo = *c.branch_lo;
  if (c.branch_hi) ss.param_hi = *c.branch_hi;

  Branch br;
  std::string label = "switch" + padded(req.event_id);
  if (req.combination.empty() && !req.random_combination) {
    br = switch_branch(problem, ev, req.direction, ss);
    label += sign_tag(req.direction);
  } else {
    std::vector<double> coef = req.combination;
    if (req.random_combination) {
      std::mt19937_64 rng(c.seed);
      std::normal_distribution<double> nd;
      coef.assign(std::max(2, ev.multiplicity), 0.0);
      for (double& x : coef) x = nd(rng);
    }
    const auto basis = kernel_basis(problem, ev.state, static_cast<int>(coef.size()));
    Vector dir = Vector::Zero(problem.size());
    for (size_t i = 0; i < coef.size(); ++i) dir += coef[i] * basis[i];
    br = switch_branch_along(problem, ev, dir, ss);
    br.direction = 0;
    label += "c";
  }
  br.origin_event = req.event_id;
  int next_id = 0;
  for (const json& e : events) next_id = std::max(next_id, e.at("id").get<int>() + 1);
  for (auto& e : br.events) e.id = next_id++;

  const std::string file = "branches/" + label + ".csv";
  write_with(out / file, [&](std::ostream& os) { write_branch_csv(os, br); });
  json new_events = json::array();
  for (const EventRecord& e : br.events) {
    const std::string snapf = "snapshots/event_" + padded(e.id) + ".txt";
    const std::string tangf = "snapshots/event_" + padded(e.id) + "_tangent.txt";
    write_with(out / snapf, [&](std::ostream& os) {
      write_state_snapshot(os, e.state, problem.param_name(), problem.mesh().node_count());
    });
    write_with(out / tangf, [&](std::ostream& os) { write_vector(os, e.tangent); });
    json j = {{"id", e.id},
              {"kind", to_string(e.kind)},
              {"param_value", e.param_value},
              {"param_lo", e.param_lo},
              {"param_hi", e.param_hi},
              {"branch", label},
              {"step", e.step_index},
              {"multiplicity", e.multiplicity},
              {"localized", e.localized},
              {"crossing", {e.crossing.real(), e.crossing.imag()}},
              {"n_unstable_before", e.n_unstable_before},
              {"n_unstable_after", e.n_unstable_after},
              {"snapshot", snapf},
              {"tangent", tangf}};
    events.push_back(j);
    new_events.push_back(j);
  }
  write_text(out / "events.json", events.dump(2) + "\n");
  log << "switch from event " << req.event_id << ": " << br.points.size() << " points, "
      << br.events.size() << " events, status " << to_string(br.status) << " -> " << file << "\n";
  SvgOptions so;
  so.param_label = c.param_name;
  plot_data(out, so);
}

void plot_data(const fs::path& dir, const SvgOptions& opts) {
  const fs::path bdir = dir / "branches";
  if (!fs::is_directory(bdir)) fail(ErrorCode::io_error, "no branches/ directory in '" + dir.string() + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(bdir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<CsvBranch> branches;
  for (const fs::path& f : files) {
    std::ifstream in(f);
    branches.push_back(read_branch_csv(in, f.stem().string()));
  }
  const std::string name = opts.measure == "v_at_origin" ? "diagram.svg" : "diagram_" + opts.measure + ".svg";
  write_text(dir / name, render_diagram_svg(branches, opts));
}

}  // namespace xdcont
