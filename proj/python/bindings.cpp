#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xdcont/cli_io.hpp"
#include "xdcont/continuation.hpp"
#include "xdcont/error.hpp"
#include "xdcont/experiments.hpp"
#include "xdcont/stability.hpp"
#include "xdcont/turing.hpp"

namespace py = pybind11;
using namespace xdcont;

namespace {

ModelKind model_of(const std::string& name) { return model_kind_from_string(name); }

py::dict sweep_to_dict(const SweepResult& r) {
  py::list rows;
  for (const SweepRow& row : r.rows) {
    py::dict d;
    d["eps"] = row.eps;
    d["event"] = row.index;
    d["value"] = row.value ? py::cast(*row.value) : py::none();
    d["ref"] = row.reference ? py::cast(*row.reference) : py::none();
    rows.append(d);
  }
  py::dict out;
  out["param"] = r.param_name;
  out["rows"] = rows;
  out["reference"] = r.reference;
  return out;
}

SweepResult sweep_from_dict(const py::dict& d) {
  SweepResult r;
  r.param_name = d.contains("param") ? d["param"].cast<std::string>() : "d";
  for (const auto& item : d["rows"]) {
    const py::dict row = item.cast<py::dict>();
    SweepRow s;
    s.eps = row["eps"].cast<double>();
    s.index = row["event"].cast<int>();
    if (!row["value"].is_none()) s.value = row["value"].cast<double>();
    if (!row["ref"].is_none()) s.reference = row["ref"].cast<double>();
    r.rows.push_back(s);
  }
  return r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Steady-state continuation for cross-diffusion systems";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(PyExc_RuntimeError, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::class_<Params>(m, "Params")
      .def(py::init<>())
      .def_static("table1", &Params::table1, py::arg("d") = 0.04)
      .def("get", &Params::get)
      .def("set", &Params::set)
      .def_static("names", &Params::names)
      .def_readwrite("d1", &Params::d1)
      .def_readwrite("d2", &Params::d2)
      .def_readwrite("d12", &Params::d12)
      .def_readwrite("r1", &Params::r1)
      .def_readwrite("r2", &Params::r2)
      .def_readwrite("a1", &Params::a1)
      .def_readwrite("a2", &Params::a2)
      .def_readwrite("b1", &Params::b1)
      .def_readwrite("b2", &Params::b2)
      .def_readwrite("M", &Params::M)
      .def_readwrite("eps", &Params::eps)
      .def_readwrite("tie", &Params::tie);

  py::class_<DomainSpec>(m, "DomainSpec")
      .def_static("interval", &DomainSpec::interval, py::arg("length"), py::arg("offset") = 0.0)
      .def_static("rectangle", py::overload_cast<double, double, double, double>(&DomainSpec::rectangle),
                  py::arg("lx"), py::arg("ly"), py::arg("x0") = 0.0, py::arg("y0") = 0.0)
      .def_property_readonly("dim", &DomainSpec::dim)
      .def_property_readonly("measure", &DomainSpec::measure);

  py::class_<Mesh, std::shared_ptr<Mesh>>(m, "Mesh")
      .def_property_readonly("node_count", &Mesh::node_count)
      .def_property_readonly("element_count", &Mesh::element_count)
      .def_property_readonly("dim", &Mesh::dim)
      .def("x", &Mesh::x)
      .def("y", &Mesh::y)
      .def_property_readonly("element_measures", &Mesh::element_measures);

  m.def("build_mesh", [](const DomainSpec& spec, int nx, int ny) {
    return std::make_shared<Mesh>(build_mesh(spec, nx, ny));
  }, py::arg("domain"), py::arg("nx"), py::arg("ny") = 101);

  m.def("equilibrium_cross", [](const Params& p) {
    const auto e = equilibrium_cross(p);
    return py::make_tuple(e.u, e.v, e.admissible);
  });
  m.def("equilibrium_fast", [](const Params& p) {
    const auto e = equilibrium_fast(p);
    return py::make_tuple(e.u1, e.u2, e.v, e.admissible);
  });

  m.def("linearize", [](const Params& p) {
    const LinearizationData l = linearize(p);
    py::dict d;
    d["jstar"] = Eigen::MatrixXd(l.jstar);
    d["jdelta"] = Eigen::MatrixXd(l.jdelta);
    d["tr_j"] = l.tr_j;
    d["det_j"] = l.det_j;
    d["alpha"] = l.alpha;
    return d;
  });
  m.def("char_det", &char_det, py::arg("params"), py::arg("lam"), py::arg("d"));
  m.def("critical_d", &critical_d, py::arg("params"), py::arg("lam"));
  m.def("predict_bifurcations", [](const Params& p, const DomainSpec& spec, const std::string& param,
                                   double lo, double hi, double lambda_max) {
    PredictionOptions o;
    o.lo = lo;
    o.hi = hi;
    o.lambda_max = lambda_max;
    py::list out;
    for (const auto& pr : predict_bifurcations(p, spec, param, o)) {
      py::dict d;
      d["lambda"] = pr.mode.lambda;
      py::list idx;
      for (const auto& nm : pr.mode.indices) idx.append(py::make_tuple(nm[0], nm[1]));
      d["modes"] = idx;
      d["value"] = pr.critical_value;
      out.append(d);
    }
    return out;
  }, py::arg("params"), py::arg("domain"), py::arg("param") = "d", py::arg("lo") = 0.0,
     py::arg("hi") = 0.04, py::arg("lambda_max") = 300.0);

  py::class_<SteadyProblem>(m, "SteadyProblem")
      .def(py::init([](std::shared_ptr<Mesh> mesh, const Params& p, const std::string& model,
                       const std::string& param) {
             return SteadyProblem(std::const_pointer_cast<const Mesh>(mesh), p, model_of(model), param);
           }),
           py::arg("mesh"), py::arg("params"), py::arg("model") = "cross", py::arg("param") = "d")
      .def_property_readonly("size", &SteadyProblem::size)
      .def("homogeneous", &SteadyProblem::homogeneous)
      .def("residual", [](const SteadyProblem& s, const Vector& x, double p) { return s.residual(x, p); })
      .def("jacobian_parts", [](const SteadyProblem& s, const Vector& x, double p) {
        SparseMatrix j = s.jacobian(x, p);
        j.makeCompressed();
        const auto nnz = j.nonZeros();
        Vector data = Eigen::Map<const Vector>(j.valuePtr(), nnz);
        Eigen::VectorXi indices = Eigen::Map<const Eigen::VectorXi>(j.innerIndexPtr(), nnz);
        Eigen::VectorXi indptr = Eigen::Map<const Eigen::VectorXi>(j.outerIndexPtr(), j.outerSize() + 1);
        return py::make_tuple(data, indices, indptr, py::make_tuple(j.rows(), j.cols()));
      });

  m.def("leading_spectrum", [](const SteadyProblem& s, const Vector& x, double p, int count) {
    SpectrumOptions o;
    o.count = count;
    return leading_spectrum(s.jacobian(x, p), s.mass_block(), o).eigenvalues;
  }, py::arg("problem"), py::arg("fields"), py::arg("param_value"), py::arg("count") = 10);

  py::class_<ContinuationSettings>(m, "ContinuationSettings")
      .def(py::init<>())
      .def_readwrite("ds0", &ContinuationSettings::ds0)
      .def_readwrite("ds_min", &ContinuationSettings::ds_min)
      .def_readwrite("ds_max", &ContinuationSettings::ds_max)
      .def_readwrite("newton_tol", &ContinuationSettings::newton_tol)
      .def_readwrite("max_steps", &ContinuationSettings::max_steps)
      .def_readwrite("param_lo", &ContinuationSettings::param_lo)
      .def_readwrite("param_hi", &ContinuationSettings::param_hi)
      .def_readwrite("n_eigs", &ContinuationSettings::n_eigs)
      .def_readwrite("detect_branch", &ContinuationSettings::detect_branch)
      .def_readwrite("detect_fold", &ContinuationSettings::detect_fold)
      .def_readwrite("detect_hopf", &ContinuationSettings::detect_hopf)
      .def_readwrite("switch_delta", &ContinuationSettings::switch_delta)
      .def_readwrite("stop_on_homogeneous", &ContinuationSettings::stop_on_homogeneous);

  py::class_<BranchPoint>(m, "BranchPoint")
      .def_property_readonly("param", &BranchPoint::param)
      .def_property_readonly("fields", [](const BranchPoint& p) { return p.state.fields; })
      .def_readonly("n_unstable", &BranchPoint::n_unstable)
      .def_readonly("event_flag", &BranchPoint::event_flag)
      .def_property_readonly("v_at_origin", [](const BranchPoint& p) { return p.measures.v_at_origin; })
      .def_property_readonly("u_L1", [](const BranchPoint& p) { return p.measures.u_l1; })
      .def_property_readonly("u_L2", [](const BranchPoint& p) { return p.measures.u_l2; });

  py::class_<EventRecord>(m, "EventRecord")
      .def_property_readonly("kind", [](const EventRecord& e) { return to_string(e.kind); })
      .def_readonly("param_value", &EventRecord::param_value)
      .def_readonly("multiplicity", &EventRecord::multiplicity)
      .def_readonly("crossing", &EventRecord::crossing)
      .def_readonly("n_unstable_before", &EventRecord::n_unstable_before)
      .def_readonly("n_unstable_after", &EventRecord::n_unstable_after);

  py::class_<Branch>(m, "Branch")
      .def_readonly("points", &Branch::points)
      .def_readonly("events", &Branch::events)
      .def_property_readonly("status", [](const Branch& b) { return to_string(b.status); })
      .def("params", [](const Branch& b) {
        Vector out(b.points.size());
        for (size_t i = 0; i < b.points.size(); ++i) out[static_cast<Eigen::Index>(i)] = b.points[i].param();
        return out;
      });

  m.def("init_from_homogeneous", &init_from_homogeneous, py::arg("problem"), py::arg("param_value"),
        py::arg("settings"), py::arg("direction") = -1);
  m.def("continue_branch", &continue_branch, py::arg("problem"), py::arg("start"), py::arg("settings"),
        py::call_guard<py::gil_scoped_release>());
  m.def("switch_branch", &switch_branch, py::arg("problem"), py::arg("event"), py::arg("direction"),
        py::arg("settings"), py::call_guard<py::gil_scoped_release>());

  m.def("sweep_epsilon", [](const Params& p, const std::vector<double>& eps, int nx, double lo, double hi,
                            int events) {
    SweepConfig c;
    c.params = p;
    c.nx = nx;
    c.eps_list = eps;
    c.events = events;
    c.settings.param_lo = lo;
    c.settings.param_hi = hi;
    SweepResult r;
    {
      py::gil_scoped_release release;
      r = sweep_epsilon(c);
    }
    return sweep_to_dict(r);
  }, py::arg("params"), py::arg("eps"), py::arg("nx") = 26, py::arg("lo") = 1e-4, py::arg("hi") = 0.05,
     py::arg("events") = 3);

  m.def("fit_order", [](const py::dict& sweep) {
    py::list out;
    for (const OrderFit& f : fit_order(sweep_from_dict(sweep))) {
      py::dict d;
      d["event"] = f.index;
      d["slope"] = f.slope;
      d["intercept"] = f.intercept;
      d["r2"] = f.r2;
      out.append(d);
    }
    return out;
  });

  m.def("ring_report", [](const SteadyProblem& s, double lo, double hi, double start, double branch_hi) {
    RingOptions o;
    o.param_lo = lo;
    o.param_hi = hi;
    o.param_start = start;
    o.branch_hi = branch_hi;
    o.settings.max_steps = 3000;
    RingReport r;
    {
      py::gil_scoped_release release;
      r = ring_report(s, o);
    }
    py::dict d;
    std::vector<double> bps;
    for (const auto& e : r.branch_points) bps.push_back(e.param_value);
    d["branch_points"] = bps;
    d["closed_loops"] = r.closed_loops;
    d["open_segments"] = r.open_segments;
    d["loops"] = r.loops;
    return d;
  }, py::arg("problem"), py::arg("lo"), py::arg("hi"), py::arg("start"), py::arg("branch_hi") = 10.0);

  m.def("run_config", [](const std::string& path, const std::string& out) {
    RunConfig c = load_config(path);
    if (!out.empty()) c.output_dir = out;
    py::gil_scoped_release release;
    std::ostringstream log;
    return run(c, log);
  }, py::arg("path"), py::arg("output_dir") = "");
}
