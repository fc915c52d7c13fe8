#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "xdcont/cli_io.hpp"
#include "xdcont/error.hpp"

using namespace xdcont;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path config_dir = XDCONT_CONFIG_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("xdcont_test_" + name);
  fs::remove_all(p);
  return p;
}

ErrorCode code_of(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::io_error;  // sentinel: nothing thrown
}

std::string message_of(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

RunConfig small_diagram(const fs::path& out) {
  RunConfig c = load_config(config_dir / "table1_1d.json");
  c.diagram.switch_points = 1;
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_CASE("bundled 1D config carries the Table 1 parameters") {
  const RunConfig c = load_config(config_dir / "table1_1d.json");
  CHECK(c.model == ModelKind::cross);
  CHECK(c.params.r1 == 5.0);
  CHECK(c.params.r2 == 2.0);
  CHECK(c.params.a1 == 3.0);
  CHECK(c.params.a2 == 3.0);
  CHECK(c.params.b1 == 1.0);
  CHECK(c.params.b2 == 1.0);
  CHECK(c.params.d12 == 3.0);
  CHECK(c.params.M == 1.0);
  CHECK(c.nx == 26);
  CHECK(c.param_name == "d");
  CHECK(c.continuation.param_lo == 0.003);
  CHECK(c.study == Study::full_diagram);
}

TEST_CASE("all bundled configs load") {
  for (const auto& entry : fs::directory_iterator(config_dir))
    if (entry.path().extension() == ".json") CHECK_NOTHROW(load_config(entry.path()));
  CHECK(load_config(config_dir / "table1_2d.json").ny == 101);
  CHECK(load_config(config_dir / "table1_1d_eps.json").study == Study::sweep_eps);
}

TEST_CASE("defaults are echoed as notes") {
  const RunConfig c = parse_config(json::parse(R"({"domain": {"kind": "rectangle", "lx": 1, "ly": 4}})"));
  CHECK(c.ny == 101);
  REQUIRE_FALSE(c.notes.empty());
  CHECK(c.notes.front().find("mesh.ny") != std::string::npos);
  CHECK(c.continuation.n_eigs == 20);
  CHECK(parse_config(json::object()).continuation.n_eigs == 10);
}

TEST_CASE("config validation names the offending field") {
  CHECK(code_of(json::parse(R"({"model": "fast", "params": {"eps": 0}})")) == ErrorCode::validation_error);
  CHECK(message_of(json::parse(R"({"model": "fast", "params": {"eps": -1}})")).find("params.eps") != std::string::npos);
  CHECK(message_of(json::parse(R"({"continuation": {"dsmax": 1}})")).find("continuation.dsmax") != std::string::npos);
  CHECK(code_of(json::parse(R"({"mesh": {"nx": "many"}})")) != ErrorCode::io_error);
  CHECK(code_of(json::parse(R"({"model": "other"})")) != ErrorCode::io_error);
  CHECK(code_of(json::parse(R"({"continuation": {"start": 0.5, "range": [0.003, 0.05]}})")) ==
        ErrorCode::validation_error);
  CHECK_NOTHROW(parse_config(json::parse(R"({"model": "cross", "params": {"eps": 0}})")));

  const fs::path bad = scratch("bad.json");
  std::ofstream(bad) << "{ not json";
  try {
    load_config(bad);
    FAIL("expected parse_error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse_error);
  }
  CHECK_THROWS_AS(load_config(scratch("missing.json")), Error);
}

TEST_CASE("study names round trip") {
  for (Study s : {Study::single_branch, Study::full_diagram, Study::turing, Study::sweep_eps, Study::rings})
    CHECK(study_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(study_from_string("bogus"), Error);
}

TEST_CASE("doubles are emitted for exact round trip") {
  for (double x : {0.1, 1.0 / 3.0, 0.032788417614979443, -1e-300, 6.02214076e23}) {
    CHECK(std::stod(format_double(x)) == x);
  }
}

TEST_CASE("branch CSV round trip") {
  const auto mesh = xdtest::interval(11);
  const SteadyProblem prob(mesh, Params::table1(0.04), ModelKind::cross, "d");
  ContinuationSettings s;
  s.param_lo = 0.02;
  s.param_hi = 0.05;
  const Branch b = continue_branch(prob, init_from_homogeneous(prob, 0.04, s), s);
  std::stringstream ss;
  write_branch_csv(ss, b);
  const std::string text = ss.str();
  CHECK(text.rfind("step,param,v_at_origin,u_L1,u_L2,n_unstable,event_flag\n", 0) == 0);
  const CsvBranch back = read_branch_csv(ss, "hom");
  REQUIRE(back.param.size() == b.points.size());
  for (size_t i = 0; i < b.points.size(); ++i) {
    CHECK(back.param[i] == b.points[i].param());
    CHECK(back.u_l1[i] == b.points[i].measures.u_l1);
    CHECK(back.n_unstable[i] == b.points[i].n_unstable);
    CHECK(back.event_flag[i] == b.points[i].event_flag);
  }
}

TEST_CASE("diagram SVG conventions") {
  CsvBranch b;
  b.label = "x";
  for (int i = 0; i < 6; ++i) {
    b.step.push_back(i);
    b.param.push_back(0.04 - 0.002 * i);
    b.v_at_origin.push_back(0.125 + 0.01 * i);
    b.u_l1.push_back(1.6);
    b.u_l2.push_back(1.6);
    b.n_unstable.push_back(i < 3 ? 0 : 1);
    b.event_flag.push_back(i == 2 ? "BP" : i == 4 ? "FP" : i == 5 ? "HP" : "");
  }
  const std::string svg = render_diagram_svg({b}, {});
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("stroke-width=\"3\"") != std::string::npos);
  CHECK(svg.find("stroke-width=\"1\" points") != std::string::npos);
  CHECK(svg.find("<circle") != std::string::npos);
  CHECK(svg.find("<path d=\"M") != std::string::npos);
}

TEST_CASE("error JSON is machine readable") {
  const json j = error_json(Error(ErrorCode::validation_error, "params.eps: must be positive"));
  CHECK(j.at("error") == "validation-error");
  CHECK(j.at("message") == "params.eps: must be positive");
  CHECK(error_json(std::runtime_error("boom")).at("error") == "internal");
}

TEST_CASE("run reports failures with error.json") {
  RunConfig c = small_diagram(scratch("fail"));
  c.param_start = 0.04;
  c.params.r1 = 7.0;  // no admissible homogeneous state
  std::ostringstream log;
  CHECK(run(c, log) != 0);
  const json err = json::parse(slurp(c.output_dir / "error.json"));
  CHECK(err.contains("error"));
  CHECK(err.contains("message"));
}

TEST_CASE("diagram runs are deterministic and re-validatable") {
  const RunConfig a = small_diagram(scratch("det_a"));
  const RunConfig b = small_diagram(scratch("det_b"));
  std::ostringstream log;
  REQUIRE(run(a, log) == 0);
  REQUIRE(run(b, log) == 0);
  int csv_count = 0;
  for (const auto& entry : fs::directory_iterator(a.output_dir / "branches")) {
    const fs::path other = b.output_dir / "branches" / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
    ++csv_count;
  }
  CHECK(csv_count == 3);  // homogeneous branch plus one switched pair
  CHECK(slurp(a.output_dir / "events.json") == slurp(b.output_dir / "events.json"));
  CHECK(fs::exists(a.output_dir / "diagram.svg"));
  CHECK(fs::exists(a.output_dir / "branches.json"));

  const SteadyProblem prob = build_problem(a);
  const json events = json::parse(slurp(a.output_dir / "events.json"));
  REQUIRE_FALSE(events.empty());
  for (const auto& ev : events) {
    std::ifstream in(a.output_dir / ev.at("snapshot").get<std::string>());
    const StateSnapshot snap = read_state_snapshot(in);
    CHECK(prob.residual(snap.state.fields, snap.state.param_value).lpNorm<Eigen::Infinity>() <=
          a.continuation.newton_tol);
  }
}

TEST_CASE("manual switching and re-plotting from disk") {
  RunConfig c = small_diagram(scratch("switch"));
  c.diagram.switch_points = 0;
  std::ostringstream log;
  REQUIRE(run(c, log) == 0);
  SwitchRequest req;
  req.event_id = 0;
  req.direction = -1;
  run_switch(c, req, log);
  CHECK(fs::exists(c.output_dir / "branches" / "switch000-.csv"));
  const json events = json::parse(slurp(c.output_dir / "events.json"));
  CHECK(events.size() > 5);

  req.event_id = 999;
  CHECK_THROWS_AS(run_switch(c, req, log), Error);

  SvgOptions so;
  so.measure = "u_L2";
  plot_data(c.output_dir, so);
  CHECK(fs::exists(c.output_dir / "diagram_u_L2.svg"));
}

TEST_CASE("turing study writes the prediction table") {
  RunConfig c = load_config(config_dir / "table1_1d.json");
  c.output_dir = scratch("turing");
  std::ostringstream log;
  run_turing(c, log);
  std::ifstream in(c.output_dir / "turing.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "n,m,lambda,multiplicity,param,critical_value");
  CHECK(first.rfind("1,0,", 0) == 0);
  CHECK(fs::exists(c.output_dir / "critical_curve.csv"));
  CHECK(fs::exists(c.output_dir / "critical_curve.svg"));
}

TEST_CASE("sweep CSV layout") {
  SweepResult r;
  r.param_name = "d";
  r.rows.push_back({0.01, 1, EventKind::branch_point, 0.03, 0.0328});
  r.rows.push_back({0.01, 2, EventKind::branch_point, std::nullopt, 0.0205});
  std::ostringstream os;
  write_sweep_csv(os, r);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "eps,event,value,ref,abs_diff");
  std::getline(in, line);
  std::vector<std::string> cells;
  std::istringstream row(line);
  for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
  REQUIRE(cells.size() == 5);
  CHECK(std::stod(cells[0]) == 0.01);
  CHECK(cells[1] == "B1");
  CHECK(std::stod(cells[2]) == 0.03);
  CHECK(std::stod(cells[3]) == 0.0328);
  CHECK(std::stod(cells[4]) == doctest::Approx(0.0028));
}
