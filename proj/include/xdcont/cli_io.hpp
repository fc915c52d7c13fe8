#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "xdcont/experiments.hpp"
#include "xdcont/turing.hpp"

namespace xdcont {

enum class Study { single_branch, full_diagram, turing, sweep_eps, rings };
std::string to_string(Study s);
Study study_from_string(const std::string& name);

/// Which homogeneous-branch points a full diagram switches at.
struct DiagramSettings {
  /// Number of leading simple branch points on the homogeneous branch.
  int switch_points = 2;
  /// 1: switched branches only; 2: also switch at their first branch points.
  int depth = 1;
  int secondary_points = 1;
};

struct RunConfig {
  ModelKind model = ModelKind::cross;
  DomainSpec domain = DomainSpec::interval(1.0);
  int nx = 26;
  int ny = 101;
  Params params;
  std::string param_name = "d";
  double param_start = 0.04;
  int direction = -1;
  ContinuationSettings continuation;
  Study study = Study::full_diagram;
  DiagramSettings diagram;
  PredictionOptions turing;
  std::vector<double> sweep_eps;
  int sweep_events = 3;
  std::optional<double> branch_lo;
  std::optional<double> branch_hi;
  std::filesystem::path output_dir = "out";
  int threads = 1;
  std::uint64_t seed = 0;
  /// Human-readable notes about defaulted fields, echoed in the run log.
  std::vector<std::string> notes;
};

/// Parses and validates a config. Unknown keys and invalid values raise
/// parse_error / validation_error naming the offending field path.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

std::shared_ptr<const Mesh> build_config_mesh(const RunConfig& c);
SteadyProblem build_problem(const RunConfig& c);

// ---- file emission ----

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double x);

void write_branch_csv(std::ostream& out, const Branch& branch);
struct CsvBranch {
  std::string label;
  std::vector<int> step;
  std::vector<double> param, v_at_origin, u_l1, u_l2;
  std::vector<int> n_unstable;
  std::vector<std::string> event_flag;
};
CsvBranch read_branch_csv(std::istream& in, std::string label);

struct SvgOptions {
  /// "v_at_origin", "u_L1" or "u_L2".
  std::string measure = "v_at_origin";
  std::string param_label = "d";
  int width = 800;
  int height = 560;
};
/// Bifurcation diagram: thick polylines for stable segments, thin for
/// unstable; circles at branch points, crosses at folds, squares at Hopf.
std::string render_diagram_svg(const std::vector<CsvBranch>& branches, const SvgOptions& opts);
CsvBranch to_csv_branch(const Branch& branch, const std::string& label);

void write_turing_csv(std::ostream& out, const std::vector<TuringPrediction>& preds);
/// d_B as a function of lambda, sampled on (0, lambda_max].
void write_critical_curve_csv(std::ostream& out, const Params& p, double lambda_max, int samples);
std::string render_critical_curve_svg(const Params& p, const std::vector<LaplaceMode>& modes,
                                      double lambda_max, int samples);

void write_sweep_csv(std::ostream& out, const SweepResult& r);
nlohmann::json fit_summary(const SweepResult& r);

nlohmann::json error_json(const std::exception& e);

/// Executes the configured study and writes all artifacts under
/// config.output_dir. Returns the process exit status.
int run(const RunConfig& config, std::ostream& log);

/// Study entry points used by `run` and the CLI.
void run_turing(const RunConfig& c, std::ostream& log);
void run_sweep(const RunConfig& c, std::ostream& log);
void run_diagram(const RunConfig& c, std::ostream& log);
void run_rings(const RunConfig& c, std::ostream& log);

struct SwitchRequest {
  int event_id = -1;
  int direction = 1;
  /// Coefficients on the leading kernel basis; empty means the single kernel
  /// vector times `direction`.
  std::vector<double> combination;
  bool random_combination = false;
};
/// Manual switching at an event recorded in output_dir/events.json.
void run_switch(const RunConfig& c, const SwitchRequest& req, std::ostream& log);

/// Re-renders diagram SVGs from the branch CSVs in `dir`.
void plot_data(const std::filesystem::path& dir, const SvgOptions& opts);

}  // namespace xdcont
