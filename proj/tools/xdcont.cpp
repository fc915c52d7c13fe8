#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "xdcont/cli_io.hpp"
#include "xdcont/error.hpp"

namespace {

using xdcont::RunConfig;

struct Common {
  std::string config;
  std::string out;
  int threads = 0;
  long long seed = -1;
};

void add_common(CLI::App* app, Common& c, bool needs_config = true) {
  if (needs_config) app->add_option("config", c.config, "JSON run configuration")->required();
  app->add_option("--out", c.out, "Output directory (overrides output_dir)");
  app->add_option("--threads", c.threads, "Worker threads for independent runs")->check(CLI::PositiveNumber);
  app->add_option("--seed", c.seed, "Seed for random test directions")->check(CLI::NonNegativeNumber);
}

RunConfig load(const Common& c) {
  RunConfig cfg = xdcont::load_config(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.threads > 0) cfg.threads = c.threads;
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  return cfg;
}

int report(const std::exception& e) {
  std::cout << xdcont::error_json(e).dump() << std::endl;
  const auto* err = dynamic_cast<const xdcont::Error*>(&e);
  if (err && (err->code() == xdcont::ErrorCode::parse_error ||
              err->code() == xdcont::ErrorCode::validation_error))
    return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steady-state continuation and bifurcation analysis for cross-diffusion systems"};
  app.require_subcommand(1);

  Common run_opts, turing_opts, sweep_opts, switch_opts, mesh_opts;
  auto* run = app.add_subcommand("run", "Run the study selected in the config");
  add_common(run, run_opts);

  auto* turing = app.add_subcommand("turing", "Linear stability predictions of the homogeneous state");
  add_common(turing, turing_opts);

  auto* sweep = app.add_subcommand("sweep-eps", "Fast-reaction eps sweep and convergence fit");
  add_common(sweep, sweep_opts);

  xdcont::SwitchRequest req;
  std::vector<double> combination;
  bool random_combination = false;
  auto* sw = app.add_subcommand("switch", "Switch branches at a recorded branch point");
  add_common(sw, switch_opts);
  sw->add_option("--event", req.event_id, "Event id from events.json")->required();
  sw->add_option("--direction", req.direction, "+1 or -1 along the kernel vector")
      ->check(CLI::IsMember({1, -1}));
  sw->add_option("--combination", combination, "Coefficients on the kernel basis")->delimiter(',');
  sw->add_flag("--random", random_combination, "Random kernel combination drawn from --seed");

  auto* mesh = app.add_subcommand("mesh", "Mesh utilities");
  mesh->require_subcommand(1);
  auto* dump = mesh->add_subcommand("dump", "Write the configured mesh as a text snapshot");
  add_common(dump, mesh_opts);

  std::string plot_dir, measure = "v_at_origin", plot_label = "d";
  auto* plot = app.add_subcommand("plot-data", "Re-render diagram SVGs from branch CSVs");
  plot->add_option("dir", plot_dir, "Run output directory")->required();
  plot->add_option("--measure", measure, "v_at_origin, u_L1 or u_L2")
      ->check(CLI::IsMember({"v_at_origin", "u_L1", "u_L2"}));
  plot->add_option("--param-label", plot_label, "Horizontal axis label");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return xdcont::run(load(run_opts), std::cerr);
    if (turing->parsed()) {
      RunConfig c = load(turing_opts);
      c.study = xdcont::Study::turing;
      return xdcont::run(c, std::cerr);
    }
    if (sweep->parsed()) {
      RunConfig c = load(sweep_opts);
      c.study = xdcont::Study::sweep_eps;
      return xdcont::run(c, std::cerr);
    }
    if (sw->parsed()) {
      req.combination = combination;
      req.random_combination = random_combination;
      xdcont::run_switch(load(switch_opts), req, std::cerr);
      return 0;
    }
    if (dump->parsed()) {
      const RunConfig c = load(mesh_opts);
      const auto m = xdcont::build_config_mesh(c);
      std::filesystem::create_directories(c.output_dir);
      const auto path = c.output_dir / "mesh.txt";
      std::ofstream out(path);
      if (!out) xdcont::fail(xdcont::ErrorCode::io_error, "cannot write '" + path.string() + "'");
      xdcont::write_mesh_snapshot(out, *m);
      std::cerr << "mesh: " << m->node_count() << " nodes, " << m->element_count() << " elements -> "
                << path.string() << "\n";
      return 0;
    }
    if (plot->parsed()) {
      xdcont::SvgOptions so;
      so.measure = measure;
      so.param_label = plot_label;
      xdcont::plot_data(plot_dir, so);
      return 0;
    }
  } catch (const std::exception& e) {
    return report(e);
  }
  return 0;
}
