#include <cstdlib>
#include <future>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ahflow/config.hpp"
#include "ahflow/experiments.hpp"
#include "ahflow/spectral.hpp"
#include "report.hpp"

namespace {

using namespace ahflow;

struct Outcome {
  std::string experiment;
  bool pass = false;
  std::string key_metric;
};

struct Run {
  const Config& cfg;
  cli::OutputDir& out;
  std::string command;
  std::string config_hash;
  unsigned long long seed = 0;
  std::vector<cli::PlotSeries> plots;
  std::vector<Outcome> outcomes;

  RadialGrid grid() const {
    return RadialGrid::with_spacing(static_cast<int>(cfg.integer("n")), cfg.real("r_max"), cfg.real("h"));
  }

  std::string metadata(const RadialGrid& g) const {
    return fmt::format("ahflow {} command={} config_sha256={} seed={} n={} r_max={} h={} nodes={}", AHFLOW_VERSION,
                       command, config_hash, seed, g.dim(), g.r_max(), g.spacing(), g.size());
  }

  std::string header(const RadialGrid& g) const { return "# " + metadata(g) + "\n"; }

  WeightedNormParams norm() const { return {cfg.real("mu"), static_cast<int>(cfg.integer("k"))}; }

  ExperimentConfig experiment() const {
    ExperimentConfig ex;
    ex.kind = cfg.text("flow.kind") == "ricci" ? FlowKind::ricci : FlowKind::deturck;
    ex.t_end = cfg.real("flow.t_end");
    ex.cfl_safety = cfg.real("flow.cfl");
    ex.record_interval = cfg.real("flow.record_interval");
    ex.integrator = cfg.text("flow.integrator") == "semi-implicit" ? Integrator::semi_implicit : Integrator::rk4;
    ex.norm = norm();
    ex.epsilon = cfg.real("experiment.epsilon");
    ex.min_r2 = cfg.real("experiment.min_r2");
    ex.fit_fraction = cfg.real("experiment.fit_fraction");
    return ex;
  }

  std::string profile_id() const {
    const auto& p = cfg.text("metric.profile");
    if (p == "bump") return fmt::format("bump-A{}", cfg.real("metric.amplitude"));
    if (p == "random") return fmt::format("random-seed{}", seed);
    if (p == "snapshot") return "snapshot";
    return "hyperbolic";
  }

  RotSymMetric initial_metric(const RadialGrid& g) const {
    const auto& p = cfg.text("metric.profile");
    if (p == "hyperbolic") return hyperbolic_metric(g);
    if (p == "bump") return profile_metric(g, {cfg.real("metric.amplitude"), 1.0}, cfg.real("mu"));
    if (p == "random") return profile_metric(g, random_profiles(seed, 1).front(), cfg.real("mu"));
    auto s = read_snapshot(cfg.text("metric.snapshot"));
    require_same_grid(s.grid(), g, "snapshot");
    return s;
  }

  void record(Outcome o) { outcomes.push_back(std::move(o)); }
};

void write_trajectory(Run& run, const std::string& name, const FlowTrajectory& traj, const RadialGrid& g) {
  run.out.write(name, format_trajectory_csv(traj, run.metadata(g)));
  run.plots.push_back({name, 1, 2, true, name + ": weighted C0 distance to g_h"});
}

void cmd_flow(Run& run) {
  const auto g = run.grid();
  const auto g0 = run.initial_metric(g);
  const auto ex = run.experiment();
  auto fc = make_flow_config(g0, ex, ex.t_end);
  fc.normalized = run.cfg.boolean("flow.normalized");
  const auto traj = run_flow(g0, fc);
  write_trajectory(run, "trajectory.csv", traj, g);
  if (!traj.snapshots.empty()) run.out.write("final_metric.txt", format_snapshot(traj.final_metric()));
  const double d = traj.diagnostics.empty() ? std::nan("") : traj.diagnostics.back().norm_c0;
  run.record({"flow", traj.status == FlowStatus::completed,
              fmt::format("status={};final_norm_c0={:.6e}", to_string(traj.status), d)});
}

LinearOperatorMatrix hyperbolic_linearization(Run& run, const RadialGrid& g) {
  const auto gh = hyperbolic_metric(g);
  return assemble_linearized(gh, gh, {run.cfg.boolean("spectrum.normalized"), 1e-6});
}

void cmd_spectrum(Run& run) {
  const auto g = run.grid();
  const auto L = hyperbolic_linearization(run, g);
  const auto rep = spectrum(L);
  std::string csv = run.header(g) + "# convention: " + L.convention + "\nindex,re,im\n";
  for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i)
    csv += fmt::format("{},{:.12g},{:.12g}\n", i, rep.eigenvalues[i].real(), rep.eigenvalues[i].imag());
  run.out.write("spectrum.csv", csv);
  run.plots.push_back({"spectrum.csv", 2, 3, false, "eigenvalues of the linearization at g_h"});
  const double bound = g.dim() - 2.0;
  run.record({"spectrum", rep.min_real >= bound - 0.1, fmt::format("min_real={:.6f};bound={}", rep.min_real, bound)});
}

void cmd_sector(Run& run) {
  const auto g = run.grid();
  const auto L = hyperbolic_linearization(run, g);
  SectorOptions opt;
  opt.rays = static_cast<int>(run.cfg.integer("sector.rays"));
  opt.magnitudes = static_cast<int>(run.cfg.integer("sector.radii"));
  opt.min_radius = run.cfg.real("sector.s_min");
  opt.max_radius = run.cfg.real("sector.s_max");
  opt.norm = {run.cfg.real("mu"), 0};
  const auto rep = sector_check(L, run.cfg.real("sector.omega"), run.cfg.real("sector.theta"), opt);
  std::string csv = run.header(g) + fmt::format("# omega={} theta={} C={:.6e} singular={} eigenvalues_in_sector={}\n",
                                                rep.omega, rep.theta, rep.C, rep.singular_samples,
                                                rep.eigenvalues_in_sector.size());
  csv += "re,im,res_norm,bound,pass\n";
  for (const auto& s : rep.samples)
    csv += fmt::format("{:.12g},{:.12g},{:.12g},{:.12g},{}\n", s.lambda.real(), s.lambda.imag(), s.res_norm, s.bound,
                       s.pass ? 1 : 0);
  run.out.write("sector.csv", csv);
  std::string eig = run.header(g) + "re,im\n";
  for (const auto& z : rep.eigenvalues_in_sector) eig += fmt::format("{:.12g},{:.12g}\n", z.real(), z.imag());
  run.out.write("sector_eigenvalues.csv", eig);
  run.plots.push_back({"sector.csv", 1, 3, true, "resolvent norm over the sector samples"});
  run.record({"sector", rep.pass(),
              fmt::format("C={:.6e};eigenvalues_in_sector={};singular={}", rep.C, rep.eigenvalues_in_sector.size(),
                          rep.singular_samples)});
}

void cmd_indicial(Run& run) {
  const auto g = run.grid();
  const double lambda = run.cfg.real("indicial.lambda");
  IndicialScanOptions opt;
  opt.gamma_min = run.cfg.real("indicial.gamma_min");
  opt.gamma_max = run.cfg.real("indicial.gamma_max");
  opt.gamma_step = run.cfg.real("indicial.gamma_step");
  const bool scalar = run.cfg.text("indicial.operator") == "scalar";
  const auto op = scalar ? scalar_indicial_operator(g) : matrix_indicial_operator(hyperbolic_linearization(run, g));
  const auto emp = empirical_indicial(op, lambda, opt);

  std::string csv = run.header(g) + fmt::format("# operator={} lambda={}\ngamma", run.cfg.text("indicial.operator"), lambda);
  for (int b = 0; b < op.components; ++b) csv += fmt::format(",branch{}", b);
  csv += "\n";
  for (std::size_t j = 0; j < emp.gamma_grid.size(); ++j) {
    csv += fmt::format("{:.6g}", emp.gamma_grid[j]);
    for (double v : emp.branches[j]) csv += fmt::format(",{:.12g}", v);
    csv += "\n";
  }
  run.out.write("indicial_scan.csv", csv);
  std::string roots = run.header(g) + "root\n";
  for (double r : emp.roots) roots += fmt::format("{:.12g}\n", r);
  run.out.write("indicial_roots.csv", roots);
  run.plots.push_back({"indicial_scan.csv", 1, 2, false, "leading coefficient of the indicial operator"});

  const auto found = emp.decaying_root(g.dim());
  if (scalar) {
    const auto expected = indicial_roots_scalar(g.dim(), lambda);
    const bool ok = found && !expected.beyond_threshold && std::abs(*found - expected.gamma_plus.real()) < 0.05;
    run.record({"indicial", ok,
                fmt::format("gamma_plus={};expected={:.6f}", found ? fmt::format("{:.6f}", *found) : "none",
                            expected.gamma_plus.real())});
  } else {
    run.record({"indicial", found && *found > 0.5 * (g.dim() - 1),
                fmt::format("gamma_plus={};threshold={}", found ? fmt::format("{:.6f}", *found) : "none",
                            0.5 * (g.dim() - 1))});
  }
}

std::string verdict_metric(const ConvergenceVerdict& v) {
  return fmt::format("final={:.6e};r2={};omega={};entered_half_eps={};reason={}", v.final_distance,
                     v.fit ? fmt::format("{:.6f}", v.fit->r2) : "none",
                     v.omega ? fmt::format("{:.6f}", *v.omega) : "none",
                     v.entered_half_eps ? fmt::format("{:.4g}", *v.entered_half_eps) : "never", v.reason);
}

void exp_convergence(Run& run) {
  const auto g = run.grid();
  const auto ex = run.experiment();
  const auto rep = convergence_experiment(run.profile_id(), run.initial_metric(g), ex);
  const auto csv = format_trajectory_csv(rep.trajectory, run.metadata(g));
  run.out.write("convergence.csv", csv);
  run.plots.push_back({"convergence.csv", 1, 2, true, "distance to g_h"});
  // the verdict must be reproducible from the saved series alone
  const auto series = parse_trajectory_csv(csv);
  const auto again = judge_convergence(series.t, series.norm_c0, series.status, ex);
  if (again.converged != rep.verdict.converged) throw Error("convergence verdict differs when re-read from the CSV");
  run.record({"convergence", rep.verdict.converged, verdict_metric(rep.verdict)});
}

void exp_stability(Run& run) {
  const auto g = run.grid();
  const auto ex = run.experiment();
  const auto base = run.initial_metric(g);
  auto bumps = standard_bumps();
  bumps.resize(static_cast<std::size_t>(run.cfg.integer("experiment.bumps")));
  std::vector<std::future<StabilityReport>> jobs;
  for (double delta : run.cfg.list("experiment.deltas"))
    for (const auto& b : bumps)
      jobs.push_back(std::async(std::launch::async, [&, b, delta] {
        return convergence_stability_experiment(run.profile_id(), base, b, delta, ex);
      }));
  std::string table = run.header(g) + "perturbation,delta,verdict,final_distance,r2,omega,entered_half_eps\n";
  bool all = true;
  int converged = 0;
  for (auto& job : jobs) {
    const auto rep = job.get();
    const auto& v = rep.verdict;
    all = all && v.converged;
    converged += v.converged ? 1 : 0;
    const auto name = fmt::format("stability_{}_d{:g}.csv", rep.perturbation_id, rep.delta);
    run.out.write(name, format_trajectory_csv(rep.trajectory, run.metadata(g)));
    table += fmt::format("{},{:g},{},{:.6e},{},{},{}\n", rep.perturbation_id, rep.delta,
                         v.converged ? "converge" : "fail", v.final_distance,
                         v.fit ? fmt::format("{:.6f}", v.fit->r2) : "", v.omega ? fmt::format("{:.6f}", *v.omega) : "",
                         v.entered_half_eps ? fmt::format("{:.4g}", *v.entered_half_eps) : "");
  }
  run.out.write("stability.csv", table);
  run.record({"stability", all, fmt::format("converged={}/{}", converged, jobs.size())});
}

void exp_dependence(Run& run) {
  const auto g = run.grid();
  auto ex = run.experiment();
  const auto g0 = run.initial_metric(g);
  const WeightedNormParams c2{run.cfg.real("mu"), 2};
  ex.norm = c2;
  const auto p = unit_bump(g0, standard_bumps().front(), c2);
  const auto rep = continuous_dependence_sweep(g0, p, run.cfg.list("experiment.deltas"), run.cfg.real("experiment.tau"), ex);
  std::string csv = run.header(g) + fmt::format("# tau={} degenerate_request={}\ndelta,ratio,status\n", rep.tau,
                                                rep.degenerate_request ? 1 : 0);
  for (std::size_t i = 0; i < rep.ratios.size(); ++i)
    csv += fmt::format("{:g},{},{}\n", rep.deltas[i], rep.ratios[i] ? fmt::format("{:.12g}", *rep.ratios[i]) : "",
                       rep.statuses[i]);
  run.out.write("dependence.csv", csv);
  run.plots.push_back({"dependence.csv", 1, 2, false, "sup ratio over [tau/2, tau]"});
  run.record({"dependence", rep.pass, fmt::format("spread={:.6e}", rep.spread)});
}

void exp_gauge(Run& run) {
  const auto ex = run.experiment();
  const int n = static_cast<int>(run.cfg.integer("n"));
  const double mu = run.cfg.real("mu");
  const auto& profile = run.cfg.text("metric.profile");
  if (profile == "snapshot") throw PreconditionError("gauge check needs an analytic profile, not a snapshot");
  const double amplitude = run.cfg.real("metric.amplitude");
  const auto random = random_profiles(run.seed, 1).front();
  auto make = [&](const RadialGrid& g) {
    if (profile == "hyperbolic") return hyperbolic_metric(g);
    return profile_metric(g, profile == "random" ? random : BumpProfile{amplitude, 1.0}, mu);
  };
  const int segments = static_cast<int>(run.cfg.integer("flow.segments"));
  const auto rep = gauge_consistency_check(make, n, run.cfg.real("r_max"), run.cfg.list("experiment.levels"),
                                           run.cfg.real("experiment.tau"), segments, ex);
  const auto g = run.grid();
  std::string csv = run.header(g) + fmt::format("# tau={} segments={} order={:.6f} monotone={} failure={}\n", rep.tau,
                                                rep.segments, rep.order, rep.monotone ? 1 : 0, rep.failure);
  csv += "h,dt,discrepancy,chained_discrepancy,seconds\n";
  bool chained_ok = true;
  for (const auto& l : rep.levels) {
    csv += fmt::format("{:g},{:.6e},{:.6e},{:.6e},{:.2f}\n", l.h, l.dt, l.discrepancy, l.chained_discrepancy, l.seconds);
    if (segments > 1 && !(l.chained_discrepancy <= 3.0 * l.discrepancy)) chained_ok = false;
  }
  run.out.write("gauge.csv", csv);
  run.plots.push_back({"gauge.csv", 1, 3, true, "direct vs recovered discrepancy at tau"});
  const bool ok = rep.failure.empty() && rep.monotone && rep.order >= 1.5 && chained_ok;
  run.record({"gauge-check", ok, fmt::format("order={:.4f};monotone={};chained_within_3x={}", rep.order, rep.monotone,
                                             chained_ok)});
}

void exp_curvature_scan(Run& run) {
  const auto g = run.grid();
  const auto rows = curvature_condition_scan(g, run.cfg.list("experiment.amplitudes"), run.cfg.real("mu"));
  std::string csv = run.header(g) + "amplitude,min_secT,distance,admissible\n";
  bool increasing = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += fmt::format("{:g},{:.12g},{:.12g},{}\n", rows[i].amplitude, rows[i].min_sec_t, rows[i].distance,
                       rows[i].admissible ? 1 : 0);
    if (i > 0 && rows[i].amplitude > rows[i - 1].amplitude && !(rows[i].distance > rows[i - 1].distance))
      increasing = false;
  }
  run.out.write("curvature_scan.csv", csv);
  run.plots.push_back({"curvature_scan.csv", 1, 3, false, "distance to g_h along the family"});
  run.record({"curvature-scan", increasing, fmt::format("rows={};distance_increasing={}", rows.size(), increasing)});
}

void cmd_experiment(Run& run, const std::string& name) {
  if (name == "convergence") exp_convergence(run);
  else if (name == "stability") exp_stability(run);
  else if (name == "dependence") exp_dependence(run);
  else if (name == "gauge") exp_gauge(run);
  else exp_curvature_scan(run);
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n') c = ' ';
    else if (c == ',') c = ';';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotationally symmetric Ricci flow and Ricci-DeTurck flow on asymptotically hyperbolic metrics"};
  app.fallthrough();
  std::string config_path;
  std::string out_dir = "ahflow-out";
  std::vector<std::string> overrides;
  unsigned long long seed = 0;
  app.add_option("--config", config_path, "configuration file (key = value with [section] headers)");
  app.add_option("--out", out_dir, "output directory (RICCI_OUT overrides)");
  app.add_option("--set", overrides, "override one key, e.g. --set flow.t_end=5")->take_all();
  app.add_option("--seed", seed, "seed for randomized sampling");
  app.require_subcommand(1, 1);

  std::string experiment_name;
  for (const char* name : {"flow", "spectrum", "sector", "indicial", "gauge-check"}) app.add_subcommand(name);
  auto* exp = app.add_subcommand("experiment", "run a scripted experiment");
  exp->add_option("name", experiment_name, "convergence | stability | dependence | gauge | curvature-scan");
  app.get_subcommand("flow")->description("integrate the configured flow and write the trajectory");
  app.get_subcommand("spectrum")->description("eigenvalues of the linearization at g_h");
  app.get_subcommand("sector")->description("sampled resolvent bound over a sector");
  app.get_subcommand("indicial")->description("empirical indicial roots");
  app.get_subcommand("gauge-check")->description("direct flow vs gauge-recovered DeTurck flow under refinement");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    std::string text;
    std::vector<cli::ManifestInput> inputs;
    if (!config_path.empty()) {
      text = cli::read_file(config_path);
      inputs.push_back({"config", config_path, cli::sha256_hex(text)});
    }
    auto cfg = Config::parse(text);
    if (!experiment_name.empty()) overrides.push_back("experiment.name=" + experiment_name);
    cfg.apply(overrides);
    if (const char* env = std::getenv("RICCI_OUT"); env && *env) out_dir = env;

    cli::OutputDir out(out_dir);
    const std::string effective = cfg.echo();
    Run run{cfg, out, command, cli::sha256_hex(effective), seed, {}, {}};

    if (command == "flow") cmd_flow(run);
    else if (command == "spectrum") cmd_spectrum(run);
    else if (command == "sector") cmd_sector(run);
    else if (command == "indicial") cmd_indicial(run);
    else if (command == "gauge-check") exp_gauge(run);
    else cmd_experiment(run, cfg.text("experiment.name"));

    std::string summary = "experiment,verdict,key_metric\n";
    bool all = true;
    for (const auto& o : run.outcomes) {
      summary += fmt::format("{},{},{}\n", o.experiment, o.pass ? "pass" : "fail", one_line(o.key_metric));
      all = all && o.pass;
      std::cout << fmt::format("{},{},{}\n", o.experiment, o.pass ? "pass" : "fail", one_line(o.key_metric));
    }
    out.write("summary.csv", summary);
    out.write("plot.gp", cli::format_plot_script(run.plots));
    auto files = out.files();
    const auto manifest = cli::format_manifest(command, seed, run.config_hash, inputs, effective, files);
    std::ofstream(out.root() / "manifest.txt", std::ios::binary) << manifest;
    return all ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error,config," << one_line(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error,runtime," << one_line(e.what()) << "\n";
    return 2;
  }
}
