// Command-line front end: scenario execution and CSV/JSON/SVG emission.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pacer/fit.hpp"
#include "pacer/fixtures.hpp"
#include "pacer/io.hpp"
#include "pacer/model.hpp"
#include "pacer/ocp.hpp"
#include "pacer/turnpike.hpp"

namespace fs = std::filesystem;
using pacer::json;

namespace {

enum ExitCode { kOk = 0, kDomainError = 1, kSolverFailure = 2 };

int log_level() {
  const char* env = std::getenv("PACER_LOG");
  if (!env) return 1;
  std::string s(env);
  if (s == "quiet") return 0;
  if (s == "debug") return 2;
  return 1;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[pacer] " << msg << "\n";
}

void emit_error(const std::string& kind, const std::string& message) {
  std::cout << json{{"error", {{"kind", kind}, {"message", message}}}}.dump(2) << std::endl;
}

// "--config fixture:NAME" selects a bundled scenario; otherwise a JSON path.
pacer::ModelConfig load_config(const std::string& spec) {
  const std::string prefix = "fixture:";
  if (spec.rfind(prefix, 0) == 0) return pacer::find_fixture(spec.substr(prefix.size())).config;
  std::ifstream in(spec);
  if (!in) throw std::invalid_argument("config file not found: " + spec);
  json j = json::parse(in);
  return pacer::config_from_json(j);
}

// Applies "--set section.field=value" overrides on the JSON form of the config.
pacer::ModelConfig apply_overrides(pacer::ModelConfig config,
                                   const std::vector<std::string>& overrides) {
  if (overrides.empty()) return config;
  json j = pacer::to_json(config);
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq);
    double value = std::stod(kv.substr(eq + 1));
    json* node = &j;
    std::size_t pos = 0;
    while (true) {
      auto dot = key.find('.', pos);
      std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
      if (dot == std::string::npos) {
        if (!node->contains(part))
          throw std::invalid_argument("--set: unknown field '" + key + "'");
        (*node)[part] = value;
        break;
      }
      if (!node->contains(part)) throw std::invalid_argument("--set: unknown section '" + part + "'");
      node = &(*node)[part];
      pos = dot + 1;
    }
  }
  return pacer::config_from_json(j);
}

std::vector<double> positions(const pacer::Trajectory& traj) {
  std::vector<double> x;
  x.reserve(traj.states.size());
  for (const auto& s : traj.states) x.push_back(s.x);
  return x;
}

void write_solution_plot(const pacer::Trajectory& traj, const pacer::ModelConfig& cfg,
                         const fs::path& path) {
  std::vector<double> x = positions(traj), v, f, u, e_scaled, sig;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    v.push_back(traj.states[k].v);
    f.push_back(traj.states[k].f);
    u.push_back(traj.controls[k]);
    e_scaled.push_back(traj.states[k].e / cfg.runner.e0 * 10.0);
    double e = std::clamp(traj.states[k].e, 0.0, cfg.runner.e0);
    sig.push_back(pacer::sigma_eval(cfg.sigma, e, cfg.runner.e0));
  }
  pacer::write_svg_plot({{"v [m/s]", "#1f77b4", x, v},
                         {"f [m/s^2]", "#d62728", x, f},
                         {"u", "#2ca02c", x, u},
                         {"sigma(e) [W/kg]", "#9467bd", x, sig},
                         {"e / e0 * 10", "#8c564b", x, e_scaled}},
                        path.string(), "distance [m]", "state");
}

int run_solve(const std::string& config_spec, const std::vector<std::string>& overrides,
              const std::string& out_dir, int nodes, double tol) {
  pacer::ModelConfig cfg = apply_overrides(load_config(config_spec), overrides);
  pacer::Transcription spec;
  spec.n_nodes = nodes;
  pacer::AugLagOptions opts;
  opts.kkt_tol = tol;
  log_info("solving full problem on " + std::to_string(nodes) + " nodes");
  pacer::Trajectory traj = pacer::solve_ocp(cfg.runner, cfg.sigma, cfg.slope, spec, opts);
  fs::create_directories(out_dir);
  pacer::write_trajectory_csv(traj, (fs::path(out_dir) / "trajectory.csv").string());
  pacer::PlateauStats st = pacer::plateau_stats(traj, cfg.runner.distance);
  pacer::AuditResult audit = pacer::audit_trajectory(traj, cfg.runner, cfg.sigma, cfg.slope);
  json summary{{"t_f", traj.t_f},
               {"objective", traj.objective},
               {"kkt_residual", traj.kkt_residual},
               {"plateau", {{"v_mean", st.v_mean}, {"f_mean", st.f_mean}, {"u_mean", st.u_mean}}},
               {"audit", {{"position_drift", audit.position_drift},
                          {"energy_drift", audit.energy_drift}}}};
  std::ofstream((fs::path(out_dir) / "summary.json").string()) << summary.dump(2) << "\n";
  write_solution_plot(traj, cfg, fs::path(out_dir) / "solution.svg");
  std::cout << summary.dump(2) << std::endl;
  return kOk;
}

int run_approx(const std::string& config_spec, const std::vector<std::string>& overrides,
               const std::string& out_dir) {
  pacer::ModelConfig cfg = apply_overrides(load_config(config_spec), overrides);
  pacer::TurnpikeProfile profile =
      pacer::assemble_profile(cfg.runner, pacer::three_piece_equivalent(cfg.sigma));
  fs::create_directories(out_dir);
  json summary = pacer::to_json(profile.solution());
  std::ofstream((fs::path(out_dir) / "turnpike.json").string()) << summary.dump(2) << "\n";
  pacer::write_profile_csv(profile, (fs::path(out_dir) / "profile.csv").string());
  const auto& sol = profile.solution();
  std::vector<double> xs, vs;
  double xacc = 0.0, t_prev = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    double t = sol.t_f * i / 1000.0;
    xacc += 0.5 * (profile.velocity(t_prev) + profile.velocity(t)) * (t - t_prev);
    xs.push_back(xacc);
    vs.push_back(profile.velocity(t));
    t_prev = t;
  }
  pacer::write_svg_plot({{"approximate v [m/s]", "#d62728", xs, vs}},
                        (fs::path(out_dir) / "profile.svg").string(), "distance [m]", "v [m/s]");
  std::cout << summary.dump(2) << std::endl;
  return kOk;
}

int run_fit(const std::string& input, double sigma_bar, double vo2max, bool do_refine,
            int nodes, const std::string& out_dir) {
  if (sigma_bar <= 0.0) {
    if (vo2max <= 0.0)
      throw std::invalid_argument("fit: provide --sigma-bar or --vo2max");
    sigma_bar = pacer::vo2_to_sigma(vo2max);
  }
  pacer::VelocitySeries series = pacer::read_velocity_csv(input);
  pacer::FittedParams fitted = pacer::infer(series, sigma_bar);
  if (do_refine) {
    pacer::RefineOptions ropts;
    ropts.n_nodes = nodes;
    log_info("refining against the full solver");
    fitted = pacer::refine(fitted, series, sigma_bar, ropts).params;
  }
  fs::create_directories(out_dir);
  json j = pacer::to_json(fitted);
  std::ofstream((fs::path(out_dir) / "fitted_params.json").string()) << j.dump(2) << "\n";
  std::cout << j.dump(2) << std::endl;
  return kOk;
}

int run_slope_sweep(const std::string& config_spec, const std::vector<std::string>& overrides,
                    const std::string& out_dir, int nodes) {
  pacer::ModelConfig base = apply_overrides(load_config(config_spec), overrides);
  struct Case {
    std::string name;
    pacer::SlopeProfile slope;
  };
  std::vector<Case> cases = {{"flat", pacer::SlopeProfile{}},
                             {"slope3", pacer::find_fixture("slope3").config.slope},
                             {"ramp3", pacer::find_fixture("ramp3").config.slope},
                             {"periodic2", pacer::find_fixture("periodic2").config.slope}};
  fs::create_directories(out_dir);
  pacer::Transcription spec;
  spec.n_nodes = nodes;
  std::ofstream table((fs::path(out_dir) / "plateau_velocities.csv").string());
  table << "scenario,t_f,plateau_v,plateau_f,plateau_u\n";
  std::vector<pacer::PlotSeries> plot;
  const std::vector<std::string> colors = {"#d62728", "#ff7f0e", "#1f77b4", "#2ca02c"};
  json summary = json::array();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    log_info("scenario " + cases[i].name);
    pacer::Trajectory traj =
        pacer::solve_ocp(base.runner, base.sigma, cases[i].slope, spec);
    pacer::PlateauStats st = pacer::plateau_stats(traj, base.runner.distance);
    table << cases[i].name << ',' << pacer::format_number(traj.t_f) << ','
          << pacer::format_number(st.v_mean) << ',' << pacer::format_number(st.f_mean) << ','
          << pacer::format_number(st.u_mean) << '\n';
    pacer::ModelConfig cfg = base;
    cfg.slope = cases[i].slope;
    pacer::write_trajectory_csv(traj,
                                (fs::path(out_dir) / (cases[i].name + ".csv")).string());
    std::vector<double> x = positions(traj), v;
    for (const auto& s : traj.states) v.push_back(s.v);
    plot.push_back({cases[i].name, colors[i % colors.size()], x, v});
    summary.push_back({{"scenario", cases[i].name},
                       {"t_f", traj.t_f},
                       {"plateau_v", st.v_mean}});
  }
  pacer::write_svg_plot(plot, (fs::path(out_dir) / "velocities.svg").string(),
                        "distance [m]", "v [m/s]");
  std::cout << summary.dump(2) << std::endl;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal running pacing: full solver, closed-form approximation, and model inversion"};
  app.require_subcommand(1);

  std::string config_spec = "fixture:flat1500";
  std::string out_dir = "pacer_out";
  std::vector<std::string> overrides;
  int nodes = 400;
  double tol = 1e-7;

  auto add_common = [&](CLI::App* cmd, bool with_nodes) {
    cmd->add_option("--config", config_spec,
                    "JSON config path or fixture:NAME (flat1500, fourpiece1500, slope3, ramp3, periodic2)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--set", overrides, "override a config field, e.g. runner.tau=0.95")
        ->take_all();
    if (with_nodes) {
      cmd->add_option("--nodes", nodes, "collocation nodes");
      cmd->add_option("--tol", tol, "stationarity tolerance");
    }
  };

  auto* solve_cmd = app.add_subcommand(
      "solve", "solve the full pacing problem; writes trajectory.csv (t,x,v,f,e,u), summary.json, solution.svg");
  add_common(solve_cmd, true);

  auto* approx_cmd = app.add_subcommand(
      "approx", "closed-form three-phase approximation; writes turnpike.json, profile.csv (t,v,phase), profile.svg");
  add_common(approx_cmd, false);

  auto* fit_cmd = app.add_subcommand(
      "fit", "infer physiological parameters from a velocity CSV; writes fitted_params.json");
  std::string fit_input;
  double sigma_bar = -1.0, vo2max = -1.0;
  bool do_refine = false;
  fit_cmd->add_option("input", fit_input, "CSV with header 't,v' or 'distance,time'")->required();
  fit_cmd->add_option("--sigma-bar", sigma_bar, "maximal aerobic power [W/kg]");
  fit_cmd->add_option("--vo2max", vo2max, "VO2max [ml/min/kg], converted to sigma_bar");
  fit_cmd->add_flag("--refine", do_refine, "refine against the full solver");
  fit_cmd->add_option("--nodes", nodes, "collocation nodes for refinement");
  fit_cmd->add_option("--out", out_dir, "output directory");

  auto* sweep_cmd = app.add_subcommand(
      "slope-sweep", "solve the bundled slope scenarios; writes plateau_velocities.csv and per-scenario trajectories");
  add_common(sweep_cmd, true);

  auto* vo2_cmd = app.add_subcommand("vo2", "convert VO2max [ml/min/kg] to aerobic power [W/kg]");
  double vo2_value = 0.0;
  vo2_cmd->add_option("value", vo2_value, "VO2max in ml/min/kg")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve_cmd->parsed()) return run_solve(config_spec, overrides, out_dir, nodes, tol);
    if (approx_cmd->parsed()) return run_approx(config_spec, overrides, out_dir);
    if (fit_cmd->parsed())
      return run_fit(fit_input, sigma_bar, vo2max, do_refine, nodes, out_dir);
    if (sweep_cmd->parsed()) return run_slope_sweep(config_spec, overrides, out_dir, nodes);
    if (vo2_cmd->parsed()) {
      std::cout << pacer::vo2_to_sigma(vo2_value) << std::endl;
      return kOk;
    }
  } catch (const pacer::SolverFailure& err) {
    emit_error("solver_failure", err.what());
    return kSolverFailure;
  } catch (const std::exception& err) {
    emit_error("domain_error", err.what());
    return kDomainError;
  }
  return kOk;
}
