// mocp: certificate checks for multiobjective optimal control problems.
//
// Exit codes: 0 check passed, 2 certified failure, 1 usage or input error.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mocp/commands.hpp"

namespace {

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    try {
      out.push_back(std::stod(item, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw mocp::UsageError(flag + ": '" + item + "' is not a number");
  }
  if (out.empty()) throw mocp::UsageError(flag + " needs at least one value");
  return out;
}

void emit(const nlohmann::json& doc, const std::string& out_path) {
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw mocp::UsageError("cannot write '" + out_path + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certificate checks for multiobjective optimal control"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mocp::kToolVersion);

  mocp::RunOptions opts;
  std::string lambda_text;
  std::string out_path;
  bool timing = false;
  double gamma0 = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--grid", opts.grid_n, "Grid intervals N for `zero` trajectories")->capture_default_str();
    sub->add_option("--tol", opts.tol, "Uniform tolerance")->capture_default_str();
    sub->add_option("--seed", opts.seed, "Seed for random probes")->capture_default_str();
    sub->add_option("--eps-act", opts.eps_act, "Active-node threshold")->capture_default_str();
    sub->add_option("--out", out_path, "Output path (default: standard output)");
    sub->add_flag("--timing", timing, "Record wall time in the certificate");
  };

  std::string problem_arg, traj_arg, directions_path, findim_path, controls_arg, builtin_name, audit_path;
  int probe_count = 0;
  mocp::FinDimRunOptions findim_run;
  std::string zbar_text;
  std::vector<std::string> findim_dirs;

  auto* kkt = app.add_subcommand("check-kkt", "First-order conditions with recovered multipliers");
  kkt->add_option("problem", problem_arg, "Problem file or builtin:NAME")->required();
  kkt->add_option("trajectory", traj_arg, "Trajectory file or `zero`")->required();
  kkt->add_option("--lambda", lambda_text, "Objective weights v1,v2,...");
  kkt->add_option("--alpha", opts.h2_alpha, "Regularity threshold for the mixed constraint")->capture_default_str();
  common(kkt);

  auto* socn = app.add_subcommand("check-socn", "Second-order necessary condition on critical directions");
  socn->add_option("problem", problem_arg, "Problem file or builtin:NAME")->required();
  socn->add_option("trajectory", traj_arg, "Trajectory file or `zero`")->required();
  auto* dir_opt = socn->add_option("--directions", directions_path, "Direction file");
  socn->add_option("--probe", probe_count, "Number of random critical directions")->excludes(dir_opt);
  socn->add_option("--lambda-divisions", opts.lambda_divisions, "Simplex grid divisions")->capture_default_str();
  common(socn);

  auto* socs = app.add_subcommand("check-socs", "Strict second-order sufficient condition");
  socs->add_option("problem", problem_arg, "Problem file or builtin:NAME")->required();
  socs->add_option("trajectory", traj_arg, "Trajectory file or `zero`")->required();
  socs->add_option("--lambda", lambda_text, "Objective weights v1,v2,...");
  auto* gamma_opt = socs->add_option("--gamma0", gamma0, "Coercivity constant");
  socs->add_option("--probes", opts.probes, "Search restarts")->capture_default_str();
  socs->add_option("--search-grid", opts.search_grid, "Intervals of the direction search grid")->capture_default_str();
  common(socs);

  auto* fin = app.add_subcommand("findim", "Finite-dimensional vector program pipeline");
  fin->add_option("problem", findim_path, "Finite-dimensional problem file")->required();
  fin->add_option("--zbar", zbar_text, "Reference point z1,z2,... (default: origin)");
  fin->add_option("--direction", findim_dirs, "Direction d1,d2,... (repeatable)");
  fin->add_option("--radius", findim_run.radius, "Oracle radius")->capture_default_str();
  fin->add_option("--steps", findim_run.steps, "Oracle grid steps per side")->capture_default_str();
  fin->add_option("--lambda-divisions", opts.lambda_divisions, "Simplex grid divisions")->capture_default_str();
  common(fin);

  auto* integ = app.add_subcommand("integrate", "Integrate the state for given controls");
  integ->add_option("problem", problem_arg, "Problem file or builtin:NAME")->required();
  integ->add_option("controls", controls_arg, "Controls file {grid_n, u} or `zero`")->required();
  integ->add_option("--grid", opts.grid_n, "Grid intervals N for `zero`")->capture_default_str();
  integ->add_option("--out", out_path, "Output path (default: standard output)");

  auto* show = app.add_subcommand("show-builtin", "Print a builtin problem, or list them");
  show->add_option("name", builtin_name, "Builtin name");
  show->add_option("--out", out_path, "Output path (default: standard output)");

  auto* audit = app.add_subcommand("audit", "Recompute the verdict of a stored certificate");
  audit->add_option("certificate", audit_path, "Certificate file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (!lambda_text.empty()) opts.lambda = parse_list(lambda_text, "--lambda");
    if (gamma_opt->count() > 0) opts.gamma0 = gamma0;

    mocp::CommandResult result;
    if (*kkt) {
      const auto problem = mocp::load_problem_arg(problem_arg);
      result = mocp::cmd_check_kkt(problem, mocp::load_trajectory_arg(traj_arg, problem, opts.grid_n), opts);
    } else if (*socn) {
      const auto problem = mocp::load_problem_arg(problem_arg);
      std::vector<mocp::Direction> directions;
      if (!directions_path.empty()) directions = mocp::load_directions(mocp::read_json_file(directions_path));
      if (directions_path.empty() && probe_count <= 0) throw mocp::UsageError("check-socn needs --directions or --probe");
      result = mocp::cmd_check_socn(problem, mocp::load_trajectory_arg(traj_arg, problem, opts.grid_n),
                                    std::move(directions), probe_count, opts);
    } else if (*socs) {
      const auto problem = mocp::load_problem_arg(problem_arg);
      result = mocp::cmd_check_socs(problem, mocp::load_trajectory_arg(traj_arg, problem, opts.grid_n), opts);
    } else if (*fin) {
      const auto problem = mocp::load_findim_problem(mocp::read_json_file(findim_path));
      if (!zbar_text.empty()) findim_run.zbar = parse_list(zbar_text, "--zbar");
      for (const auto& d : findim_dirs) findim_run.directions.push_back(parse_list(d, "--direction"));
      result = mocp::cmd_findim(problem, findim_run, opts);
    } else if (*integ) {
      const auto problem = mocp::load_problem_arg(problem_arg);
      mocp::Grid grid(std::max(opts.grid_n, 2));
      Eigen::MatrixXd u;
      if (controls_arg == "zero") {
        u = Eigen::MatrixXd::Zero(grid.nodes(), problem.l());
      } else {
        u = mocp::load_controls(mocp::read_json_file(controls_arg), problem.l(), grid);
      }
      emit(mocp::to_json(static_cast<const mocp::Samples&>(mocp::integrate_state(problem, u, grid))), out_path);
      return 0;
    } else if (*show) {
      if (builtin_name.empty()) {
        emit(mocp::builtin_names(), out_path);
      } else {
        emit(mocp::to_json(mocp::builtin(builtin_name)), out_path);
      }
      return 0;
    } else if (*audit) {
      result = mocp::cmd_audit(mocp::read_json_file(audit_path));
    }

    if (timing)
      result.certificate["wall_time"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    emit(result.certificate, out_path);
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "mocp: " << e.what() << "\n";
    return 1;
  }
}
