#pragma once

// Certificate pipelines behind the `mocp` command-line tool. Every command
// returns a JSON certificate plus an exit code (0 pass, 2 certified failure);
// usage and input problems are reported as exceptions and mapped to exit 1
// by the caller.
//
// The overall verdict is always derived by recompute_verdict() from the
// numbers stored in the certificate, so an emitted certificate can be audited
// offline with the same function.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "mocp/findim.hpp"
#include "mocp/grid.hpp"
#include "mocp/kkt.hpp"
#include "mocp/problem.hpp"
#include "mocp/second_order.hpp"
#include "mocp/trajectory.hpp"
#include "mocp/weights.hpp"

namespace mocp {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSchema = "cert/1";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  int grid_n = 1000;
  double tol = 1e-8;
  std::optional<std::vector<double>> lambda;
  std::optional<double> gamma0;
  int probes = 50;
  std::uint64_t seed = 42;
  double eps_act = 1e-8;
  int lambda_divisions = 20;
  double h2_alpha = 1e-6;
  int search_grid = 32;
};

struct CommandResult {
  nlohmann::json certificate;
  int exit_code = 0;
};

// ---------------------------------------------------------------------------
// Input loading

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return nlohmann::json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// `builtin:NAME` or a path to a problem document.
inline Problem load_problem_arg(const std::string& arg) {
  constexpr std::string_view prefix = "builtin:";
  if (arg.starts_with(prefix)) return builtin(arg.substr(prefix.size()));
  return load_problem(read_json_file(arg));
}

/// State response to nodal controls read from {"grid_n", "u"} (an "x" field
/// is accepted and ignored).
inline Eigen::MatrixXd load_controls(const nlohmann::json& j, int l, Grid& grid) {
  if (!j.is_object() || !j.contains("grid_n") || !j.at("grid_n").is_number_integer() || !j.contains("u"))
    throw UsageError("control document needs integer 'grid_n' and 'u'");
  grid = Grid(j.at("grid_n").get<int>());
  Eigen::MatrixXd u = detail::matrix_from_json(j.at("u"), "u", grid.nodes());
  if (u.cols() != l) throw UsageError("controls have " + std::to_string(u.cols()) + " columns, expected " + std::to_string(l));
  return u;
}

/// `zero` integrates the state from zero controls on the requested grid;
/// anything else is a trajectory document whose own grid is used.
inline Trajectory load_trajectory_arg(const std::string& arg, const Problem& problem, int grid_n) {
  if (arg == "zero") return integrate_state(problem, Eigen::MatrixXd::Zero(grid_n + 1, problem.l()), Grid(grid_n));
  Trajectory traj = trajectory_from_json(read_json_file(arg));
  require_shape(traj, problem.n(), problem.l());
  return traj;
}

/// A single direction document, an array of them, or {"directions": [...]}.
inline std::vector<Direction> load_directions(const nlohmann::json& j) {
  std::vector<Direction> out;
  const nlohmann::json* list = &j;
  if (j.is_object() && j.contains("directions")) list = &j.at("directions");
  if (list->is_array()) {
    for (const auto& item : *list) out.push_back(direction_from_json(item));
  } else {
    out.push_back(direction_from_json(*list));
  }
  return out;
}

inline Eigen::VectorXd weights_arg(const RunOptions& opts, int m) {
  if (!opts.lambda) return uniform_weights(m);
  if (static_cast<int>(opts.lambda->size()) != m)
    throw UsageError("--lambda needs " + std::to_string(m) + " values");
  Eigen::VectorXd lambda = Eigen::Map<const Eigen::VectorXd>(opts.lambda->data(), m);
  if ((lambda.array() < 0.0).any() || lambda.norm() == 0.0) throw UsageError("--lambda must be nonnegative and nonzero");
  return lambda;
}

inline void check_common(const RunOptions& opts) {
  if (opts.grid_n < 2) throw UsageError("--grid must be at least 2");
  if (!(opts.tol > 0.0)) throw UsageError("--tol must be positive");
  if (!(opts.eps_act >= 0.0)) throw UsageError("--eps-act must be nonnegative");
  if (opts.probes < 0) throw UsageError("--probes must be nonnegative");
  if (opts.lambda_divisions < 1) throw UsageError("--lambda-divisions must be positive");
}

// ---------------------------------------------------------------------------
// Certificate assembly

namespace detail {

inline nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

/// JSON has no infinities; unbounded values are written as null.
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json header(const std::string& command, const nlohmann::json& problem_info,
                             const nlohmann::json& grid_n, const RunOptions& opts) {
  return {{"schema", kSchema},
          {"tool_version", kToolVersion},
          {"command", command},
          {"problem", problem_info},
          {"grid_n", grid_n},
          {"seed", opts.seed},
          {"tolerances", {{"tol", opts.tol}, {"eps_act", opts.eps_act}}}};
}

inline nlohmann::json problem_info(const Problem& p) { return {{"name", p.name()}, {"hash", problem_hash(p)}}; }

inline nlohmann::json kkt_fragment(const KktReport& r) { return to_json(r); }

inline bool kkt_fragment_pass(const nlohmann::json& k) {
  const auto& t = k.at("tolerances");
  return k.at("stationarity_residual").get<double>() <= t.at("stationarity").get<double>() &&
         k.at("adjoint_residual").get<double>() <= t.at("adjoint").get<double>() &&
         k.at("terminal_residual").get<double>() <= t.at("terminal").get<double>() &&
         k.at("theta_sign_violation").get<double>() <= t.at("sign").get<double>() &&
         k.at("complementarity_residual").get<double>() <= t.at("complementarity").get<double>() &&
         k.at("feasibility_residual").get<double>() <= t.at("feasibility").get<double>() &&
         k.at("state_residual").get<double>() <= t.at("feasibility").get<double>();
}

inline std::string kkt_failure_reason(const nlohmann::json& k) {
  const auto& t = k.at("tolerances");
  const std::pair<const char*, const char*> checks[] = {
      {"feasibility_residual", "feasibility"}, {"state_residual", "feasibility"},
      {"stationarity_residual", "stationarity"}, {"adjoint_residual", "adjoint"},
      {"terminal_residual", "terminal"}, {"theta_sign_violation", "sign"},
      {"complementarity_residual", "complementarity"}};
  for (const auto& [field, tol] : checks)
    if (k.at(field).get<double>() > t.at(tol).get<double>()) return std::string("kkt: ") + field + " exceeds tolerance";
  return "kkt";
}

inline bool cone_fragment_pass(const nlohmann::json& c) {
  const double tol = c.at("tol").get<double>();
  return c.at("c1_residual").get<double>() <= tol && c.at("c2_residual").get<double>() <= tol &&
         c.at("c3_residual").get<double>() <= tol;
}

inline nlohmann::json fail(const std::string& reason) { return {{"status", "fail"}, {"reason", reason}}; }

}  // namespace detail

/// Derives the overall verdict from the fragments and recorded tolerances.
inline nlohmann::json recompute_verdict(const nlohmann::json& cert) {
  using detail::fail;
  const std::string command = cert.at("command").get<std::string>();
  const auto& fr = cert.at("fragments");

  if (command == "check-kkt") {
    const auto& h2 = fr.at("h2");
    if (h2.at("alpha_hat").get<double>() < h2.at("alpha").get<double>())
      return fail("h2: mixed constraint not uniformly regular in the selected control");
    if (!detail::kkt_fragment_pass(fr.at("kkt"))) return fail(detail::kkt_failure_reason(fr.at("kkt")));
    return {{"status", "kkt-pass"}};
  }

  if (command == "check-socn") {
    const double tol = cert.at("tolerances").at("tol").get<double>();
    std::vector<bool> valid;
    for (const auto& k : fr.at("kkt_sweep")) valid.push_back(detail::kkt_fragment_pass(k));
    if (std::none_of(valid.begin(), valid.end(), [](bool b) { return b; }))
      return fail("kkt: no weight on the grid admits multipliers");
    int tested = 0;
    for (const auto& d : fr.at("directions")) {
      if (!detail::cone_fragment_pass(d.at("cone"))) continue;
      ++tested;
      bool satisfied = false;
      const auto& q = d.at("q_values");
      for (std::size_t k = 0; k < valid.size(); ++k)
        if (valid[k] && q.at(k).get<double>() >= -tol) satisfied = true;
      if (!satisfied) return {{"status", "socn-violated"}, {"direction", d.at("index")}};
    }
    nlohmann::json v{{"status", "socn-pass"}};
    if (tested == 0) v["note"] = "no directions tested";
    return v;
  }

  if (command == "check-socs") {
    if (!detail::kkt_fragment_pass(fr.at("kkt"))) return fail(detail::kkt_failure_reason(fr.at("kkt")));
    const auto& co = fr.at("coercivity");
    if (co.at("min_eigenvalue").get<double>() < co.at("gamma0").get<double>())
      return fail("coercivity: smallest eigenvalue of the weighted control Hessian is below gamma0");
    const double tol = cert.at("tolerances").at("tol").get<double>();
    const auto& probes = fr.at("probes");
    int counted = 0;
    for (const auto& p : probes) {
      if (p.at("cone_trivial").get<bool>()) continue;
      ++counted;
      const double q = p.at("q_value").get<double>();
      const double norm = p.at("direction_l2_norm").get<double>();
      if (!(q > tol * norm * norm)) return fail("curvature: a probe direction has non-positive curvature");
    }
    nlohmann::json v{{"status", "socs-pass"},
                     {"caveat", "positivity on the critical cone verified on " + std::to_string(counted) +
                                    " search probes only, not on the whole cone"}};
    return v;
  }

  if (command == "findim") {
    const auto& rob = fr.at("robinson");
    if (!rob.at("active").empty() && !(rob.at("witness_s").get<double>() > 1e-10))
      return fail("cq: Robinson constraint qualification fails");
    const double tol = cert.at("tolerances").at("tol").get<double>();
    bool necessary_ok = true;
    for (const auto& d : fr.at("directions")) {
      if (!d.at("critical").get<bool>()) continue;
      const auto& mc = d.at("max_curvature");
      if (mc.is_null() || mc.get<double>() < -tol) necessary_ok = false;
    }
    const bool oracle = fr.at("oracle").at("weak_pareto").get<bool>();
    if (!necessary_ok && !oracle) return fail("second-order necessary condition fails; oracle confirms the point is not weak Pareto");
    if (!necessary_ok) return fail("second-order necessary condition fails but the oracle found no dominating point");
    if (!oracle) return fail("oracle found a dominating point");
    return {{"status", "findim-pass"}};
  }

  throw UsageError("unknown certificate command '" + command + "'");
}

inline int exit_code_for(const nlohmann::json& verdict) {
  const std::string s = verdict.at("status").get<std::string>();
  return (s == "fail" || s == "socn-violated") ? 2 : 0;
}

inline CommandResult finish(nlohmann::json cert) {
  cert["overall_verdict"] = recompute_verdict(cert);
  const int code = exit_code_for(cert["overall_verdict"]);
  return {std::move(cert), code};
}

// ---------------------------------------------------------------------------
// Commands

inline CommandResult cmd_check_kkt(const Problem& problem, const Trajectory& traj, const RunOptions& opts) {
  check_common(opts);
  const Eigen::VectorXd lambda = weights_arg(opts, problem.m());
  nlohmann::json cert = detail::header("check-kkt", detail::problem_info(problem), traj.grid.intervals(), opts);
  cert["tolerances"]["h2_alpha"] = opts.h2_alpha;

  const H2Report h2 = validate_h2(problem, traj, opts.h2_alpha);
  nlohmann::json fragments;
  fragments["h2"] = {{"i0", h2.i0 + 1}, {"alpha_hat", h2.alpha_hat}, {"alpha", h2.alpha}};
  if (h2.alpha_hat >= 1e-12) {
    const KktSolution sol = solve_kkt_system(problem, traj, lambda, KktTolerances::uniform(opts.tol));
    fragments["kkt"] = detail::kkt_fragment(sol.report);
  } else {
    KktReport r = kkt_residuals(problem, traj,
                                {lambda, Eigen::MatrixXd::Zero(traj.grid.nodes(), problem.n()),
                                 Eigen::VectorXd::Zero(traj.grid.nodes())},
                                KktTolerances::uniform(opts.tol));
    fragments["kkt"] = detail::kkt_fragment(r);
  }
  cert["fragments"] = std::move(fragments);
  return finish(std::move(cert));
}

/// Directions from a file, or `probe_count` seeded random critical
/// directions when `directions` is empty.
inline CommandResult cmd_check_socn(const Problem& problem, const Trajectory& traj, std::vector<Direction> directions,
                                    int probe_count, const RunOptions& opts) {
  check_common(opts);
  nlohmann::json cert = detail::header("check-socn", detail::problem_info(problem), traj.grid.intervals(), opts);
  cert["tolerances"]["lambda_divisions"] = opts.lambda_divisions;
  const ConeOptions cone{opts.eps_act, opts.tol};
  const ReferenceData ref = linearize(problem, traj);

  std::string source = "file";
  if (directions.empty() && probe_count > 0) {
    source = "random-probes";
    std::mt19937_64 rng(opts.seed);
    for (int k = 0; k < probe_count; ++k) directions.push_back(random_critical_direction(ref, rng, cone));
  }
  for (const auto& d : directions)
    if (!(d.grid == traj.grid)) throw UsageError("direction grid does not match the trajectory grid");

  const auto lambdas = simplex_grid(problem.m(), opts.lambda_divisions, opts.seed);
  const SocnVerdict verdict =
      socn_verdict(problem, traj, directions, lambdas, KktTolerances::uniform(opts.tol), cone);

  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& report : verdict.kkt_reports) sweep.push_back(detail::kkt_fragment(report));
  nlohmann::json dirs = nlohmann::json::array();
  for (const auto& outcome : verdict.directions) {
    nlohmann::json d{{"index", outcome.index}, {"cone", to_json(outcome.cone)}, {"tested", outcome.tested}};
    nlohmann::json qs = nlohmann::json::array();
    for (const auto& p : outcome.probes) qs.push_back(p.q_value);
    d["q_values"] = qs;
    d["best_q"] = detail::finite_or_null(outcome.best_q);
    if (!outcome.tested) d["note"] = "skipped: not a critical direction";
    dirs.push_back(std::move(d));
  }
  nlohmann::json fragments{{"direction_source", source},
                           {"kkt_sweep", std::move(sweep)},
                           {"directions", std::move(dirs)},
                           {"tested", verdict.tested},
                           {"skipped", verdict.skipped}};
  if (verdict.violating) {
    const Direction& worst = directions[static_cast<std::size_t>(*verdict.violating)];
    fragments["violating_direction"] = to_json(static_cast<const Samples&>(worst));
  }
  cert["fragments"] = std::move(fragments);
  return finish(std::move(cert));
}

inline CommandResult cmd_check_socs(const Problem& problem, const Trajectory& traj, const RunOptions& opts) {
  check_common(opts);
  if (!opts.gamma0) throw UsageError("check-socs needs --gamma0");
  if (!(*opts.gamma0 > 0.0)) throw UsageError("--gamma0 must be positive");
  const Eigen::VectorXd lambda = weights_arg(opts, problem.m());
  nlohmann::json cert = detail::header("check-socs", detail::problem_info(problem), traj.grid.intervals(), opts);
  cert["tolerances"]["gamma0"] = *opts.gamma0;
  cert["tolerances"]["probes"] = opts.probes;

  const KktTolerances tol = KktTolerances::uniform(opts.tol);
  const KktSolution sol = solve_kkt_system(problem, traj, lambda, tol);
  SearchOptions search;
  search.grid_n = opts.search_grid;
  search.cone = {opts.eps_act, opts.tol};
  const SocsVerdict verdict = socs_verdict(problem, traj, sol.triple, *opts.gamma0, opts.probes, opts.seed, tol, search);

  nlohmann::json probes = nlohmann::json::array();
  for (const auto& p : verdict.probes)
    probes.push_back({{"q_value", p.q_value},
                      {"direction_l2_norm", p.direction_norm},
                      {"converged", p.converged},
                      {"cone_trivial", p.cone_trivial}});
  nlohmann::json fragments{{"kkt", detail::kkt_fragment(verdict.kkt)},
                           {"coercivity", to_json(verdict.coercivity)},
                           {"probes", std::move(probes)},
                           {"search_grid_n", verdict.search_grid_n},
                           {"min_probe_q", detail::finite_or_null(verdict.min_probe_q)},
                           {"cone_variant", to_string(ConeVariant::Sufficient)},
                           {"discrete_surrogate", true}};
  if (verdict.worst_direction) fragments["worst_direction"] = to_json(static_cast<const Samples&>(*verdict.worst_direction));
  cert["fragments"] = std::move(fragments);
  return finish(std::move(cert));
}

struct FinDimRunOptions {
  std::vector<double> zbar;  // empty means the origin
  std::vector<std::vector<double>> directions;
  double radius = 0.5;
  int steps = 20;
};

inline CommandResult cmd_findim(const FinDimProblem& problem, const FinDimRunOptions& run, const RunOptions& opts) {
  check_common(opts);
  Eigen::VectorXd zbar = Eigen::VectorXd::Zero(problem.nz());
  if (!run.zbar.empty()) {
    if (static_cast<int>(run.zbar.size()) != problem.nz()) throw UsageError("--zbar has the wrong dimension");
    zbar = Eigen::Map<const Eigen::VectorXd>(run.zbar.data(), problem.nz());
  }
  if (!(run.radius > 0.0)) throw UsageError("--radius must be positive");
  if (run.steps < 3) throw UsageError("--steps must be at least 3");
  if (problem.nz() > 4) throw UsageError("the oracle stage supports nz <= 4");

  FinDimOptions fopts;
  fopts.curvature_tol = opts.tol;
  nlohmann::json cert = detail::header("findim", {{"name", problem.name()}, {"hash", findim_hash(problem)}}, nullptr, opts);
  cert["tolerances"]["lambda_divisions"] = opts.lambda_divisions;
  cert["tolerances"]["oracle_radius"] = run.radius;
  cert["tolerances"]["oracle_steps"] = run.steps;

  nlohmann::json fragments;
  fragments["zbar"] = detail::vec_json(zbar);
  RobinsonReport robinson;
  try {
    robinson = robinson_check(problem, zbar, fopts);
  } catch (const FinDimError& e) {
    throw UsageError(e.what());
  }
  fragments["robinson"] = to_json(robinson);
  if (!robinson.pass) {
    fragments["skipped_stages"] = {"multipliers", "second_order", "oracle"};
    cert["fragments"] = std::move(fragments);
    return finish(std::move(cert));
  }

  const auto pairs = multiplier_set_sample(problem, zbar, opts.lambda_divisions, fopts);
  nlohmann::json pj = nlohmann::json::array();
  for (const auto& p : pairs) pj.push_back(to_json(p));
  fragments["multipliers"] = std::move(pj);

  bool necessary_failed = false;
  nlohmann::json dirs = nlohmann::json::array();
  for (std::size_t k = 0; k < run.directions.size(); ++k) {
    if (static_cast<int>(run.directions[k].size()) != problem.nz())
      throw UsageError("direction " + std::to_string(k) + " has the wrong dimension");
    const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(run.directions[k].data(), problem.nz());
    nlohmann::json entry{{"index", k}, {"d", detail::vec_json(d)}};
    try {
      const NecessaryCheck check = second_order_necessary_check(problem, zbar, d, pairs, fopts);
      entry["critical"] = true;
      entry["curvatures"] = check.curvatures;
      entry["max_curvature"] = detail::finite_or_null(check.max_curvature);
      entry["verdict"] = check.verdict;
      necessary_failed = necessary_failed || !check.verdict;
    } catch (const DirectionNotCriticalError&) {
      entry["critical"] = false;
      entry["note"] = "skipped: not a critical direction";
    }
    dirs.push_back(std::move(entry));
  }
  fragments["directions"] = std::move(dirs);

  const bool oracle = weak_pareto_oracle(problem, zbar, run.radius, run.steps, fopts);
  fragments["oracle"] = {{"weak_pareto", oracle}};
  fragments["consistent"] = !(necessary_failed && oracle);
  cert["fragments"] = std::move(fragments);
  return finish(std::move(cert));
}

/// Re-derives the verdict of a stored certificate. Exit 0 when it matches the
/// recorded one, 2 otherwise.
inline CommandResult cmd_audit(const nlohmann::json& cert) {
  if (!cert.is_object() || cert.value("schema", "") != kSchema) throw UsageError("not a cert/1 certificate");
  const nlohmann::json recomputed = recompute_verdict(cert);
  const bool match = cert.contains("overall_verdict") && cert.at("overall_verdict") == recomputed;
  nlohmann::json out{{"schema", kSchema},
                     {"tool_version", kToolVersion},
                     {"command", "audit"},
                     {"audited_command", cert.at("command")},
                     {"recorded_verdict", cert.value("overall_verdict", nlohmann::json())},
                     {"recomputed_verdict", recomputed},
                     {"match", match}};
  return {std::move(out), match ? 0 : 2};
}

}  // namespace mocp
