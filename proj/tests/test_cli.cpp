#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace {

const std::string kCli = MOCP_CLI_PATH;
const std::string kData = MOCP_DATA_DIR;
const std::string kTmp = MOCP_TEST_TMP;

struct CliRun {
  int code = -1;
  std::string out;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliRun run(const std::string& args, const std::string& tag) {
  const std::string out = kTmp + "/cli_" + tag + ".out";
  const std::string cmd = kCli + " " + args + " > " + out + " 2> " + out + ".err";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  return r;
}

nlohmann::json parse(const CliRun& r) { return nlohmann::json::parse(r.out); }

}  // namespace

TEST(Cli, CheckKktExitCodes) {
  const CliRun pass = run("check-kkt builtin:example_6_1 zero --lambda 0.7071,0.7071", "kkt_pass");
  EXPECT_EQ(pass.code, 0);
  EXPECT_EQ(parse(pass)["overall_verdict"]["status"], "kkt-pass");
  EXPECT_FALSE(parse(pass).contains("wall_time"));

  const CliRun infeasible = run("check-kkt builtin:example_6_1 " + kData + "/example_6_1_infeasible.json", "kkt_infeasible");
  EXPECT_EQ(infeasible.code, 2);
  EXPECT_NEAR(parse(infeasible)["fragments"]["kkt"]["feasibility_residual"].get<double>(), 0.1, 1e-12);

  EXPECT_EQ(run("check-kkt builtin:example_6_1 /nonexistent.json", "kkt_missing").code, 1);
  EXPECT_EQ(run("check-kkt builtin:no_such_problem zero", "kkt_unknown").code, 1);
  EXPECT_EQ(run("check-kkt builtin:example_6_1 zero --lambda -1,2", "kkt_badlambda").code, 1);
  EXPECT_EQ(run("check-kkt", "kkt_noargs").code, 1);
}

TEST(Cli, CheckSocnNamesViolatingDirection) {
  const CliRun r = run("check-socn builtin:example_6_2 zero --directions " + kData + "/example_6_2_direction.json",
                    "socn_violated");
  EXPECT_EQ(r.code, 2);
  const auto cert = parse(r);
  EXPECT_EQ(cert["overall_verdict"]["status"], "socn-violated");
  EXPECT_TRUE(cert["fragments"].contains("violating_direction"));

  const CliRun probes = run("check-socn builtin:example_6_1 zero --probe 20", "socn_probes");
  EXPECT_EQ(probes.code, 0);
  EXPECT_EQ(parse(probes)["overall_verdict"]["status"], "socn-pass");
}

TEST(Cli, CheckSocsOutcomes) {
  EXPECT_EQ(run("check-socs builtin:example_6_1 zero --lambda 0.5,0.5 --gamma0 1 --probes 5", "socs_pass").code, 0);
  EXPECT_EQ(run("check-socs builtin:example_6_2 zero --lambda 0.5,0.5 --gamma0 0.1 --probes 5", "socs_fail").code, 2);
  EXPECT_EQ(run("check-socs builtin:example_6_1 zero --lambda 0.5,0.5 --gamma0 0", "socs_gamma0").code, 1);
  EXPECT_EQ(run("check-socs builtin:example_6_1 zero --lambda 0.5,0.5", "socs_nogamma").code, 1);
}

TEST(Cli, FindimFixtures) {
  EXPECT_EQ(run("findim " + kData + "/findim_convex.json --direction 1,0", "fin_convex").code, 0);
  EXPECT_EQ(run("findim " + kData + "/findim_saddle.json --direction 0,1", "fin_saddle").code, 2);
  const CliRun cq = run("findim " + kData + "/findim_robinson_fail.json --direction 0,1", "fin_cq");
  EXPECT_EQ(cq.code, 2);
  EXPECT_EQ(parse(cq)["overall_verdict"]["status"], "fail");
}

TEST(Cli, OutputIsDeterministic) {
  const std::string args = "check-socs builtin:example_6_1 zero --lambda 0.5,0.5 --gamma0 1 --probes 3 --seed 7";
  const CliRun a = run(args, "det_a");
  const CliRun b = run(args, "det_b");
  EXPECT_EQ(a.out, b.out);
  EXPECT_FALSE(a.out.empty());
}

TEST(Cli, AuditRoundTripAndTamperDetection) {
  const std::string cert_path = kTmp + "/cli_audit_cert.json";
  ASSERT_EQ(run("check-kkt builtin:example_6_1 zero --lambda 0.5,0.5 --grid 50 --out " + cert_path, "audit_src").code, 0);
  const CliRun ok = run("audit " + cert_path, "audit_ok");
  EXPECT_EQ(ok.code, 0);
  EXPECT_TRUE(parse(ok)["match"].get<bool>());

  auto cert = nlohmann::json::parse(slurp(cert_path));
  cert["fragments"]["kkt"]["stationarity_residual"] = 0.5;
  const std::string tampered = kTmp + "/cli_audit_tampered.json";
  std::ofstream(tampered) << cert.dump(2);
  const CliRun bad = run("audit " + tampered, "audit_bad");
  EXPECT_EQ(bad.code, 2);
  EXPECT_FALSE(parse(bad)["match"].get<bool>());
}

TEST(Cli, IntegrateAndShowBuiltin) {
  const CliRun list = run("show-builtin", "show_list");
  EXPECT_EQ(list.code, 0);
  EXPECT_EQ(parse(list), nlohmann::json({"example_6_1", "example_6_2"}));
  const CliRun integ = run("integrate builtin:example_6_1 zero --grid 10", "integ");
  EXPECT_EQ(integ.code, 0);
  EXPECT_EQ(parse(integ)["grid_n"], 10);
}
