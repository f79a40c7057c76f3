// End-to-end checks of the command-line tool: exit codes, output files,
// and run-to-run determinism.  The binary path comes in via ISOSPEC_CLI_PATH.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct CliDir {
  fs::path dir;

  explicit CliDir(const std::string& name) {
    dir = fs::temp_directory_path() /
          ("isospec_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~CliDir() { fs::remove_all(dir); }

  std::string path(const std::string& leaf) const { return (dir / leaf).string(); }

  void write(const std::string& leaf, const std::string& content) const {
    std::ofstream out(path(leaf));
    out << content;
  }

  std::string slurp(const std::string& leaf) const {
    std::ifstream in(path(leaf));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int run(const std::string& args, const std::string& env = "") const {
    std::string cmd = env + (env.empty() ? "" : " ") + std::string(ISOSPEC_CLI_PATH) + " " +
                      args + " > " + path("stdout.txt") + " 2> " + path("stderr.txt");
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
  }
};

}  // namespace

TEST_CASE("cli: validate exits 0 on admissible parameters and 2 otherwise") {
  CliDir t("validate");
  t.write("good.json", R"js({"a": [1, 0, 0], "cvec": [0, 0, 1]})js");
  CHECK(t.run("validate --config " + t.path("good.json") + " --prefix " + t.path("g")) == 0);
  CHECK(t.slurp("g_constraints.json").find("\"all_satisfied\": true") != std::string::npos);

  t.write("bad.json", R"js({"a": [1, 0, 0], "cvec": [1, 0, 0]})js");
  CHECK(t.run("validate --config " + t.path("bad.json") + " --prefix " + t.path("b")) == 2);
}

TEST_CASE("cli: construct writes the pair report and samples") {
  CliDir t("construct");
  t.write("line.json", R"js({"family": "line", "L0": "x", "b": 0.25})js");
  CHECK(t.run("construct --config " + t.path("line.json") + " --prefix " + t.path("line")) ==
        0);
  auto report = t.slurp("line_pair.json");
  CHECK(report.find("\"family\": \"line\"") != std::string::npos);
  CHECK(report.find("\"passed\": true") != std::string::npos);
  auto samples = t.slurp("line_samples.csv");
  CHECK(samples.rfind("x1,V0,V1,L0,P,status", 0) == 0);
}

TEST_CASE("cli: construct is deterministic run to run") {
  CliDir t("determinism");
  t.write("cfg.json",
          R"js({"family": "planar", "a1": 0.3, "a2": 1.1, "c": 0.7, "f": "tanh(eta)"})js");
  REQUIRE(t.run("construct --config " + t.path("cfg.json") + " --prefix " + t.path("r1")) ==
          0);
  REQUIRE(t.run("construct --config " + t.path("cfg.json") + " --prefix " + t.path("r2")) ==
          0);
  CHECK(t.slurp("r1_pair.json") == t.slurp("r2_pair.json"));
  CHECK(t.slurp("r1_samples.csv") == t.slurp("r2_samples.csv"));
  CHECK_FALSE(t.slurp("r1_pair.json").empty());
}

TEST_CASE("cli: constraint violations exit 2, config mistakes exit 1") {
  CliDir t("errors");
  // a parallel to the dual of c: integrability fails inside the builder.
  t.write("violate.json", R"js({"family": "ratio", "a": [1, 0, 0], "cvec": [1, 0, 0],
                              "f": "tanh(eta)"})js");
  CHECK(t.run("construct --config " + t.path("violate.json") + " --prefix " + t.path("v")) ==
        2);

  t.write("badexpr.json", R"js({"family": "line", "L0": "x+*2"})js");
  CHECK(t.run("construct --config " + t.path("badexpr.json") + " --prefix " + t.path("e")) ==
        1);

  t.write("missing.json", R"js({"family": "line"})js");
  CHECK(t.run("construct --config " + t.path("missing.json") + " --prefix " + t.path("m")) ==
        1);

  t.write("notjson.json", "this is { not json");
  CHECK(t.run("construct --config " + t.path("notjson.json") + " --prefix " + t.path("n")) ==
        1);

  CHECK(t.run("no-such-command") == 1);
}

TEST_CASE("cli: --set overrides config values") {
  CliDir t("setflag");
  t.write("line.json", R"js({"family": "line", "L0": "x+*2", "b": 0.25})js");
  // The broken expression is repaired from the command line.
  CHECK(t.run("construct --config " + t.path("line.json") + " --prefix " + t.path("ok") +
              " --set L0=x") == 0);
}

TEST_CASE("cli: verify runs a convergence sweep and accepts second order") {
  CliDir t("verify");
  t.write("line.json", R"js({"family": "line", "L0": "tanh(x)", "b": 0.0})js");
  CHECK(t.run("verify --config " + t.path("line.json") + " --prefix " + t.path("v")) == 0);
  auto sweep = t.slurp("v_sweep.csv");
  CHECK(sweep.rfind("h,residual,order", 0) == 0);
  CHECK(t.slurp("v_verify.json").find("\"passed\": true") != std::string::npos);
}

TEST_CASE("cli: spectrum plain mode writes eigenvalue rows") {
  CliDir t("spectrum");
  t.write("osc.json", R"js({"mode": "plain", "V": "x^2", "k": 3,
                          "lo": -8, "hi": 8, "nodes": 600})js");
  CHECK(t.run("spectrum --config " + t.path("osc.json") + " --prefix " + t.path("s")) == 0);
  std::istringstream csv(t.slurp("s_spectrum.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);  // header + k
  CHECK_FALSE(t.slurp("s_eigenfunctions.csv").empty());
  CHECK(t.slurp("stdout.txt").find("E0 = ") != std::string::npos);
}

TEST_CASE("cli: hierarchy emits one row per level") {
  CliDir t("hierarchy");
  t.write("chain.json", R"js({"V_xi": "xi^2", "seeds": [0, 0], "k": 3,
                            "lo": -7, "hi": 7, "nodes": 600})js");
  CHECK(t.run("hierarchy --config " + t.path("chain.json") + " --prefix " + t.path("h")) ==
        0);
  std::istringstream csv(t.slurp("h_hierarchy.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);  // header + 3 levels
}

TEST_CASE("cli: convert-coords maps points and marks singular rows") {
  CliDir t("convert");
  t.write("chart.json", R"js({"chart": "planar", "a1": 0.0, "a2": 1.0, "c": 1.0})js");
  t.write("pts.csv", "x,y\n0.5,1.0\n1.0,0.0\n-0.3,0.8\n");
  CHECK(t.run("convert-coords --config " + t.path("chart.json") + " --input " +
              t.path("pts.csv") + " --prefix " + t.path("c")) == 0);
  auto out = t.slurp("c_coords.csv");
  CHECK(out.rfind("x,y,kappa,eta,rho,xi,status", 0) == 0);
  CHECK(out.find("singular") != std::string::npos);  // (1,0) sits on L2 = 0
  CHECK(out.find("ok") != std::string::npos);
}

TEST_CASE("cli: presets prints the catalog and respects --row") {
  CliDir t("presets");
  CHECK(t.run("presets --prefix " + t.path("p") + " --row 4") == 0);
  CHECK_FALSE(t.slurp("p_presets.json").empty());
  CHECK(t.run("presets --prefix " + t.path("q") + " --row 99") == 1);  // out of range
}

TEST_CASE("cli: the logging variable changes stderr but not the exit code") {
  CliDir t("logging");
  t.write("line.json", R"js({"family": "line", "L0": "x", "b": 0.0})js");
  CHECK(t.run("construct --config " + t.path("line.json") + " --prefix " + t.path("l"),
              "ISOSPEC_LOG=debug") == 0);
  CHECK_FALSE(t.slurp("stderr.txt").empty());  // debug log goes to stderr
}
