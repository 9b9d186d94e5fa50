#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "sqcool/commands.hpp"
#include "sqcool/config.hpp"
#include "sqcool/response.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(SQCOOL_EXE) + " " + args + " 2>/dev/null";
  Outcome r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sqcool_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string config(const std::string& name) { return std::string(SQCOOL_CONFIG_DIR) + "/" + name; }

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text, std::string* preamble, std::string* header) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, *preamble);
  std::getline(in, *header);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

const char* reduced_k100 = "[reduced]\nkappa_over_4wm = 100\nq_m = 1e5\nn_th = 1000\n";

}  // namespace

TEST_F(Cli, VersionAndUsage) {
  const Outcome v = run("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("1.0.0"), std::string::npos);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("bogus --config x").code, 2);
  EXPECT_EQ(run("rates").code, 2);
  EXPECT_EQ(run("rates --config " + config("optimize_k100.ini") + " --format xml").code, 2);
}

TEST_F(Cli, SpectrumGoldenHeaderAndOrdering) {
  const Outcome r = run("spectrum --config " + config("spectrum_k100.ini"));
  ASSERT_EQ(r.code, 0);
  std::string pre, header;
  const auto rows = csv_rows(r.out, &pre, &header);
  EXPECT_EQ(pre.rfind("# units=omega_m version=1.0.0", 0), 0u);
  EXPECT_EQ(header, "omega_over_omega_m,scheme,s_ff_normalized,error");
  ASSERT_EQ(rows.size(), 4u * 601u);
  const char* order[] = {"SB", "ES", "IS", "ESIS"};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 4u);
    EXPECT_EQ(rows[i][1], order[i % 4]);
    EXPECT_EQ(rows[i][0], rows[i - i % 4][0]);
  }
  EXPECT_EQ(rows.front()[0], "-3");
  EXPECT_EQ(rows.back()[0], "3");
}

TEST_F(Cli, SpectrumDipsAtStokesFrequency) {
  const Outcome r = run("spectrum --config " + config("spectrum_k100.ini"));
  ASSERT_EQ(r.code, 0);
  std::string pre, header;
  int seen = 0;
  for (const auto& row : csv_rows(r.out, &pre, &header)) {
    if (row[0] != "-1" || (row[1] != "ES" && row[1] != "ESIS")) continue;
    ++seen;
    EXPECT_LE(std::stod(row[2]), 1e-10) << row[1];
    EXPECT_TRUE(row[3].empty());
  }
  EXPECT_EQ(seen, 2);
}

TEST_F(Cli, SinglePointSpectrumEqualsLibraryRate) {
  const std::string cfg = write("one.ini",
                                "[run]\nscheme = SB\nnormalized = false\n[reduced]\nkappa_over_4wm = 100\ng = 0.3\n"
                                "[grid]\nomegas = 1\n");
  const Outcome r = run("spectrum --config " + cfg);
  ASSERT_EQ(r.code, 0);
  std::string pre, header;
  const auto rows = csv_rows(r.out, &pre, &header);
  ASSERT_EQ(rows.size(), 1u);
  sqcool::ReducedParams p = sqcool::comparison_point(100.0);
  p.g_coupling = 0.3;
  EXPECT_EQ(std::stod(rows[0][2]), sqcool::rates(p, sqcool::Scheme::SB, false).gamma_minus);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("spectrum --config " + write("empty.ini", std::string(reduced_k100) + "[grid]\npoints = 0\n")).code, 2);
  EXPECT_EQ(run("rates --config " + write("unknown.ini", std::string(reduced_k100) + "kapa = 3\n")).code, 2);
  EXPECT_EQ(run("rates --config " + write("both.ini", std::string(reduced_k100) +
                                                          "[full]\ndelta_s = 1\ndelta_p = 1\nkappa_s = 1\n"
                                                          "kappa_p = 1\ng_s = 0\n"))
                .code,
            2);
  EXPECT_EQ(run("rates --config " + write("none.ini", "[run]\nscheme = SB\n")).code, 2);
  EXPECT_EQ(run("rates --config " + path("missing.ini")).code, 2);
  EXPECT_EQ(run("rates --config " + write("neg.ini", "[reduced]\nkappa = 4\ngamma = -1\n")).code, 2);
  EXPECT_EQ(run("rates --config " + write("loss.ini", "[reduced]\nkappa = 4\nkappa0 = 0.1\n")).code, 2);
}

TEST_F(Cli, InfeasibleSuppressionExitsThree) {
  const std::string cfg =
      write("inf.ini", "[run]\nschemes = ES,ESIS\n" + std::string(reduced_k100) + "eps_mag = 120\neps_phase = 0\n");
  const Outcome r = run("suppress --config " + cfg);
  EXPECT_EQ(r.code, 3);
  const json doc = json::parse(r.out);
  // ES drops the amplifier, so only ESIS sees the pump
  EXPECT_TRUE(doc["result"]["schemes"][0]["feasible"].get<bool>());
  EXPECT_FALSE(doc["result"]["schemes"][1]["feasible"].get<bool>());
}

TEST_F(Cli, InstabilityExitsFour) {
  const std::string cfg = write("opo.ini", "[run]\nscheme = IS\nmanifold = as_given\n" + std::string(reduced_k100) +
                                               "eps_mag = 150\ng = 0.1\n");
  EXPECT_EQ(run("steady --config " + cfg).code, 4);
  const std::string pinned = write("pin.ini", "[run]\nscheme = ESIS\n" + std::string(reduced_k100) +
                                                  "[search]\neps_pinned = 120\nphi_eps_pinned = 0\n");
  EXPECT_EQ(run("optimize --config " + pinned).code, 4);
}

TEST_F(Cli, NumericalFailureExitsFive) {
  // a lossless cavity resonant with the mechanics has a singular susceptibility
  const std::string cfg =
      write("sing.ini", "[run]\nscheme = SB\nnormalized = false\n[reduced]\nkappa = 0\ndelta = 1\ng = 0.1\n");
  EXPECT_EQ(run("rates --config " + cfg).code, 5);
}

TEST_F(Cli, SuppressAtVacuumPump) {
  const Outcome r = run("suppress --config " + write("s.ini", "[run]\nscheme = ES\n" + std::string(reduced_k100)));
  ASSERT_EQ(r.code, 0);
  const json e = json::parse(r.out)["result"]["schemes"][0];
  EXPECT_TRUE(e["feasible"].get<bool>());
  EXPECT_NEAR(e["r_s"].get<double>(), 2.996, 5e-4);
}

TEST_F(Cli, SteadyWithoutCouplingIsThermal) {
  const Outcome r = run("steady --config " + write("g0.ini", "[run]\nscheme = SB\n" + std::string(reduced_k100) + "g = 0\n"));
  ASSERT_EQ(r.code, 0);
  const json e = json::parse(r.out)["result"]["schemes"][0];
  EXPECT_NEAR(e["n_b"].get<double>(), 1000.0, 1e-9 * 1000.0);
}

TEST_F(Cli, OptimizeComparisonPoint) {
  const Outcome r = run("optimize --config " + config("optimize_k100.ini") + " --quiet");
  ASSERT_EQ(r.code, 0);
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["provenance"]["version"], "1.0.0");
  EXPECT_EQ(doc["provenance"]["seed"], 1);
  EXPECT_EQ(doc["provenance"]["config_hash"].get<std::string>().size(), 16u);
  const json& esis = doc["result"]["schemes"][3];
  EXPECT_EQ(esis["scheme"], "ESIS");
  EXPECT_NEAR(esis["n_f_min"].get<double>(), 0.1211, 0.1 * 0.1211);
  EXPECT_NEAR(esis["g_opt"].get<double>(), 0.23, 0.2 * 0.23);
}

TEST_F(Cli, JsonResultsRoundTrip) {
  for (const char* cmd : {"rates", "suppress", "steady", "optimize"}) {
    const std::string first = path(std::string(cmd) + "1.json");
    const std::string second = path(std::string(cmd) + "2.json");
    ASSERT_EQ(run(std::string(cmd) + " --config " + config("optimize_k100.ini") + " --quiet --out " + first).code, 0);
    ASSERT_EQ(run(std::string(cmd) + " --config " + first + " --quiet --out " + second).code, 0);
    const std::string a = slurp(first);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(second)) << cmd;
  }
}

TEST_F(Cli, SeedOverrideEntersHash) {
  const Outcome a = run("rates --config " + config("optimize_k100.ini"));
  const Outcome b = run("rates --config " + config("optimize_k100.ini") + " --seed 9");
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  const json ja = json::parse(a.out), jb = json::parse(b.out);
  EXPECT_EQ(jb["provenance"]["seed"], 9);
  EXPECT_NE(ja["provenance"]["config_hash"], jb["provenance"]["config_hash"]);
}

TEST_F(Cli, OutputSectionPath) {
  const std::string target = path("spec.csv");
  const std::string cfg = write("o.ini", "[run]\nscheme = SB\n" + std::string(reduced_k100) +
                                             "[grid]\nomegas = -1, 1\n[output]\npath = " + target + "\n");
  const Outcome r = run("spectrum --config " + cfg);
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(slurp(target).find("omega_over_omega_m"), std::string::npos);
}

TEST_F(Cli, SweepGoldenHeaderOrderingAndDeterminism) {
  const std::string cfg = write("sw.ini", "[run]\nseed = 4\n" + std::string("[reduced]\nq_m = 1e5\nn_th = 1000\n") +
                                              "[sweep]\nkappa_over_4wm_min = 1\nkappa_over_4wm_max = 100\npoints = 3\n");
  const Outcome a = run("sweep --config " + cfg + " --workers 1");
  const Outcome b = run("sweep --config " + cfg + " --workers 3");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  std::string pre, header;
  const auto rows = csv_rows(a.out, &pre, &header);
  EXPECT_EQ(header,
            "kappa_over_4wm,scheme,gamma_minus,gamma_plus,gamma_opt_normalized,n_f_rate_equation,n_f_lyapunov,"
            "g_opt,eps_opt,phi_eps,r_s,phi_s,gamma_tot,stable,evaluations,error");
  ASSERT_EQ(rows.size(), 12u);
  const char* order[] = {"SB", "ES", "IS", "ESIS"};
  const char* k[] = {"1", "10", "100"};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 16u);
    EXPECT_EQ(rows[i][0], k[i / 4]);
    EXPECT_EQ(rows[i][1], order[i % 4]);
  }
  EXPECT_NEAR(std::stod(rows[11][4]), 481.0, 48.1);
}

TEST_F(Cli, FullModelReferencePoint) {
  const Outcome r = run("validate-adiabatic --config " + config("full_reference.ini"));
  ASSERT_EQ(r.code, 0);
  const json res = json::parse(r.out)["result"];
  EXPECT_LE(res["classical"]["residual"].get<double>(), 1e-9);
  EXPECT_TRUE(res["adiabatic"]["valid"].get<bool>());
  EXPECT_NEAR(res["reduced"]["g"].get<double>(), 0.24, 1e-12);
  EXPECT_NEAR(res["reduced"]["eps_mag"].get<double>(), 141.07, 1e-9);
}

TEST(Config, CanonicalFormIgnoresLayout) {
  namespace cli = sqcool::cli;
  const auto a = cli::parse_config_text("[reduced]\nkappa = 4\n g = 0.1 \n[run]\nscheme=SB\n");
  const auto b = cli::parse_config_text("[run]\nscheme = SB\n\n[reduced]\ng = 0.1\nkappa = 4\n");
  EXPECT_EQ(cli::config_hash(a), cli::config_hash(b));
  EXPECT_EQ(cli::canonical_text(a), cli::canonical_text(b));
}

TEST(Config, NumbersAcceptPiSuffix) {
  namespace cli = sqcool::cli;
  EXPECT_DOUBLE_EQ(cli::parse_number("pi", "x"), std::numbers::pi);
  EXPECT_DOUBLE_EQ(cli::parse_number("0.5pi", "x"), 0.5 * std::numbers::pi);
  EXPECT_THROW(cli::parse_number("1.0x", "x"), cli::ConfigError);
}
