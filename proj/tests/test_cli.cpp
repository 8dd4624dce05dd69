#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oddcert/cli/commands.hpp"

using namespace oddcert;
using namespace oddcert::cli;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("oddcert_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& text) {
    const auto path = dir_ / "config.json";
    std::ofstream(path) << text;
    return path.string();
  }

  int run(const std::string& command, const std::string& text) {
    Overrides ov;
    ov.out_dir = (dir_ / "out").string();
    return run_command(command, write(text), ov, 1, log_);
  }

  nlohmann::json read_json(const std::string& name) const {
    std::ifstream in(dir_ / "out" / name);
    return nlohmann::json::parse(in);
  }

  fs::path dir_;
  std::ostringstream log_;
};

const char* kDoubleIntegrator = R"({
  "plant": {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "D": [[0], [1]], "f_bar": 0.1},
  "gain": [-2, -3],
  "law": {"function": {"family": "identity"}},
  "tau": 0.1
})";

}  // namespace

TEST_F(CliTest, UnknownKeyReportsLine) {
  const std::string text = "{\n  \"plant\": {\"A\": [[0, 1], [0, 0]], \"B\": [[0], [1]], \"D\": [[0], [1]], \"f_bar\": 0.1},\n"
                           "  \"gain\": [-2, -3],\n  \"law\": {\"function\": {\"family\": \"identity\"}},\n"
                           "  \"tua\": 0.1\n}";
  try {
    parse_config(text, "cfg.json");
    FAIL() << "expected ConfigError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find("cfg.json:5: /tua"), std::string::npos) << e.what();
  }
  EXPECT_EQ(run("certify", text), kExitInputError);
}

TEST_F(CliTest, NestedErrorPointsAtValue) {
  const std::string text = "{\n  \"plant\": {\n    \"A\": [[0, 1], [0, 0]],\n    \"B\": [[0], [1]],\n"
                           "    \"D\": [[0], [1]],\n    \"f_bar\": -1\n  },\n  \"gain\": [-2, -3],\n"
                           "  \"law\": {\"function\": {\"family\": \"identity\"}}\n}";
  try {
    parse_config(text, "cfg.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("cfg.json:6: /plant/f_bar"), std::string::npos) << e.what();
  }
}

TEST_F(CliTest, NonSquareAIsInputError) {
  const int code = run("certify", R"({
    "plant": {"A": [[0, 1, 0], [0, 0, 1]], "B": [[0], [1]], "D": [[0], [1]], "f_bar": 0.1},
    "gain": [-2, -3], "law": {"function": {"family": "identity"}}})");
  EXPECT_EQ(code, kExitInputError);
  EXPECT_NE(log_.str().find("square"), std::string::npos);
}

TEST_F(CliTest, UncontrollableIsInputError) {
  const int code = run("certify", R"({
    "plant": {"A": [[-1, 0], [0, -2]], "B": [[1], [0]], "D": [[1], [0]], "f_bar": 0.1},
    "gain": [-1, 0], "law": {"function": {"family": "identity"}}})");
  EXPECT_EQ(code, kExitInputError);
}

TEST_F(CliTest, UnstableLoopIsInfeasible) {
  const int code = run("certify", R"({
    "plant": {"A": [[1]], "B": [[1]], "D": [[1]], "f_bar": 0.1},
    "gain": [0], "law": {"function": {"family": "saturation"}}})");
  EXPECT_EQ(code, kExitInfeasible);
  const auto report = read_json("report.json");
  EXPECT_EQ(report["exit_code"], kExitInfeasible);
}

TEST_F(CliTest, CertifyWritesReport) {
  ASSERT_EQ(run("certify", kDoubleIntegrator), kExitCertified) << log_.str();
  const auto report = read_json("report.json");
  EXPECT_EQ(report["tool"], "oddcert");
  ASSERT_EQ(report["certificates"].size(), 1U);
  const auto& c = report["certificates"][0];
  EXPECT_EQ(c["mode"], "componentwise");
  EXPECT_EQ(c["rho_lo"], 1.0);
  EXPECT_EQ(c["rho_hi"], 1.0);
  EXPECT_EQ(c["x_hi"], "inf");
  EXPECT_GT(read_num(c["delta"]), 0.0);
  EXPECT_EQ(report["config"]["seed"], 1);
}

TEST_F(CliTest, ZeroDisturbanceGivesZeroBound) {
  ASSERT_EQ(run("certify", R"({
    "plant": {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "D": [[0], [1]], "f_bar": 0},
    "gain": [-2, -3], "law": {"function": {"family": "arctan"}}})"),
            kExitCertified)
      << log_.str();
  const auto report = read_json("report.json");
  EXPECT_EQ(read_num(report["certificates"][0]["delta"]), 0.0);
}

TEST(Report, CertificateRoundTrip) {
  Plant p;
  p.A = (Eigen::MatrixXd(2, 2) << 0, 1, 0, 0).finished();
  p.B = (Eigen::MatrixXd(2, 1) << 0, 1).finished();
  p.D = (Eigen::MatrixXd(2, 1) << 0, 1).finished();
  p.f_bar = 0.1;
  const Gain g{(Eigen::RowVectorXd(2) << -2, -3).finished()};
  const auto cert = certify_componentwise(p, ControlLaw::componentwise(g, OddFunction::arctan(1, 1)), TauSchedule{});
  const auto j1 = certificate_json(cert);
  const auto j2 = certificate_json(read_certificate(nlohmann::json::parse(j1.dump())));
  EXPECT_EQ(j1, j2);
}

TEST(Report, NonFiniteNumbersAreStrings) {
  EXPECT_EQ(num(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(num(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(num(std::nan("")), "nan");
  EXPECT_TRUE(std::isinf(read_num(num(std::numeric_limits<double>::infinity()))));
  EXPECT_EQ(read_num(num(0.25)), 0.25);
}

TEST_F(CliTest, SweepOverPowerExponent) {
  ASSERT_EQ(run("sweep", R"({
    "plant": {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "D": [[0], [1]], "f_bar": 0.1},
    "gain": [-2, -3], "law": {"function": {"family": "power"}},
    "sweep": {"grid": {"lambda": [0.3, 0.5, 0.7]}}})"),
            kExitCertified)
      << log_.str();
  std::ifstream csv(dir_ / "out" / "sweep.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("mode,lambda,status", 0), 0U) << line;
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_NE(line.find(",certified,"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 3);
  EXPECT_EQ(read_json("sweep.json")["rows"].size(), 3U);
}

TEST_F(CliTest, SweepMarksInfeasibleCorner) {
  // x'' = x + u under u = phi(-2 x - 3 x'): needs slope above 1/2 somewhere.
  ASSERT_EQ(run("sweep", R"({
    "plant": {"A": [[0, 1], [1, 0]], "B": [[0], [1]], "D": [[0], [1]], "f_bar": 0.01},
    "gain": [-2, -3], "law": {"function": {"family": "saturation", "mu": 1}},
    "sweep": {"grid": {"sigma": [0.3, 2]}}})"),
            kExitCertified)
      << log_.str();
  const auto rows = read_json("sweep.json")["rows"];
  ASSERT_EQ(rows.size(), 2U);
  EXPECT_EQ(rows[0]["status"], "infeasible");
  EXPECT_FALSE(rows[0]["message"].get<std::string>().empty());
  EXPECT_EQ(rows[1]["status"], "certified");
}

TEST_F(CliTest, SimulateFromRestIsAllZero) {
  ASSERT_EQ(run("simulate", R"({
    "plant": {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "D": [[0], [1]], "f_bar": 0.1},
    "gain": [-2, -3], "law": {"function": {"family": "saturation"}},
    "simulation": {"x0": [[0, 0]], "x0_samples": 0, "dt": 0.01, "t_end": 2,
                   "disturbances": [{"kind": "zero"}]}})"),
            kExitCertified)
      << log_.str();
  std::ifstream csv(dir_ / "out" / "sim_componentwise_x0_d0.csv");
  ASSERT_TRUE(csv.good());
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "t,x1,x2,u,f1");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    while (std::getline(ss, cell, ',')) EXPECT_EQ(std::stod(cell), 0.0) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 201);
  const auto report = read_json("simulation.json");
  EXPECT_EQ(report["runs"].size(), 1U);
  EXPECT_EQ(report["runs"][0]["delta_emp"], 0.0);
}

TEST_F(CliTest, SimulateDivergenceExitsThree) {
  // Certification fails, explicit x0 still gets simulated and blows up.
  const int code = run("simulate", R"({
    "plant": {"A": [[1]], "B": [[1]], "D": [[1]], "f_bar": 0.1},
    "gain": [0], "law": {"function": {"family": "identity"}},
    "simulation": {"x0": [[1]], "dt": 0.01, "t_end": 60, "disturbances": [{"kind": "zero"}], "write_csv": false}})");
  EXPECT_EQ(code, kExitDiverged) << log_.str();
  EXPECT_TRUE(read_json("simulation.json")["runs"][0]["diverged"].get<bool>());
}

TEST_F(CliTest, CompareWritesBothLaws) {
  ASSERT_EQ(run("compare", R"({
    "plant": {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "D": [[0], [1]], "f_bar": 0.1},
    "gain": [-2, -3], "law": {"function": {"family": "affine_plus", "base": {"family": "arctan"}, "theta": 1}}})"),
            kExitCertified)
      << log_.str();
  const auto report = read_json("compare.json");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "compare.csv"));
  EXPECT_TRUE(report.dump().find("delta_nl_le_delta_lin") != std::string::npos);
}

TEST_F(CliTest, SeedOverrideIsEchoed) {
  Overrides ov;
  ov.seed = 99;
  ov.region_cap = 50.0;
  const auto cfg = parse_config(kDoubleIntegrator, "cfg", ov);
  EXPECT_EQ(cfg.seed, 99U);
  EXPECT_EQ(cfg.options.region_cap, 50.0);
  EXPECT_EQ(cfg.echo["seed"], 99);
}

TEST(Config, DefaultsAndDisturbances) {
  const auto cfg = parse_config(kDoubleIntegrator);
  EXPECT_EQ(cfg.modes.size(), 1U);
  EXPECT_EQ(cfg.simulation.x0_samples, 10);
  ASSERT_EQ(cfg.simulation.disturbances.size(), 3U);
  EXPECT_EQ(cfg.simulation.disturbances[1].bound(), 0.1);
  EXPECT_THROW(parse_config(R"({
    "plant": {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "D": [[0], [1]], "f_bar": 0.1},
    "gain": [-2, -3], "law": {"function": {"family": "identity"}},
    "simulation": {"disturbances": [{"kind": "constant", "value": 0.5}]}})"),
               Error);
  EXPECT_THROW(parse_config(R"({
    "plant": {"A": [[0, 1], [0, 0]], "B": [[0], [1]], "D": [[0], [1]], "f_bar": 0.1},
    "gain": [-2, -3], "law": {"function": {"family": "cubic"}}})"),
               Error);
}
