#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ecoavatar_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Result run(const std::string& args) const {
    const std::string cmd = "env -u ECOAVATAR_OUTPUT_DIR -u ECOAVATAR_VERBOSITY " +
                            std::string(ECOAVATAR_CLI_PATH) + " " + args + " >" + path("stdout.txt") +
                            " 2>" + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    Result r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(path("stdout.txt"));
    r.err = slurp(path("stderr.txt"));
    return r;
  }

  json run_json(const std::string& args) const {
    const auto r = run(args);
    EXPECT_EQ(r.exit_code, 0) << args << "\n" << r.err;
    return json::parse(r.out);
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

  // 30 time units of the reference predator-prey run, every 0.1.
  std::string lv_csv() const {
    run_json("simulate --dt 1e-3 --duration 30 --stride 100 -o " + path("lv.csv"));
    return path("lv.csv");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, CountParamsReproducesUnknowns) {
  const auto j = run_json(
      "count-params --series-count 40 --series-length 3650 --map-shape 100x100 --bricks 4 "
      "--brick-kind dual-kernel --per-brick-scaling");
  EXPECT_EQ(j["total_unknowns"], 332);
  EXPECT_EQ(j["scaling_factors"], 328);
  EXPECT_EQ(j["datasets"], 41);
  EXPECT_EQ(j["series_data_points"], 146000);
  EXPECT_EQ(j["total_data_points"], 156000);
  EXPECT_EQ(j["seed"], 0);
  EXPECT_EQ(j["config"]["command"], "count-params");
  EXPECT_EQ(j["config"]["brick_kind"], "dual-kernel");
}

TEST_F(Cli, SimulateThenFitWithinTwoPercent) {
  run_json("simulate --alpha 1.1 --beta 0.4 --gamma 0.4 --delta 0.1 --r0 10 --f0 5 --dt 1e-3 --duration 20 -o " +
           path("sim.csv"));
  const auto j = run_json("fit-lv -i " + path("sim.csv") + " -o " + path("params.json"));
  const auto& p = j["parameters"];
  const std::map<std::string, double> truth{{"alpha", 1.1}, {"beta", 0.4}, {"gamma", 0.4}, {"delta", 0.1}};
  for (const auto& [name, value] : truth) {
    EXPECT_LT(std::abs(p[name].get<double>() - value) / value, 0.02) << name;
  }
  EXPECT_EQ(json::parse(slurp(path("params.json"))), p);
}

TEST_F(Cli, TrainIsDeterministic) {
  const auto csv = lv_csv();
  write("dtm.asc", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 -9999\n");
  const std::string args = "--seed 5 train -i " + csv + " --map " + path("dtm.asc") +
                           " --nodata-policy mean-fill --bricks 2 --brick-kind kernel --lambda 1e-4 "
                           "--rho-grid 0.5,2 --max-passes 2 -o ";
  const auto a = run_json(args + path("a.json"));
  const auto b = run_json(args + path("b.json"));
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_EQ(a["training_rmse"], b["training_rmse"]);
  EXPECT_EQ(a["seed"], 5);
  EXPECT_EQ(a["config"]["rho_grid"], json::array({0.5, 2.0}));
  EXPECT_EQ(a["config"]["nodata_policy"], "mean-fill");
  EXPECT_TRUE(a.contains("scaling_search"));
  EXPECT_EQ(json::parse(slurp(path("a.json")))["format"], "ecoavatar-model");
}

TEST_F(Cli, LinearTrainReportsSpectralRadius) {
  const auto csv = lv_csv();
  const auto j = run_json("train -i " + csv + " --brick-kind linear --inverse exact-svd -o " + path("m.json"));
  ASSERT_TRUE(j.contains("spectral_radius"));
  EXPECT_GT(j["spectral_radius"].get<double>(), 0.0);
}

TEST_F(Cli, PredictRolloutHorizon) {
  const auto csv = lv_csv();
  run_json("train -i " + csv + " --bricks 2 --lambda 1e-6 -o " + path("m.json"));

  const auto p = run_json("predict -m " + path("m.json") + " --state 10,5");
  ASSERT_EQ(p["prediction"].size(), 2u);
  run_json("predict -m " + path("m.json") + " -i " + csv + " -o " + path("next.csv"));
  const auto next = ecoavatar::io::read_timeseries_csv(path("next.csv"));
  EXPECT_EQ(next.series_count(), 2u);

  const auto r = run_json("rollout -m " + path("m.json") + " --state 10,5 --steps 25 --reference " + csv +
                          " -o " + path("roll.csv") + " --curve " + path("roll_curve.csv"));
  EXPECT_EQ(r["rollout"]["steps"], 25);
  EXPECT_EQ(r["rollout"]["errors"].size(), 25u);
  EXPECT_EQ(ecoavatar::io::read_timeseries_csv(path("roll.csv")).size(), 25u);
  EXPECT_EQ(slurp(path("roll_curve.csv")).substr(0, 11), "step,rmse\n1");

  const auto h = run_json("horizon -m " + path("m.json") + " -i " + csv + " --split 0.8 --epsilon 0.2 --curve " +
                          path("curve.csv"));
  const auto horizon = h["stability"]["horizon"].get<std::size_t>();
  EXPECT_GE(horizon, 1u);
  EXPECT_LE(horizon, h["stability"]["validation_length"].get<std::size_t>());
  EXPECT_TRUE(h["stability"]["spectral_radius"].is_null());
  EXPECT_EQ(h["config"]["epsilon"], 0.2);
  const auto again = run_json("horizon -m " + path("m.json") + " -i " + csv + " --split 0.8 --epsilon 0.2");
  EXPECT_EQ(again["stability"], h["stability"]);
}

TEST_F(Cli, UsleKeepsNodata) {
  const std::string head = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n";
  write("r.asc", head + "2 3\n");
  write("k.asc", head + "0.5 -9999\n");
  write("one.asc", head + "1 1\n");
  const auto j = run_json("usle --r " + path("r.asc") + " --k " + path("k.asc") + " --ls " + path("one.asc") +
                          " --c " + path("one.asc") + " --p " + path("one.asc") + " -o " + path("a.asc"));
  EXPECT_EQ(j["pixels"], 2);
  EXPECT_EQ(j["nodata_pixels"], 1);
  const auto a = ecoavatar::io::parse_ascii_grid_text(slurp(path("a.asc")));
  EXPECT_EQ(a.values[0], 1.0);
  EXPECT_TRUE(a.is_nodata(a.values[1]));
}

TEST_F(Cli, ErrorsAreMachineReadable) {
  const auto missing = run("fit-lv -i " + path("absent.csv"));
  EXPECT_NE(missing.exit_code, 0);
  const auto e = json::parse(missing.err);
  EXPECT_EQ(e["error"]["code"], "io_error");
  EXPECT_FALSE(e["error"]["message"].get<std::string>().empty());

  const auto usage = run("train");
  EXPECT_NE(usage.exit_code, 0);
  EXPECT_EQ(json::parse(usage.err)["error"]["code"], "usage");

  write("bad.csv", "t,a\n0,1\n1,2\n3,4\n");
  const auto cadence = run("fit-lv -i " + path("bad.csv"));
  EXPECT_NE(cadence.exit_code, 0);
  EXPECT_EQ(json::parse(cadence.err)["error"]["code"], "parse_error");

  const auto kind = run("count-params --brick-kind quantum");
  EXPECT_EQ(json::parse(kind.err)["error"]["code"], "invalid_argument");
}

TEST_F(Cli, ReportFileAndOutputDir) {
  const auto r = run("--output-dir " + path("out") + " --report report.json simulate --duration 1 -o sim.csv");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto report = json::parse(slurp(path("out/report.json")));
  EXPECT_EQ(report["config"]["output_dir"], path("out"));
  EXPECT_TRUE(fs::exists(path("out/sim.csv")));

  const std::string cmd = "ECOAVATAR_OUTPUT_DIR=" + path("env") + " " + std::string(ECOAVATAR_CLI_PATH) +
                          " simulate --duration 1 -o sim.csv >/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(path("env/sim.csv")));
}

TEST_F(Cli, EchoedConfigReproducesRun) {
  const auto first = run_json("simulate --alpha 0.9 --duration 2 --stride 10 -o " + path("x.csv"));
  const auto& cfg = first["config"];
  const auto second = run_json("--seed " + std::to_string(cfg["seed"].get<std::uint64_t>()) +
                               " simulate --alpha " + ecoavatar::io::format_double(cfg["alpha"].get<double>()) +
                               " --duration " + ecoavatar::io::format_double(cfg["duration"].get<double>()) +
                               " --stride " + std::to_string(cfg["stride"].get<std::size_t>()) + " -o " +
                               path("y.csv"));
  EXPECT_EQ(slurp(path("x.csv")), slurp(path("y.csv")));
  EXPECT_EQ(first["parameters"], second["parameters"]);
}
