#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include "sdr/cli.hpp"
#include "sdr/io.hpp"
#include "test_util.hpp"

using namespace sdr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun sdr_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

/// Mixed string/number tables written by the tool.
struct TextTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    return std::size_t(std::find(header.begin(), header.end(), name) - header.begin());
  }
  double num(std::size_t row, const std::string& name) const {
    return parse_double(rows.at(row).at(col(name)));
  }
};

TextTable read_table(const std::string& file) {
  TextTable t;
  std::istringstream in(read_text(file));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (t.header.empty()) {
      t.header = cells;
    } else {
      t.rows.push_back(cells);
    }
  }
  return t;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sdr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write_dataset(const std::string& name, const Dataset& data) {
    std::vector<std::string> header{"y"};
    for (Index j = 0; j < data.p(); ++j) header.push_back("x" + std::to_string(j + 1));
    Matrix M(data.n(), data.p() + 1);
    M << data.y, data.X;
    write_text(path(name), to_csv(header, M));
    return path(name);
  }

  json read_json(const std::string& name) const { return json::parse(read_text(path(name))); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, FitPfcOnToyFile) {
  write_text(path("toy.csv"), "y,a,b\n1,0.5,2\n2,1.4,1\n3,1.6,3\n4,2.5,0\n5,2.4,2\n6,3.1,1\n");
  const CliRun r = sdr_run({"fit", path("toy.csv"), "--response", "y", "--method", "pfc", "--d", "1",
                         "--basis", "linear", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = read_json("o/fit.json");
  EXPECT_EQ(doc["d"], 1);
  EXPECT_EQ(doc["method"], "pfc");
  EXPECT_NE(r.out.find("method=pfc d=1 loglik="), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("angles_to_pc_axes_deg="), std::string::npos);
  const CsvData reduced = read_csv(path("o/reduced.csv"));
  EXPECT_EQ(reduced.header, (std::vector<std::string>{"y", "dir1"}));
  EXPECT_EQ(reduced.values.rows(), 6);
  const json m = read_json("o/manifest.json");
  EXPECT_EQ(m["command"], "fit");
  EXPECT_EQ(m["config"]["method"], "pfc");
  EXPECT_EQ(m["outputs"].size(), 2u);
  EXPECT_FALSE(m["timestamp"].get<std::string>().empty());
  EXPECT_EQ(m["version"], version_string());
}

TEST_F(CliTest, ReducedCsvMatchesLibraryReductionBitForBit) {
  std::mt19937_64 gen(1);
  const Dataset data = sdr::testing::linear_signal_data(60, Eigen::Vector4d(1, 1, 0, 0), gen);
  const std::string file = write_dataset("d.csv", data);
  ASSERT_EQ(sdr_run({"fit", file, "--response", "y", "--method", "gpfc", "--d", "1", "--basis",
                     "poly:2", "--out", path("o")})
                .code,
            0);
  const Dataset back = dataset_from_csv(read_csv(file), "y");
  const auto fit = fit_general_pfc(back, build_basis(back.y, BasisKind::polynomial(2)), 1);
  const Matrix R = reduce(fit, back.X);
  const CsvData reduced = read_csv(path("o/reduced.csv"));
  for (Index i = 0; i < R.rows(); ++i) {
    EXPECT_EQ(std::memcmp(&reduced.values(i, 1), &R(i, 0), sizeof(double)), 0) << i;
    EXPECT_EQ(reduced.values(i, 0), back.y(i));
  }
}

TEST_F(CliTest, SirAndGeneralPfcWithSliceBasisAgree) {
  std::mt19937_64 gen(2);
  const Dataset data = sdr::testing::linear_signal_data(200, Eigen::Vector4d(1, -1, 0.5, 0), gen);
  Dataset curved = data;
  curved.y = data.y.array() + 0.5 * data.y.array().square();
  const std::string file = write_dataset("d.csv", curved);
  ASSERT_EQ(sdr_run({"fit", file, "--response", "y", "--method", "sir", "--d", "2", "--slices",
                     "8", "--out", path("sir")})
                .code,
            0);
  ASSERT_EQ(sdr_run({"fit", file, "--response", "y", "--method", "gpfc", "--d", "2", "--basis",
                     "slices:8", "--out", path("gpfc")})
                .code,
            0);
  const Matrix a = matrix_from_json(read_json("sir/fit.json")["subspace_basis"]);
  const Matrix b = matrix_from_json(read_json("gpfc/fit.json")["subspace_basis"]);
  EXPECT_LT(subspace_angle(Subspace(a), Subspace(b)), 1e-8 * 180.0 / M_PI);
}

TEST_F(CliTest, KnownDeltaFile) {
  std::mt19937_64 gen(3);
  const Dataset data = sdr::testing::linear_signal_data(80, Eigen::Vector3d(1, 0, 0), gen);
  const std::string file = write_dataset("d.csv", data);
  write_text(path("delta.csv"), "a,b,c\n1,0,0\n0,1,0\n0,0,1\n");
  ASSERT_EQ(sdr_run({"fit", file, "--response", "y", "--method", "gpfc", "--d", "1",
                     "--delta-file", path("delta.csv"), "--out", path("k")})
                .code,
            0);
  ASSERT_EQ(sdr_run({"fit", file, "--response", "y", "--method", "pfc", "--d", "1", "--out",
                     path("p")})
                .code,
            0);
  const Matrix a = matrix_from_json(read_json("k/fit.json")["subspace_basis"]);
  const Matrix b = matrix_from_json(read_json("p/fit.json")["subspace_basis"]);
  EXPECT_LT(subspace_angle(Subspace(a), Subspace(b)), 1e-8);
  EXPECT_EQ(sdr_run({"fit", file, "--response", "y", "--method", "pfc", "--d", "1",
                     "--delta-file", path("delta.csv"), "--out", path("x")})
                .code,
            kExitInput);
}

TEST_F(CliTest, ExitCodesAndMessages) {
  write_text(path("bad.csv"), "y,x1,x2\n1,2,3\n2,oops,4\n");
  CliRun r = sdr_run({"fit", path("bad.csv"), "--response", "y", "--method", "pc", "--d", "1",
                   "--out", path("o")});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("x1"), std::string::npos) << r.err;

  write_text(path("ok.csv"), "y,a,b\n1,0,1\n2,1,0\n3,1,1\n4,0,0\n5,2,1\n");
  r = sdr_run({"fit", path("ok.csv"), "--response", "q", "--method", "pc", "--d", "1"});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("'q'"), std::string::npos) << r.err;
  EXPECT_EQ(sdr_run({"fit", path("ok.csv"), "--response", "y", "--method", "nope", "--d", "1"}).code,
            kExitInput);
  EXPECT_EQ(sdr_run({"fit", path("ok.csv"), "--response", "y", "--method", "pc"}).code, kExitInput);
  EXPECT_EQ(sdr_run({"fit", path("missing.csv"), "--response", "y", "--method", "pc", "--d", "1"}).code,
            kExitInput);
  EXPECT_EQ(sdr_run({"fit", path("ok.csv"), "--response", "y", "--method", "pc", "--d", "2",
                     "--basis", "wavelet:2"})
                .code,
            kExitInput);
  EXPECT_EQ(sdr_run({"frobnicate"}).code, kExitInput);
  EXPECT_EQ(sdr_run({}).code, kExitInput);
  EXPECT_EQ(sdr_run({"--help"}).code, kExitOk);

  write_text(path("const.csv"), "y,a,b\n1,0,1\n1,1,0\n1,1,1\n1,0,0\n1,2,1\n1,3,3\n");
  r = sdr_run({"fit", path("const.csv"), "--response", "y", "--method", "pfc", "--d", "1",
               "--out", path("c")});
  EXPECT_EQ(r.code, kExitFit) << r.err;
}

TEST_F(CliTest, BinaryFlag) {
  std::mt19937_64 gen(4);
  std::bernoulli_distribution b(0.4);
  Dataset data;
  data.X.resize(80, 4);
  data.y = sdr::testing::gaussian_matrix(80, 1, gen).col(0);
  for (Index i = 0; i < 80; ++i)
    for (Index j = 0; j < 4; ++j) data.X(i, j) = b(gen) ? 1.0 : 0.0;
  const std::string file = write_dataset("bin.csv", data);
  CliRun r = sdr_run({"fit", file, "--response", "y", "--method", "pc", "--d", "1", "--binary",
                   "--out", path("b")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json("b/fit.json")["method"], "bernoulli-pc");
  r = sdr_run({"fit", file, "--response", "y", "--method", "pfc", "--d", "1", "--binary",
               "--basis", "linear", "--out", path("bp")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json("bp/fit.json")["r"], 1);
  EXPECT_EQ(sdr_run({"fit", file, "--response", "y", "--method", "sir", "--d", "1", "--binary"}).code,
            kExitInput);
  data.X(5, 2) = 0.5;
  const std::string bad = write_dataset("notbin.csv", data);
  r = sdr_run({"fit", bad, "--response", "y", "--method", "pc", "--d", "1", "--binary"});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("x3"), std::string::npos) << r.err;
}

TEST_F(CliTest, SelectDimTableAndAlphaEdgeCase) {
  std::mt19937_64 gen(5);
  const Dataset data = sdr::testing::linear_signal_data(150, Eigen::Vector4d(2, 0, 0, 0), gen);
  const std::string file = write_dataset("d.csv", data);
  CliRun r = sdr_run({"select-dim", file, "--response", "y", "--alpha", "0.05", "--out", path("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("selected d = 1"), std::string::npos) << r.out;
  const TextTable table = read_table(path("s/dimension_tests.csv"));
  ASSERT_EQ(table.rows.size(), 4u);
  EXPECT_EQ(table.header, (std::vector<std::string>{"d", "lambda", "df", "p_value", "loglik", "aic",
                                                    "bic", "source"}));
  EXPECT_EQ(table.num(3, "lambda"), 0.0);
  EXPECT_EQ(table.num(0, "df"), 3.0);
  EXPECT_EQ(read_json("s/selection.json")["selected_d"], 1);

  r = sdr_run({"select-dim", file, "--response", "y", "--alpha", "1.0", "--out", path("s1")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json("s1/selection.json")["selected_d"], 4);
  EXPECT_EQ(sdr_run({"select-dim", file, "--response", "y", "--alpha", "1.5"}).code, kExitInput);
}

TEST_F(CliTest, SelectDimOnPureNoise) {
  std::mt19937_64 gen(6);
  int small = 0;
  for (int rep = 0; rep < 10; ++rep) {
    Dataset data;
    data.X = sdr::testing::gaussian_matrix(120, 4, gen);
    data.y = sdr::testing::gaussian_matrix(120, 1, gen).col(0);
    const std::string file = write_dataset("noise.csv", data);
    const CliRun r = sdr_run({"select-dim", file, "--response", "y", "--out", path("n")});
    ASSERT_EQ(r.code, 0) << r.err;
    if (read_json("n/selection.json")["selected_d"] == 1) ++small;
  }
  EXPECT_GE(small, 8);
}

TEST_F(CliTest, ReproduceFigureAndReplay) {
  CliRun r = sdr_run({"reproduce-figure", "1a", "--reps", "4", "--seed", "7", "--threads", "2",
                   "--out", path("f")});
  ASSERT_EQ(r.code, 0) << r.err;
  const TextTable table = read_table(path("f/figure_1a.csv"));
  EXPECT_EQ(table.rows.size(), 30u);
  EXPECT_EQ(table.rows[0][table.col("estimator")], "ols");
  EXPECT_TRUE(fs::exists(path("f/figure_1a.gp")));
  const json m = read_json("f/manifest.json");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["config"]["reps"], 4);
  EXPECT_EQ(m["config"]["sweep"]["param"], "n");

  r = sdr_run({"replay", path("f/manifest.json"), "--out", path("g")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("identical figure_1a.csv"), std::string::npos) << r.out;
  EXPECT_EQ(read_text(path("f/figure_1a.csv")), read_text(path("g/figure_1a.csv")));

  json tampered = m;
  tampered["outputs"][0]["fnv1a64"] = "0000000000000000";
  write_text(path("t.json"), tampered.dump());
  EXPECT_EQ(sdr_run({"replay", path("t.json"), "--out", path("h")}).code, kExitFit);

  EXPECT_EQ(sdr_run({"reproduce-figure", "9z"}).code, kExitInput);
}

TEST_F(CliTest, ReproduceFigure3bHasLogAngles) {
  const CliRun r = sdr_run({"reproduce-figure", "3b", "--reps", "2", "--out", path("f")});
  ASSERT_EQ(r.code, 0) << r.err;
  const TextTable table = read_table(path("f/figure_3b.csv"));
  ASSERT_EQ(table.rows.size(), 5u * 4u);
  EXPECT_EQ(table.num(0, "sweep_value"), 0.0);
  EXPECT_EQ(table.num(table.rows.size() - 1, "sweep_value"), 4.0);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    EXPECT_NEAR(table.num(i, "log_mean_angle"), std::log(table.num(i, "mean_angle_deg")), 1e-12);
  }
  // the script plots the log_mean_angle column (9th)
  EXPECT_NE(read_text(path("f/figure_3b.gp")).find("$9"), std::string::npos);
}

TEST_F(CliTest, SimulateFromConfig) {
  const json cfg{{"model", "m12"},
                 {"n", 60},
                 {"sigma0", 1.5},
                 {"reps", 3},
                 {"estimators", {"ols", "sir", "pfc-pc"}},
                 {"seed", 11},
                 {"sweep", {{"param", "sigma"}, {"values", {0.5, 1.0}}}}};
  write_text(path("cfg.json"), cfg.dump());
  CliRun r = sdr_run({"simulate", path("cfg.json"), "--out", path("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_table(path("s/study.csv")).rows.size(), 6u);
  const json m = read_json("s/manifest.json");
  EXPECT_EQ(m["config"]["model"], "m12");
  EXPECT_EQ(m["config"]["sigma0"], 1.5);
  EXPECT_EQ(sdr_run({"replay", path("s/manifest.json"), "--out", path("s2")}).code, 0);

  json bad = cfg;
  bad["sigmaa"] = 1;
  write_text(path("bad.json"), bad.dump());
  r = sdr_run({"simulate", path("bad.json"), "--out", path("b")});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("sigmaa"), std::string::npos) << r.err;
  write_text(path("broken.json"), "{\"model\": ");
  EXPECT_EQ(sdr_run({"simulate", path("broken.json")}).code, kExitInput);
}

TEST(SimConfigJson, RoundTrip) {
  SimConfig cfg;
  cfg.model = SimModel::M19ExactFit;
  cfg.k = 2;
  cfg.c = 1.5;
  cfg.estimators = {StudyEstimator::OLS, StudyEstimator::PfcDelta};
  cfg.compute_mse = true;
  const SimConfig back = config_from_json(config_to_json(cfg));
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
  EXPECT_EQ(*back.c, 1.5);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}
