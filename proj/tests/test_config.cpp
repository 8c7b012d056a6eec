#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "benchmarks.hpp"

using namespace densctl;

namespace {

const std::string kOu = R"j({
  "grid": {"lower": [-6], "upper": [6], "nodes": [401]},
  "dynamics": {"phi": "x1^2", "Sigma": "2"},
  "cost": {"q": "6*x1^2"}
})j";

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "densctl_test_config";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Config, ParsesForwardProblem) {
  const RunConfig c = parse_config(kOu);
  EXPECT_EQ(c.spec.mode, Mode::forward);
  EXPECT_EQ(c.spec.grid.size(), 401u);
  EXPECT_DOUBLE_EQ(c.spec.grid.axis(0).lower, -6.0);
  ASSERT_TRUE(c.spec.diffusion.has_value());
  ASSERT_TRUE(c.spec.cost.has_value());
  EXPECT_EQ(c.spec.lambda, 2.0);
  EXPECT_EQ(c.sampling.paths, 10000u);
  EXPECT_EQ(c.solver.dense_limit, 4000);
  EXPECT_EQ(c.output_dir, "runs");
}

TEST(Config, HashTracksInputBytes) {
  const RunConfig a = parse_config(kOu);
  const RunConfig b = parse_config(kOu);
  const RunConfig c = parse_config(kOu + "\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Config, InfersInverseMode) {
  const RunConfig c = parse_config(R"j({
    "grid": {"lower": -6, "upper": 6, "nodes": 401},
    "dynamics": {"phi": "x1^2", "Sigma": [["2"]]},
    "target": {"p_inf": "exp(-2*x1^2)"}
  })j");
  EXPECT_EQ(c.spec.mode, Mode::inverse);
  EXPECT_TRUE(c.spec.target.has_value());
}

TEST(Config, SolverAndSamplingSections) {
  const RunConfig c = parse_config(R"j({
    "grid": {"lower": [-2, -3], "upper": [2, 3], "nodes": [21, 31]},
    "dynamics": {"phi": "x1^2 + x2^2", "sigma": [["1", "0"], ["0", "2"]]},
    "cost": {"q": "x1^2"},
    "solver": {"k": 6, "dt": 0.01, "T": 3, "dense_limit": 100, "perturbation": "x1"},
    "sampling": {"seed": 5, "paths": 77, "threads": 3, "points": [[0, 0], [1, 1]], "x0": [0.5, 0], "c": 1.5},
    "output": {"dir": "elsewhere"}
  })j");
  EXPECT_EQ(c.spec.grid.dim(), 2);
  EXPECT_TRUE(c.spec.sigma.has_value());
  EXPECT_EQ(c.solver.k, 6);
  EXPECT_DOUBLE_EQ(c.solver.horizon, 3.0);
  EXPECT_EQ(c.solver.dense_limit, 100);
  EXPECT_EQ(c.solver.perturbation, "x1");
  EXPECT_EQ(c.sampling.seed, 5u);
  EXPECT_EQ(c.sampling.paths, 77u);
  EXPECT_EQ(c.sampling.threads, 3);
  ASSERT_EQ(c.sampling.points.size(), 2u);
  EXPECT_EQ(c.sampling.points[1], (std::vector<double>{1, 1}));
  EXPECT_EQ(c.sampling.x0, (std::vector<double>{0.5, 0}));
  ASSERT_TRUE(c.sampling.c.has_value());
  EXPECT_EQ(*c.sampling.c, 1.5);
  EXPECT_EQ(c.output_dir, "elsewhere");
}

TEST(Config, AutoBoxWhenBoundsOmitted) {
  const RunConfig c = parse_config(R"j({"grid": {"nodes": [101]}, "dynamics": {"phi": "x1^2", "Sigma": "2"}, "cost": {"q": "0"}})j");
  EXPECT_GT(c.spec.grid.axis(0).upper, 4.0);
  EXPECT_EQ(c.spec.grid.axis(0).lower, -c.spec.grid.axis(0).upper);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("{ not json"), ParseError);
  EXPECT_THROW(parse_config("[]"), InputError);
  EXPECT_THROW(parse_config(R"j({"grid": {"nodes": [11]}})j"), InputError);
  EXPECT_THROW(parse_config(R"j({"grid": {"nodes": [11]}, "dynamics": {"Sigma": "2"}})j"), InputError);
  EXPECT_THROW(parse_config(R"j({"grid": {"nodes": [11]}, "dynamics": {"phi": "x1^2"}})j"), InputError);
  EXPECT_THROW(parse_config(R"j({"grid": {"nodes": [11]}, "dynamics": {"phi": "x1^", "Sigma": "2"}})j"), InputError);
  EXPECT_THROW(parse_config(R"j({"grid": {"nodes": [2.5]}, "dynamics": {"phi": "x1^2", "Sigma": "2"}})j"), InputError);
  EXPECT_THROW(parse_config(R"j({"grid": {"lower": [0], "nodes": [11]}, "dynamics": {"phi": "x1^2", "Sigma": "2"}})j"),
               InputError);
  EXPECT_THROW(parse_config(R"j({"grid": {"lower": [0, 0], "upper": [1], "nodes": [11]}, "dynamics": {"phi": "x1^2", "Sigma": "2"}})j"),
               ShapeError);
  EXPECT_THROW(parse_config(R"j({"grid": {"nodes": [11]}, "dynamics": {"phi": "x1^2", "Sigma": [["1", "0"], ["0"]]}})j"),
               ShapeError);
  EXPECT_THROW(parse_config(R"j({"grid": {"nodes": [11]}, "dynamics": {"phi": "x1^2", "Sigma": "2", "boundary": "periodic"}})j"),
               InputError);
  EXPECT_THROW(parse_config(R"j({"grid": {"nodes": [11]}, "dynamics": {"phi": "x1^2", "Sigma": "2"}, "mode": "sideways"})j"),
               InputError);
  EXPECT_THROW(parse_config(R"j({"grid": {"nodes": [11]}, "dynamics": {"phi": "x1^2", "Sigma": "2"}, "solver": {"k": "six"}})j"),
               InputError);
}

TEST(Config, ParseErrorsCarryTheOffset) {
  try {
    parse_config(R"j({"grid": {"nodes": [11]}, "dynamics": {"phi": "x1 + * 2", "Sigma": "2"}})j");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("dynamics.phi"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("offset 5"), std::string::npos) << e.what();
  }
}

TEST(Config, TabulatedTargetRelativeToConfig) {
  const auto csv = scratch("target.csv");
  {
    std::ofstream out(csv);
    out << "x1,p\n";
    for (int i = 0; i < 5; ++i) out << -1.0 + 0.5 * i << "," << std::exp(-std::pow(-1.0 + 0.5 * i, 2)) << "\n";
  }
  const auto cfg_path = scratch("table.json");
  {
    std::ofstream out(cfg_path);
    out << R"j({"grid": {"lower": [-1], "upper": [1], "nodes": [5]},
               "dynamics": {"phi": "x1^2", "Sigma": "2"},
               "target": {"p_inf_csv": "target.csv"}})j";
  }
  const RunConfig c = load_config(cfg_path);
  EXPECT_EQ(c.spec.mode, Mode::inverse);
  ASSERT_TRUE(c.spec.target_table.has_value());
  EXPECT_NEAR((*c.spec.target_table)[2], 1.0, 1e-12);
  EXPECT_EQ(c.source_path, cfg_path.string());
}

TEST(Config, TabulatedTargetMustSitOnTheGrid) {
  const auto csv = scratch("shifted.csv");
  {
    std::ofstream out(csv);
    out << "x1,p\n";
    for (int i = 0; i < 5; ++i) out << -1.1 + 0.5 * i << ",1\n";
  }
  const std::string text = R"j({"grid": {"lower": [-1], "upper": [1], "nodes": [5]},
    "dynamics": {"phi": "x1^2", "Sigma": "2"}, "target": {"p_inf_csv": ")j" + csv.string() + R"j("}})j";
  EXPECT_THROW(parse_config(text), ShapeError);

  std::ofstream(csv) << "x1,p\n-1,1\n-0.5,1\n";
  EXPECT_THROW(parse_config(text), ShapeError);
  std::ofstream(csv) << "x1,p\n-1,1\n-0.5,oops\n0,1\n0.5,1\n1,1\n";
  EXPECT_THROW(parse_config(text), ParseError);
}

TEST(Config, MissingFile) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), InputError);
}

TEST(Config, ShippedConfigsParse) {
  for (const auto& entry : std::filesystem::directory_iterator(DENSCTL_CONFIGS)) {
    if (entry.path().filename() == "malformed.json") {
      EXPECT_THROW(load_config(entry.path()), InputError) << entry.path();
    } else {
      EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    }
  }
}
