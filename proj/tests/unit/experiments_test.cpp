#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "cascade/common/binary_io.hpp"
#include "cascade/common/error.hpp"
#include "cascade/experiments/experiments.hpp"

namespace cascade::experiments {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.generator.n_samples = 160;
  c.generator.height = 16;
  c.generator.width = 16;
  c.generator.timesteps = 10;
  c.seeds = {1, 2};
  c.forest.n_trees = 10;
  c.train.max_epochs = 2;
  c.sigma_grid = {0.0, 0.3};
  c.fractions = {0.5, 1.0};
  c.learning_curve_seeds = 1;
  c.shap_samples = 5;
  c.shap_background = 10;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("cascade_exp_test_" + name);
  fs::remove_all(d);
  return d;
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = tiny_config();
  c.experiment = ExperimentKind::NoiseSweep;
  c.dataset_path = "/data/x";
  c.train.optimizer.lr = 3e-4;
  c.audit.corruption_asymmetry = 0.3;
  const json j = c;
  ExperimentConfig back;
  from_json(j, back);
  EXPECT_EQ(json(back), j);
  EXPECT_EQ(back.experiment, ExperimentKind::NoiseSweep);
  EXPECT_EQ(*back.dataset_path, "/data/x");
  EXPECT_EQ(back.generator, c.generator);
}

TEST(Config, PartialConfigKeepsDefaults) {
  ExperimentConfig c;
  from_json(json::parse(R"({"seeds": [7], "generator": {"n_samples": 300}})"), c);
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{7});
  EXPECT_EQ(c.generator.n_samples, 300);
  EXPECT_EQ(c.generator.timesteps, GeneratorConfig{}.timesteps);
  EXPECT_EQ(c.sigma_grid, ExperimentConfig{}.sigma_grid);
}

TEST(Config, DefaultsMatchTheProtocol) {
  const ExperimentConfig c;
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{42, 123, 456, 789, 1024}));
  EXPECT_EQ(c.sigma_grid, (std::vector<double>{0.0, 0.05, 0.1, 0.15, 0.2, 0.3}));
  EXPECT_EQ(c.fractions, (std::vector<double>{0.1, 0.2, 0.3, 0.5, 0.8, 1.0}));
  EXPECT_EQ(c.learning_curve_seeds, 3u);
}

TEST(Config, ValidationRejectsBadGrids) {
  ExperimentConfig c;
  c.seeds.clear();
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = ExperimentConfig{};
  c.sigma_grid = {0.1, 0.0};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = ExperimentConfig{};
  c.fractions = {0.0, 0.5};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = ExperimentConfig{};
  c.fractions = {0.5, 1.5};
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_THROW(experiment_from_name("nope"), InvalidArgument);
  EXPECT_EQ(experiment_from_name("noise-sweep"), ExperimentKind::NoiseSweep);
}

TEST(Cells, IdsNameEveryCoordinate) {
  EXPECT_EQ(make_cell("ablation", ModelName::Forest, 42).id, "ablation.rf.seed42");
  EXPECT_EQ(make_cell("noise", ModelName::Sequence, 42, 0.05).id,
            "noise.sequence.seed42.sigma0.05");
  EXPECT_EQ(make_cell("noise", ModelName::Sequence, 42, 0.0).id, "noise.sequence.seed42.sigma0");
  EXPECT_EQ(make_cell("lc", ModelName::Fusion, 7, 0.0, 0.1).id, "lc.fusion.seed7.frac0.1");
  EXPECT_EQ(make_cell("corruption", ModelName::LateFusion, 1, 0.0, 1.0, Condition::ZeroSensor).id,
            "corruption.late_fusion.seed1.zero_sensor");
  const CellSpec c = make_cell("lc", ModelName::Thermal, 3, 0.2, 0.5, Condition::ZeroThermal);
  const CellSpec back = cell_from_json(to_json(c));
  EXPECT_EQ(back.id, c.id);
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.sigma, c.sigma);
  EXPECT_EQ(back.fraction, c.fraction);
  EXPECT_EQ(back.condition, c.condition);
}

class TinyWorkspace : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { ws_ = new Workspace(tiny_config()); }
  static void TearDownTestSuite() {
    delete ws_;
    ws_ = nullptr;
  }
  static Workspace* ws_;
};
Workspace* TinyWorkspace::ws_ = nullptr;

TEST_F(TinyWorkspace, TrainingSubsetIsStratifiedAndDeterministic) {
  Workspace& ws = *ws_;
  const auto half = ws.training_subset(0.5, 1);
  EXPECT_EQ(half, ws.training_subset(0.5, 1));
  EXPECT_EQ(ws.training_subset(1.0, 1), ws.train_indices());
  std::array<std::size_t, kNumClasses> full{}, sub{};
  for (auto i : ws.train_indices()) ++full[ws.data().labels[i]];
  for (auto i : half) ++sub[ws.data().labels[i]];
  for (int c = 0; c < kNumClasses; ++c) {
    EXPECT_EQ(sub[c], std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.5 * full[c]))));
  }
  for (auto i : half) {
    EXPECT_TRUE(std::binary_search(ws.train_indices().begin(), ws.train_indices().end(), i));
  }
}

TEST_F(TinyWorkspace, SigmaZeroCellEqualsCleanCell) {
  const auto a = ws_->compute_cell(make_cell("ablation", ModelName::Sequence, 1));
  const auto b = ws_->compute_cell(make_cell("noise", ModelName::Sequence, 1, 0.0));
  EXPECT_EQ(a.metrics.macro_f1, b.metrics.macro_f1);
  EXPECT_EQ(a.metrics.confusion, b.metrics.confusion);
  ASSERT_TRUE(a.training.has_value());
  EXPECT_EQ(a.training->epochs, 2u);
}

TEST_F(TinyWorkspace, ForestIgnoresThermalZeroing) {
  const auto a = ws_->compute_cell(make_cell("c", ModelName::Forest, 2));
  const auto b = ws_->compute_cell(make_cell("c", ModelName::Forest, 2, 0.0, 1.0, Condition::ZeroThermal));
  EXPECT_EQ(a.metrics.macro_f1, b.metrics.macro_f1);
  EXPECT_EQ(a.metrics.confusion, b.metrics.confusion);
  EXPECT_FALSE(a.training.has_value());
}

TEST_F(TinyWorkspace, AblationHasFiveModelsPerSeedAndReplaysByteIdentical) {
  const fs::path dir = fresh_dir("ablation");
  const ExperimentReport r = run_ablation(*ws_, dir);
  write_report(r, dir);
  EXPECT_EQ(r.cells.size(), 5u * 2u);
  EXPECT_TRUE(std::is_sorted(r.cells.begin(), r.cells.end(), [](const auto& a, const auto& b) {
    return a.spec.id < b.spec.id;
  }));
  EXPECT_EQ(r.significance.size(), 6u);
  EXPECT_EQ(r.assertions.size(), 4u);
  EXPECT_TRUE(fs::exists(dir / "significance.csv"));
  EXPECT_TRUE(fs::exists(dir / "cells/ablation.fusion.seed2.csv"));
  EXPECT_TRUE(fs::exists(dir / "curves/thermal.seed1.csv"));

  const json report = json::parse(io::read_text(dir / "report.json"));
  EXPECT_EQ(report.at("cells").size(), 10u);
  EXPECT_EQ(report.at("config").at("seeds"), json({1, 2}));
  EXPECT_TRUE(report.at("cells")[0].contains("seed"));

  const auto outcomes = replay(dir);
  ASSERT_EQ(outcomes.size(), 10u);
  for (const auto& o : outcomes) EXPECT_TRUE(o.identical) << o.cell_id;
  fs::remove_all(dir);
}

TEST_F(TinyWorkspace, ReplayDetectsTamperedCsv) {
  const fs::path dir = fresh_dir("tamper");
  const ExperimentReport r = run_shap(*ws_, dir);
  write_report(r, dir);
  const fs::path csv = dir / "cells/shap.rf.seed1.csv";
  std::string text = io::read_text(csv);
  text.back() = '7';
  text += "\n";
  io::write_text(csv, text);
  const auto outcomes = replay(dir, {"shap.rf.seed1"});
  ASSERT_EQ(outcomes.size(), 1u);
  EXPECT_FALSE(outcomes[0].identical);
  EXPECT_THROW(replay(dir, {"missing.cell"}), InvalidArgument);
  fs::remove_all(dir);
}

TEST_F(TinyWorkspace, NoiseSweepEmitsEveryGridPoint) {
  const fs::path dir = fresh_dir("noise");
  const ExperimentReport r = run_noise_sweep(*ws_, dir);
  EXPECT_EQ(r.cells.size(), 2u * 2u * 2u);
  EXPECT_EQ(r.summary.at("curve").size(), 2u);
  EXPECT_TRUE(r.assertions[0].passed) << r.assertions[0].detail;  // sigma 0 identity
  fs::remove_all(dir);
}

TEST_F(TinyWorkspace, LearningCurveUsesItsOwnSeedCount) {
  const fs::path dir = fresh_dir("lc");
  const ExperimentReport r = run_learning_curve(*ws_, dir);
  EXPECT_EQ(r.cells.size(), 1u * 2u * 3u);
  EXPECT_EQ(r.summary.at("seeds_used"), 1);
  fs::remove_all(dir);
}

TEST_F(TinyWorkspace, LocalizeNeverRunsStageTwoOnNormal) {
  const fs::path dir = fresh_dir("loc");
  const ExperimentReport r = run_localize(*ws_, dir);
  bool found = false;
  for (const auto& a : r.assertions) {
    if (a.name == "stage2_never_called_on_normal") {
      found = true;
      EXPECT_TRUE(a.passed) << a.detail;
    }
  }
  EXPECT_TRUE(found);
  EXPECT_TRUE(fs::exists(dir / "heatmaps/index.json"));
  fs::remove_all(dir);
}

TEST(OutputDir, RefusesNonEmptyWithoutForce) {
  const fs::path dir = fresh_dir("outdir");
  prepare_output_dir(dir, false);  // creates
  prepare_output_dir(dir, false);  // empty is fine
  io::write_text(dir / "x.txt", "keep\n");
  EXPECT_THROW(prepare_output_dir(dir, false), InvalidArgument);
  EXPECT_NO_THROW(prepare_output_dir(dir, true));
  EXPECT_EQ(io::read_text(dir / "x.txt"), "keep\n");
  fs::remove_all(dir);
}

}  // namespace
}  // namespace cascade::experiments
