// Command-line front end for dataset generation, single-model training and
// the experiment suites. Exit codes: 0 success, 1 an asserted property or a
// replay comparison failed, 2 usage or runtime error.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cascade/common/binary_io.hpp"
#include "cascade/common/error.hpp"
#include "cascade/core/config_json.hpp"
#include "cascade/core/dataset_io.hpp"
#include "cascade/core/generator.hpp"
#include "cascade/experiments/experiments.hpp"
#include "cascade/neuralkit/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cascade;
using namespace cascade::experiments;

namespace {

struct GeneratorFlags {
  int n_samples = 0;
  std::uint64_t data_seed = 0;
  double thermal_strength = 0.0;
  double thermal_inflation = 0.0;
  CLI::Option* n_samples_opt = nullptr;
  CLI::Option* data_seed_opt = nullptr;
  CLI::Option* thermal_strength_opt = nullptr;
  CLI::Option* thermal_inflation_opt = nullptr;

  void add(CLI::App* app) {
    n_samples_opt = app->add_option("--n-samples", n_samples, "Generated dataset size");
    data_seed_opt = app->add_option("--data-seed", data_seed, "Generator seed");
    thermal_strength_opt =
        app->add_option("--thermal-strength", thermal_strength, "Thermal signal strength");
    thermal_inflation_opt = app->add_option("--thermal-variance-inflation", thermal_inflation,
                                            "Thermal pixel noise variance multiplier");
  }

  void apply(GeneratorConfig& g) const {
    if (n_samples_opt->count()) g.n_samples = n_samples;
    if (data_seed_opt->count()) g.seed = data_seed;
    if (thermal_strength_opt->count()) g.thermal_signal_strength = thermal_strength;
    if (thermal_inflation_opt->count()) g.thermal_variance_inflation = thermal_inflation;
  }
};

struct CommonFlags {
  std::string config_path;
  std::string dataset;
  std::string out;
  bool force = false;
  std::vector<std::uint64_t> seeds;
  std::vector<double> sigma_grid;
  std::vector<double> fractions;
  std::size_t max_epochs = 0;
  std::size_t patience = 0;
  std::size_t lc_seeds = 0;
  std::size_t shap_samples = 0;
  std::size_t shap_background = 0;
  double iou_quantile = 0.0;
  GeneratorFlags gen;
  std::vector<CLI::Option*> opts;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "Experiment config (JSON); flags override it")
        ->check(CLI::ExistingFile);
    app->add_option("--dataset", dataset, "Dataset directory written by `generate`")
        ->check(CLI::ExistingDirectory);
    app->add_option("--out", out, "Output directory (default $CASCADE_OUTPUT_ROOT/<name>)");
    app->add_flag("--force", force, "Write into a non-empty output directory");
    opts = {
        app->add_option("--seeds", seeds, "Model seeds")->delimiter(','),
        app->add_option("--sigma-grid", sigma_grid, "Noise levels (ascending)")->delimiter(','),
        app->add_option("--fractions", fractions, "Training fractions (ascending)")->delimiter(','),
        app->add_option("--max-epochs", max_epochs, "Training epoch limit"),
        app->add_option("--patience", patience, "Early-stopping patience"),
        app->add_option("--learning-curve-seeds", lc_seeds, "Seeds used by the learning curve"),
        app->add_option("--shap-samples", shap_samples, "Validation samples explained"),
        app->add_option("--shap-background", shap_background, "Background rows for SHAP"),
        app->add_option("--iou-quantile", iou_quantile, "Heatmap threshold quantile"),
    };
    gen.add(app);
  }

  ExperimentConfig config(ExperimentKind kind) const {
    ExperimentConfig c;
    if (!config_path.empty()) {
      try {
        from_json(json::parse(io::read_text(config_path)), c);
      } catch (const json::parse_error& e) {
        throw ParseError(config_path + ": " + e.what(), e.byte);
      }
    }
    c.experiment = kind;
    if (!dataset.empty()) c.dataset_path = dataset;
    gen.apply(c.generator);
    if (opts[0]->count()) c.seeds = seeds;
    if (opts[1]->count()) c.sigma_grid = sigma_grid;
    if (opts[2]->count()) c.fractions = fractions;
    if (opts[3]->count()) c.train.max_epochs = max_epochs;
    if (opts[4]->count()) c.train.patience = patience;
    if (opts[5]->count()) c.learning_curve_seeds = lc_seeds;
    if (opts[6]->count()) c.shap_samples = shap_samples;
    if (opts[7]->count()) c.shap_background = shap_background;
    if (opts[8]->count()) c.iou_quantile = iou_quantile;
    c.validate();
    return c;
  }

  fs::path output_dir(const std::string& fallback) const {
    return out.empty() ? default_output_root() / fallback : fs::path(out);
  }
};

int print_report(const ExperimentReport& r, const fs::path& dir) {
  for (const auto& a : r.assertions) {
    std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << '\n';
  }
  std::cout << r.cells.size() << " cells, report in " << (dir / "report.json").string() << '\n';
  return r.all_passed() ? 0 : 1;
}

int run_generate(const std::string& config_path, const GeneratorFlags& flags,
                 const std::string& out, bool force) {
  GeneratorConfig g;
  if (!config_path.empty()) {
    const json j = json::parse(io::read_text(config_path));
    from_json(j.contains("generator") ? j.at("generator") : j, g);
  }
  flags.apply(g);
  g.validate();
  const fs::path dir = out.empty() ? default_output_root() / "dataset" : fs::path(out);
  prepare_output_dir(dir, force);
  const Dataset ds = generate_dataset(g);
  save_dataset(ds, dir);
  const auto train = ds.class_counts(Split::Train);
  const auto val = ds.class_counts(Split::Validation);
  std::cout << "wrote " << ds.size() << " samples to " << dir.string() << '\n';
  for (int c = 0; c < kNumClasses; ++c) {
    std::cout << "  " << label_name(static_cast<LabelClass>(c)) << ": train " << train[c]
              << ", validation " << val[c] << '\n';
  }
  return 0;
}

int run_train(const CommonFlags& flags, const std::string& model, std::uint64_t seed,
              double fraction) {
  ExperimentConfig cfg = flags.config(ExperimentKind::Ablation);
  cfg.seeds = {seed};
  const ModelName m = model_from_name(model);
  const fs::path dir = flags.output_dir("train_" + model + "_seed" + std::to_string(seed));
  prepare_output_dir(dir, flags.force);

  Workspace ws(cfg);
  const CellResult cell = ws.compute_cell(make_cell("train", m, seed, 0.0, fraction));
  io::write_text(dir / "metrics.csv", metrics_csv(cell));
  io::write_text(dir / "config.json", json(cfg).dump(2) + "\n");
  const json meta{{"model", model}, {"seed", seed}, {"fraction", fraction}};
  auto save_neural = [&](const baselines::NeuralModel& nm, ModelName which, const std::string& sub) {
    nk::save_checkpoint(dir / sub, nm.parameters(), meta);
    if (const auto* h = ws.history(which, seed, fraction)) {
      nk::write_training_curve(dir / (sub + "_curve.csv"), *h);
    }
  };
  switch (m) {
    case ModelName::Forest: save_forest(ws.forest(seed, fraction), dir / "forest.json"); break;
    case ModelName::Sequence: save_neural(ws.sequence(seed, fraction), m, "checkpoint"); break;
    case ModelName::Thermal: save_neural(ws.thermal(seed, fraction), m, "checkpoint"); break;
    case ModelName::Fusion: save_neural(ws.fusion(seed, fraction), m, "checkpoint"); break;
    case ModelName::LateFusion:
      save_neural(ws.sequence(seed, fraction), ModelName::Sequence, "sequence");
      save_neural(ws.thermal(seed, fraction), ModelName::Thermal, "thermal");
      break;
  }
  std::cout << model << " seed " << seed << ": macro F1 " << cell.metrics.macro_f1
            << ", accuracy " << cell.metrics.accuracy << ", macro AUROC "
            << cell.metrics.macro_auroc;
  if (cell.training) std::cout << ", " << cell.training->epochs << " epochs";
  std::cout << "\nwrote " << dir.string() << '\n';
  return 0;
}

int run_suite(const CommonFlags& flags, ExperimentKind kind) {
  ExperimentConfig cfg = flags.config(kind);
  const fs::path dir = flags.output_dir(experiment_name(kind));
  prepare_output_dir(dir, flags.force);
  cfg.output_dir = dir.string();
  Workspace ws(cfg);
  const ExperimentReport report = run_experiment(ws, dir);
  write_report(report, dir);
  if (kind == ExperimentKind::Audit) {
    for (const auto& [name, rel] : report.artifacts) {
      if (name.rfind("audit:", 0) == 0) {
        fs::path txt = dir / rel;
        txt.replace_extension(".txt");
        std::cout << name.substr(6) << '\n' << io::read_text(txt);
      }
    }
  }
  return print_report(report, dir);
}

int run_replay(const std::string& dir, const std::vector<std::string>& cells) {
  const auto outcomes = replay(dir, cells);
  bool ok = true;
  for (const auto& o : outcomes) {
    std::cout << (o.identical ? "IDENTICAL " : "DIFFERS ") << o.cell_id << '\n';
    if (!o.identical) {
      ok = false;
      std::cout << "  expected:\n" << o.expected << "  actual:\n" << o.actual;
    }
  }
  std::cout << outcomes.size() << " cells replayed\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal fault-diagnosis benchmark: data, baselines and experiment suites"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  std::string gen_config, gen_out;
  bool gen_force = false;
  GeneratorFlags gen_flags;
  gen->add_option("--config", gen_config, "Generator config (JSON, or an experiment config)")
      ->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Dataset directory");
  gen->add_flag("--force", gen_force, "Write into a non-empty directory");
  gen_flags.add(gen);

  auto* train = app.add_subcommand("train", "Train and evaluate one model");
  CommonFlags train_flags;
  std::string train_model = "rf";
  std::uint64_t train_seed = 42;
  double train_fraction = 1.0;
  train_flags.add(train);
  train->add_option("--model", train_model, "rf, sequence, thermal, fusion or late_fusion")
      ->check(CLI::IsMember({"rf", "sequence", "thermal", "fusion", "late_fusion"}));
  train->add_option("--seed", train_seed, "Model seed");
  train->add_option("--fraction", train_fraction, "Share of the training split")
      ->check(CLI::Range(0.0, 1.0));

  const std::pair<const char*, ExperimentKind> suites[] = {
      {"ablation", ExperimentKind::Ablation},
      {"noise-sweep", ExperimentKind::NoiseSweep},
      {"learning-curve", ExperimentKind::LearningCurve},
      {"corruption", ExperimentKind::Corruption},
      {"audit", ExperimentKind::Audit},
      {"localize", ExperimentKind::Localize},
      {"shap", ExperimentKind::Shap},
  };
  std::vector<std::pair<CLI::App*, ExperimentKind>> suite_apps;
  std::vector<std::unique_ptr<CommonFlags>> suite_flags;
  for (const auto& [name, kind] : suites) {
    auto* sub = app.add_subcommand(name, "Run the " + std::string(name) + " experiment");
    suite_flags.push_back(std::make_unique<CommonFlags>());
    suite_flags.back()->add(sub);
    suite_apps.emplace_back(sub, kind);
  }

  auto* rep = app.add_subcommand("replay", "Recompute cells of a report and compare metric CSVs");
  std::string rep_dir;
  std::vector<std::string> rep_cells;
  rep->add_option("report_dir", rep_dir, "Directory holding report.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  rep->add_option("--cell", rep_cells, "Cell id (repeatable; default all)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return run_generate(gen_config, gen_flags, gen_out, gen_force);
    if (*train) return run_train(train_flags, train_model, train_seed, train_fraction);
    if (*rep) return run_replay(rep_dir, rep_cells);
    for (std::size_t k = 0; k < suite_apps.size(); ++k) {
      if (*suite_apps[k].first) return run_suite(*suite_flags[k], suite_apps[k].second);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
