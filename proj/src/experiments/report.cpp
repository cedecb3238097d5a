#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "cascade/common/binary_io.hpp"
#include "cascade/common/error.hpp"
#include "cascade/experiments/experiments.hpp"

namespace cascade::experiments {

namespace fs = std::filesystem;
using nlohmann::json;

bool ExperimentReport::all_passed() const {
  return std::all_of(assertions.begin(), assertions.end(),
                     [](const Assertion& a) { return a.passed; });
}

const CellResult& ExperimentReport::cell(const std::string& id) const {
  for (const auto& c : cells) {
    if (c.spec.id == id) return c;
  }
  throw InvalidArgument("no cell " + id);
}

namespace {

json metrics_json(const MetricsRow& m) {
  return json{{"accuracy", m.accuracy},
              {"macro_precision", m.macro_precision},
              {"macro_recall", m.macro_recall},
              {"macro_f1", m.macro_f1},
              {"macro_auroc", m.macro_auroc},
              {"f1", m.f1},
              {"confusion", m.confusion},
              {"auroc_excluded", m.auroc_excluded}};
}

json significance_json(const SignificanceRow& s) {
  return json{{"comparison", s.comparison},     {"mean_a", s.mean_a},
              {"mean_b", s.mean_b},             {"delta", s.delta},
              {"t", s.t_statistic},             {"p_value", s.p_value},
              {"cohens_d_paired", s.cohens_d_paired},
              {"cohens_d_pooled", s.cohens_d_pooled},
              {"ci_low", s.ci_low},             {"ci_high", s.ci_high},
              {"degenerate", s.degenerate}};
}

std::string cell_file(const std::string& id) { return "cells/" + id + ".csv"; }

}  // namespace

const std::vector<std::string>& recorded_deviations() {
  static const std::vector<std::string> d{
      "sequence encoder is a single-direction GRU (hidden 32), not a bidirectional LSTM",
      "thermal encoder is a three-layer conv stack trained from scratch, not a pretrained ResNet-18",
      "synthetic benchmark data replaces the field corpus",
  };
  return d;
}

json to_json(const ExperimentReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    json j = to_json(c.spec);
    j["metrics"] = metrics_json(c.metrics);
    j["metrics_csv"] = cell_file(c.spec.id);
    if (c.training) {
      j["training"] = {{"epochs", c.training->epochs},
                       {"best_epoch", c.training->best_epoch},
                       {"stopped_early", c.training->stopped_early},
                       {"seconds", c.training->seconds}};
    }
    if (c.failure) j["failure"] = *c.failure;
    cells.push_back(std::move(j));
  }
  json sig = json::array();
  for (const auto& s : r.significance) sig.push_back(significance_json(s));
  json asserts = json::array();
  for (const auto& a : r.assertions) {
    asserts.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  }
  return json{{"experiment", r.experiment},
              {"config", r.config},
              {"deviations", recorded_deviations()},
              {"cells", cells},
              {"significance", sig},
              {"bias", r.bias ? to_json(*r.bias) : json(nullptr)},
              {"assertions", asserts},
              {"all_passed", r.all_passed()},
              {"summary", r.summary},
              {"artifacts", r.artifacts}};
}

void write_report(const ExperimentReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir / "cells");
  io::write_text(out_dir / "config.json", report.config.dump(2) + "\n");
  for (const auto& c : report.cells) io::write_text(out_dir / cell_file(c.spec.id), metrics_csv(c));
  std::ofstream all(out_dir / "metrics.csv");
  if (!all) throw Error("cannot write " + (out_dir / "metrics.csv").string());
  write_metrics_csv_header(all);
  for (const auto& c : report.cells) write_metrics_csv_row(all, c.spec.id, c.metrics);
  io::write_text(out_dir / "report.json", to_json(report).dump(2) + "\n");
}

std::vector<ReplayOutcome> replay(const fs::path& report_dir,
                                  const std::vector<std::string>& cell_ids) {
  json report, config_json;
  try {
    report = json::parse(io::read_text(report_dir / "report.json"));
    config_json = json::parse(io::read_text(report_dir / "config.json"));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("replay: ") + e.what(), e.byte);
  }
  ExperimentConfig config;
  from_json(config_json, config);

  std::vector<CellSpec> specs;
  for (const auto& j : report.at("cells")) {
    CellSpec spec = cell_from_json(j);
    if (cell_ids.empty() ||
        std::find(cell_ids.begin(), cell_ids.end(), spec.id) != cell_ids.end()) {
      specs.push_back(spec);
    }
  }
  for (const auto& id : cell_ids) {
    if (std::none_of(specs.begin(), specs.end(), [&](const CellSpec& s) { return s.id == id; })) {
      throw InvalidArgument("report has no cell " + id);
    }
  }

  Workspace ws(config);
  std::vector<ReplayOutcome> out;
  for (const auto& spec : specs) {
    ReplayOutcome o;
    o.cell_id = spec.id;
    o.expected = io::read_text(report_dir / cell_file(spec.id));
    o.actual = metrics_csv(ws.compute_cell(spec));
    o.identical = o.expected == o.actual;
    out.push_back(std::move(o));
  }
  return out;
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw InvalidArgument(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force) {
      throw InvalidArgument("output directory " + dir.string() +
                            " is not empty; pass --force to overwrite");
    }
  }
  fs::create_directories(dir);
}

fs::path default_output_root() {
  if (const char* root = std::getenv("CASCADE_OUTPUT_ROOT"); root && *root) return root;
  return "cascade_runs";
}

}  // namespace cascade::experiments
