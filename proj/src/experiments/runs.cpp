#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cascade/common/binary_io.hpp"
#include "cascade/common/error.hpp"
#include "cascade/common/math.hpp"
#include "cascade/experiments/experiments.hpp"
#include "cascade/neuralkit/tensor.hpp"
#include "cascade/treeshap/treeshap.hpp"

namespace cascade::experiments {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr ModelName kAblationModels[] = {ModelName::Forest, ModelName::Sequence,
                                         ModelName::Thermal, ModelName::Fusion,
                                         ModelName::LateFusion};

ExperimentReport begin_report(const Workspace& ws, ExperimentKind kind) {
  ExperimentReport r;
  r.experiment = experiment_name(kind);
  ExperimentConfig c = ws.config();
  c.experiment = kind;
  r.config = c;
  return r;
}

void finish(ExperimentReport& r) {
  std::sort(r.cells.begin(), r.cells.end(),
            [](const CellResult& a, const CellResult& b) { return a.spec.id < b.spec.id; });
}

void add_assertion(ExperimentReport& r, std::string name, bool passed, std::string detail) {
  r.assertions.push_back({std::move(name), passed, std::move(detail)});
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << std::fixed << v;
  return s.str();
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(10);
  return out;
}

double max_prior(const Dataset& ds) {
  const auto& p = ds.config.class_priors;
  double total = 0.0;
  for (double v : p) total += v;
  return *std::max_element(p.begin(), p.end()) / total;
}

struct Series {
  std::vector<double> f1;
  double mean() const { return mean_of(f1); }
  double sd() const { return sample_std_of(f1); }
};

void write_curves(Workspace& ws, const fs::path& out_dir, ExperimentReport& r, ModelName m,
                  std::uint64_t seed, double fraction, const std::string& stem) {
  const nk::TrainingHistory* h = ws.history(m, seed, fraction);
  if (!h) return;
  const std::string rel = "curves/" + stem + ".csv";
  fs::create_directories(out_dir / "curves");
  nk::write_training_curve(out_dir / rel, *h);
  r.artifacts["curve:" + stem] = rel;
}

bool same_metrics(const MetricsRow& a, const MetricsRow& b) {
  return a.accuracy == b.accuracy && a.macro_precision == b.macro_precision &&
         a.macro_recall == b.macro_recall && a.macro_f1 == b.macro_f1 &&
         a.macro_auroc == b.macro_auroc && a.f1 == b.f1 && a.confusion == b.confusion;
}

std::vector<SensorImportance> shap_ranking(const Forest& forest, const Workspace& ws,
                                           std::size_t n_samples, std::size_t n_background,
                                           std::uint64_t seed,
                                           std::vector<AttributionReport>* reports_out,
                                           std::vector<std::size_t>* explained_out) {
  const FeatureMatrix train_x = ws.features().select_rows(ws.train_indices());
  const FeatureMatrix background =
      sample_background(train_x, std::min(n_background, train_x.rows), seed);
  std::vector<AttributionReport> reports;
  std::vector<std::size_t> explained;
  const auto& val = ws.validation_indices();
  for (std::size_t k = 0; k < std::min(n_samples, val.size()); ++k) {
    explained.push_back(val[k]);
    reports.push_back(explain_treeshap(forest, ws.features().row(val[k]), background));
  }
  auto ranking = aggregate_by_sensor(reports, ws.dataset().channel_names);
  if (reports_out) *reports_out = std::move(reports);
  if (explained_out) *explained_out = std::move(explained);
  return ranking;
}

json ranking_json(std::span<const SensorImportance> ranking) {
  json a = json::array();
  for (const auto& s : ranking) a.push_back({{"channel", s.channel}, {"importance", s.importance}});
  return a;
}

}  // namespace

// ---- ablation ---------------------------------------------------------------

ExperimentReport run_ablation(Workspace& ws, const fs::path& out_dir) {
  ExperimentReport r = begin_report(ws, ExperimentKind::Ablation);
  const auto& seeds = ws.config().seeds;
  std::map<ModelName, Series> f1;
  std::map<ModelName, std::vector<double>> acc, auroc;
  json epochs = json::object();
  for (auto seed : seeds) {
    for (ModelName m : kAblationModels) {
      CellResult cell = ws.compute_cell(make_cell("ablation", m, seed));
      f1[m].f1.push_back(cell.metrics.macro_f1);
      acc[m].push_back(cell.metrics.accuracy);
      auroc[m].push_back(cell.metrics.macro_auroc);
      if (cell.training) {
        epochs[model_name(m)].push_back({{"seed", seed},
                                         {"epochs", cell.training->epochs},
                                         {"best_epoch", cell.training->best_epoch}});
        write_curves(ws, out_dir, r, m, seed, 1.0,
                     model_name(m) + ".seed" + std::to_string(seed));
      }
      r.cells.push_back(std::move(cell));
    }
  }

  {
    auto out = open_out(out_dir / "ablation_summary.csv");
    out << "model,n_seeds,mean_f1,std_f1,mean_accuracy,mean_auroc\n";
    for (ModelName m : kAblationModels) {
      out << model_name(m) << ',' << f1[m].f1.size() << ',' << f1[m].mean() << ','
          << f1[m].sd() << ',' << mean_of(acc[m]) << ',' << mean_of(auroc[m]) << '\n';
    }
    r.artifacts["ablation_summary"] = "ablation_summary.csv";
  }

  const double rf = f1[ModelName::Forest].mean();
  const double seq = f1[ModelName::Sequence].mean();
  const double th = f1[ModelName::Thermal].mean();
  const double fu = f1[ModelName::Fusion].mean();
  const double late = f1[ModelName::LateFusion].mean();

  std::optional<SignificanceRow> rf_vs_fusion;
  if (seeds.size() >= 2) {
    const std::pair<ModelName, ModelName> pairs[] = {
        {ModelName::Forest, ModelName::LateFusion}, {ModelName::Forest, ModelName::Sequence},
        {ModelName::Forest, ModelName::Fusion},     {ModelName::Forest, ModelName::Thermal},
        {ModelName::LateFusion, ModelName::Fusion}, {ModelName::Fusion, ModelName::Sequence},
    };
    for (const auto& [a, b] : pairs) {
      r.significance.push_back(compare_paired(model_name(a), f1[a].f1, model_name(b), f1[b].f1,
                                              seeds.front()));
      if (a == ModelName::Forest && b == ModelName::Fusion) rf_vs_fusion = r.significance.back();
    }
    auto out = open_out(out_dir / "significance.csv");
    write_significance_csv(out, r.significance);
    r.artifacts["significance"] = "significance.csv";
  }

  json means = json::object();
  for (ModelName m : kAblationModels) {
    means[model_name(m)] = {{"mean_f1", f1[m].mean()}, {"std_f1", f1[m].sd()}};
  }
  r.summary = {{"models", means}, {"epochs", epochs}, {"max_prior", max_prior(ws.dataset())}};

  add_assertion(r, "rf_macro_f1_at_least_0.90", rf >= 0.90, "rf mean F1 " + fmt(rf));
  const double limit = max_prior(ws.dataset()) + 0.05;
  add_assertion(r, "thermal_at_most_max_prior_plus_5pp", th <= limit,
                "thermal mean F1 " + fmt(th) + " vs limit " + fmt(limit));
  const bool ordered = rf >= late && late >= std::max(seq, fu) && std::min(seq, fu) >= th;
  add_assertion(r, "ordering_rf_late_seqfusion_thermal", ordered,
                "rf " + fmt(rf) + ", late " + fmt(late) + ", sequence " + fmt(seq) +
                    ", fusion " + fmt(fu) + ", thermal " + fmt(th));
  if (rf_vs_fusion) {
    add_assertion(r, "rf_beats_fusion_p_below_0.05",
                  rf > fu && rf_vs_fusion->p_value < 0.05,
                  "delta " + fmt(rf_vs_fusion->delta) + ", p " +
                      std::to_string(rf_vs_fusion->p_value));
  } else {
    add_assertion(r, "rf_beats_fusion_p_below_0.05", false, "needs at least 2 seeds");
  }
  finish(r);
  return r;
}

// ---- noise sweep ------------------------------------------------------------

ExperimentReport run_noise_sweep(Workspace& ws, const fs::path& out_dir) {
  ExperimentReport r = begin_report(ws, ExperimentKind::NoiseSweep);
  const auto& cfg = ws.config();
  const ModelName models[] = {ModelName::Forest, ModelName::Sequence};
  std::map<std::pair<int, double>, Series> f1;
  bool identity_ok = true;
  for (auto seed : cfg.seeds) {
    for (double sigma : cfg.sigma_grid) {
      for (ModelName m : models) {
        CellResult cell = ws.compute_cell(make_cell("noise", m, seed, sigma));
        f1[{static_cast<int>(m), sigma}].f1.push_back(cell.metrics.macro_f1);
        if (sigma == 0.0) {
          const CellResult clean = ws.compute_cell(make_cell("ablation", m, seed));
          identity_ok = identity_ok && same_metrics(clean.metrics, cell.metrics);
        }
        r.cells.push_back(std::move(cell));
      }
    }
  }

  std::vector<double> gap;
  json rows = json::array();
  {
    auto out = open_out(out_dir / "noise_sweep.csv");
    out << "sigma,rf_mean_f1,rf_std_f1,sequence_mean_f1,sequence_std_f1,gap\n";
    for (double sigma : cfg.sigma_grid) {
      const Series& a = f1[{static_cast<int>(ModelName::Forest), sigma}];
      const Series& b = f1[{static_cast<int>(ModelName::Sequence), sigma}];
      gap.push_back(a.mean() - b.mean());
      out << sigma << ',' << a.mean() << ',' << a.sd() << ',' << b.mean() << ',' << b.sd() << ','
          << gap.back() << '\n';
      rows.push_back({{"sigma", sigma}, {"rf", a.mean()}, {"sequence", b.mean()}, {"gap", gap.back()}});
    }
    r.artifacts["noise_sweep"] = "noise_sweep.csv";
  }

  const auto& grid = cfg.sigma_grid;
  json crossover = nullptr;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (gap[i] > 0.0 && gap[i + 1] <= 0.0) {
      crossover = grid[i] + (grid[i + 1] - grid[i]) * gap[i] / (gap[i] - gap[i + 1]);
      break;
    }
  }
  r.summary = {{"curve", rows}, {"crossover_sigma", crossover}};

  const bool has_zero = grid.front() == 0.0;
  add_assertion(r, "sigma0_equals_clean", has_zero && identity_ok,
                has_zero ? (identity_ok ? "bitwise equal" : "differs from clean evaluation")
                         : "grid lacks sigma 0");

  bool low_ok = false;
  std::string low_detail = "no grid point <= 0.05";
  std::optional<std::size_t> low;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] <= 0.05 + 1e-12) {
      if (!low) low_ok = true;
      low = i;
      low_ok = low_ok && gap[i] > 0.0;
    }
  }
  if (low) low_detail = "gap at sigma " + fmt(grid[*low]) + " is " + fmt(gap[*low]);
  add_assertion(r, "rf_beats_sequence_at_low_noise", low_ok, low_detail);

  const std::size_t high = grid.size() - 1;
  const bool shrinks = low && high > *low && (gap[*low] - gap[high] >= 0.10 || gap[high] < 0.0);
  add_assertion(r, "gap_shrinks_10pp_or_inverts", shrinks,
                low ? "gap " + fmt(gap[*low]) + " -> " + fmt(gap[high]) + " at sigma " +
                          fmt(grid[high])
                    : low_detail);
  finish(r);
  return r;
}

// ---- learning curve ---------------------------------------------------------

ExperimentReport run_learning_curve(Workspace& ws, const fs::path& out_dir) {
  ExperimentReport r = begin_report(ws, ExperimentKind::LearningCurve);
  const auto& cfg = ws.config();
  const ModelName models[] = {ModelName::Forest, ModelName::Sequence, ModelName::Fusion};
  const std::size_t n_seeds = std::min(cfg.learning_curve_seeds, cfg.seeds.size());
  std::map<std::pair<int, double>, Series> f1;
  json sizes = json::array();
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const auto seed = cfg.seeds[s];
    for (double frac : cfg.fractions) {
      sizes.push_back({{"seed", seed}, {"fraction", frac},
                       {"train_size", ws.training_subset(frac, seed).size()}});
      for (ModelName m : models) {
        CellResult cell = ws.compute_cell(make_cell("lc", m, seed, 0.0, frac));
        f1[{static_cast<int>(m), frac}].f1.push_back(cell.metrics.macro_f1);
        if (cell.training) {
          write_curves(ws, out_dir, r, m, seed, frac,
                       model_name(m) + ".seed" + std::to_string(seed) + ".frac" + fmt(frac));
        }
        r.cells.push_back(std::move(cell));
      }
    }
  }

  bool monotone = true;
  std::string mono_detail = "all curves within 0.02 of non-decreasing";
  {
    auto out = open_out(out_dir / "learning_curve.csv");
    out << "model,fraction,n_seeds,mean_f1,std_f1\n";
    for (ModelName m : models) {
      double prev = -1.0;
      for (double frac : cfg.fractions) {
        const Series& s = f1[{static_cast<int>(m), frac}];
        out << model_name(m) << ',' << frac << ',' << s.f1.size() << ',' << s.mean() << ','
            << s.sd() << '\n';
        if (prev >= 0.0 && s.mean() < prev - 0.02) {
          monotone = false;
          mono_detail = model_name(m) + " drops from " + fmt(prev) + " to " + fmt(s.mean()) +
                        " at fraction " + fmt(frac);
        }
        prev = s.mean();
      }
    }
    r.artifacts["learning_curve"] = "learning_curve.csv";
  }
  r.summary = {{"seeds_used", n_seeds}, {"train_sizes", sizes}};

  const double lo = cfg.fractions.front();
  const double rf_lo = f1[{static_cast<int>(ModelName::Forest), lo}].mean();
  const double fu_lo = f1[{static_cast<int>(ModelName::Fusion), lo}].mean();
  add_assertion(r, "rf_at_least_fusion_at_smallest_fraction", rf_lo >= fu_lo,
                "fraction " + fmt(lo) + ": rf " + fmt(rf_lo) + ", fusion " + fmt(fu_lo));
  add_assertion(r, "curves_monotone_within_2pp", monotone, mono_detail);
  finish(r);
  return r;
}

// ---- corruption -------------------------------------------------------------

ExperimentReport run_corruption(Workspace& ws, const fs::path& out_dir) {
  ExperimentReport r = begin_report(ws, ExperimentKind::Corruption);
  const auto& cfg = ws.config();
  const Condition conds[] = {Condition::Clean, Condition::ZeroThermal, Condition::ZeroSensor};
  std::map<ModelName, std::array<Series, 3>> f1;
  bool rf_exact = true;
  {
    auto out = open_out(out_dir / "corruption_by_seed.csv");
    out << "model,seed,f1_clean,f1_zero_thermal,f1_zero_sensor,delta_zero_thermal,"
           "delta_zero_sensor\n";
    for (auto seed : cfg.seeds) {
      for (ModelName m : kAblationModels) {
        std::array<double, 3> v{};
        for (int k = 0; k < 3; ++k) {
          CellResult cell = ws.compute_cell(make_cell("corruption", m, seed, 0.0, 1.0, conds[k]));
          v[k] = cell.metrics.macro_f1;
          f1[m][k].f1.push_back(v[k]);
          r.cells.push_back(std::move(cell));
        }
        if (m == ModelName::Forest) rf_exact = rf_exact && v[1] == v[0];
        out << model_name(m) << ',' << seed << ',' << v[0] << ',' << v[1] << ',' << v[2] << ','
            << v[1] - v[0] << ',' << v[2] - v[0] << '\n';
      }
    }
    r.artifacts["corruption_by_seed"] = "corruption_by_seed.csv";
  }

  std::vector<CorruptionRow> rows;
  for (ModelName m : kAblationModels) {
    rows.push_back({model_name(m), f1[m][0].mean(), f1[m][1].mean(), f1[m][2].mean()});
  }
  {
    auto out = open_out(out_dir / "corruption.csv");
    write_corruption_csv(out, rows);
    r.artifacts["corruption"] = "corruption.csv";
  }
  r.summary = {{"mean", to_json(std::span<const CorruptionRow>(rows))}};

  const CorruptionRow& fu = rows[3];
  add_assertion(r, "fusion_zero_thermal_drop_at_most_5pp", fu.delta_zero_thermal() >= -0.05,
                "delta " + fmt(fu.delta_zero_thermal()));
  add_assertion(r, "fusion_zero_sensor_drop_at_least_20pp", fu.delta_zero_sensor() <= -0.20,
                "delta " + fmt(fu.delta_zero_sensor()));
  add_assertion(r, "rf_zero_thermal_delta_exactly_0", rf_exact,
                rf_exact ? "identical on every seed" : "forest changed under thermal zeroing");
  finish(r);
  return r;
}

// ---- audit ------------------------------------------------------------------

namespace {

// Mean combined-map IoU of the thermal model's own predicted class on up to
// `limit` validation frames with a hotspot.
json thermal_attribution_summary(const baselines::ThermalClassifier& model, const Workspace& ws,
                                 std::size_t limit, double q) {
  std::vector<double> ious;
  for (auto i : ws.validation_indices()) {
    if (ious.size() >= limit) break;
    const ThermalFrame& frame = ws.data().thermal[i];
    if (!frame.hotspot || frame.hotspot->area() == 0) continue;
    Heatmap attn = spatial_attention_map(model, frame);
    int cls = 0;
    {
      nk::NoGradGuard guard;
      const auto p = baselines::predict_proba(model, ws.data(), std::span<const std::size_t>(&i, 1));
      cls = static_cast<int>(std::max_element(p[0].begin(), p[0].end()) - p[0].begin());
    }
    Heatmap cam = gradcam(model, frame, cls);
    ious.push_back(localization_iou(combine(attn, cam), *frame.hotspot, q));
  }
  return {{"source", "combined"},
          {"samples", ious.size()},
          {"mean_iou", mean_of(ious)},
          {"median_iou", ious.empty() ? 0.0 : quantile_of(ious, 0.5)}};
}

}  // namespace

ExperimentReport run_audit(Workspace& ws, const fs::path& out_dir) {
  ExperimentReport r = begin_report(ws, ExperimentKind::Audit);
  const auto& cfg = ws.config();
  const auto& val = ws.validation_indices();
  json per_seed = json::array();
  bool all_thermal_biased = true;
  for (auto seed : cfg.seeds) {
    auto cell_f1 = [&](ModelName m, Condition c = Condition::Clean) {
      CellResult cell = ws.compute_cell(make_cell("audit", m, seed, 0.0, 1.0, c));
      const double v = cell.metrics.macro_f1;
      r.cells.push_back(std::move(cell));
      return v;
    };
    const double f_rf = cell_f1(ModelName::Forest);
    const double f_seq = cell_f1(ModelName::Sequence);
    const double f_th = cell_f1(ModelName::Thermal);
    const double f_fu = cell_f1(ModelName::Fusion);
    CorruptionRow corr{"fusion", f_fu, cell_f1(ModelName::Fusion, Condition::ZeroThermal),
                       cell_f1(ModelName::Fusion, Condition::ZeroSensor)};

    AuditInputs in;
    in.gates = baselines::gate_values(ws.fusion(seed), ws.data(), val);
    in.f1_sensor = std::max(f_rf, f_seq);
    in.f1_thermal = f_th;
    in.f1_fusion = f_fu;
    in.sensor_attribution = shap_ranking(ws.forest(seed), ws, std::min<std::size_t>(cfg.shap_samples, 50),
                                         cfg.shap_background, seed, nullptr, nullptr);
    in.thermal_attribution = thermal_attribution_summary(ws.thermal(seed), ws, 32, cfg.iou_quantile);
    in.fusion_corruption = corr;
    const AuditReport audit = audit_protocol(in, cfg.audit);
    const GsrReport g = gsr(ws.fusion(seed), ws.data(), val);

    const std::string stem = "audit/seed" + std::to_string(seed);
    {
      auto out = open_out(out_dir / (stem + ".json"));
      out << json{{"audit", to_json(audit)}, {"gsr", to_json(g)}}.dump(2) << '\n';
      r.artifacts["audit:seed" + std::to_string(seed)] = stem + ".json";
    }
    {
      auto out = open_out(out_dir / (stem + ".txt"));
      print_audit_summary(out, audit);
    }
    if (!r.bias) r.bias = audit.bias;
    all_thermal_biased = all_thermal_biased && audit.bias.verdict == BiasVerdict::ThermalBiased;
    per_seed.push_back({{"seed", seed},
                        {"verdict", bias_verdict_name(audit.bias.verdict)},
                        {"mean_gate", audit.bias.mean_gate},
                        {"ideal_gate", audit.bias.ideal_gate},
                        {"bias", audit.bias.bias},
                        {"p_value", audit.bias.p_value},
                        {"flags", audit.flag_count()},
                        {"gsr", to_json(g)}});
  }
  r.summary = {{"per_seed", per_seed}};
  const double inflation = ws.dataset().config.thermal_variance_inflation;
  if (inflation >= 4.0) {
    add_assertion(r, "bias_verdict_thermal_biased", all_thermal_biased,
                  "thermal_variance_inflation " + fmt(inflation));
  }
  finish(r);
  return r;
}

// ---- localization -----------------------------------------------------------

ExperimentReport run_localize(Workspace& ws, const fs::path& out_dir) {
  ExperimentReport r = begin_report(ws, ExperimentKind::Localize);
  const auto& cfg = ws.config();
  const auto seed = cfg.seeds.front();
  r.cells.push_back(ws.compute_cell(make_cell("localize", ModelName::Forest, seed)));
  r.cells.push_back(ws.compute_cell(make_cell("localize", ModelName::Thermal, seed)));
  const Forest& stage1 = ws.forest(seed);
  const baselines::ThermalClassifier& stage2 = ws.thermal(seed);

  std::vector<LocalizationRecord> records;
  std::vector<double> iou_combined, iou_attention, iou_gradcam;
  std::size_t anomalous = 0, normal_predictions = 0, normal_calls = 0;
  std::size_t danger = 0, danger_in_box = 0, written = 0;
  fs::create_directories(out_dir / "heatmaps");
  for (auto i : ws.validation_indices()) {
    const auto& frame = ws.data().thermal[i];
    const auto truth = label_from_index(ws.data().labels[i]);
    const std::size_t before = stage2.forward_calls();
    const auto hm = cascade_localize(stage1, stage2, ws.data().sensors[i], frame, i);
    if (!hm) {
      ++normal_predictions;
      normal_calls += stage2.forward_calls() - before;
    }
    const bool scored = truth != LabelClass::Normal && frame.hotspot && frame.hotspot->area() > 0;
    if (!scored) continue;
    ++anomalous;
    LocalizationRecord rec;
    rec.sample_id = i;
    rec.true_class = truth;
    if (hm) {
      rec.predicted = hm->predicted;
      rec.iou = localization_iou(*hm, *frame.hotspot, cfg.iou_quantile);
      const auto [ar, ac] = hm->argmax();
      rec.argmax_in_box = frame.hotspot->contains(ar, ac);
      iou_combined.push_back(*rec.iou);
      const int cls = to_index(*hm->predicted);
      iou_attention.push_back(
          localization_iou(spatial_attention_map(stage2, frame), *frame.hotspot, cfg.iou_quantile));
      iou_gradcam.push_back(
          localization_iou(gradcam(stage2, frame, cls), *frame.hotspot, cfg.iou_quantile));
      if (truth == LabelClass::Danger) {
        ++danger;
        danger_in_box += rec.argmax_in_box ? 1 : 0;
      }
      if (written < cfg.heatmaps_written) {
        rec.file = "heatmaps/sample" + std::to_string(i) + "_" +
                   std::string(label_name(truth)) + ".pgm";
        write_pgm(out_dir / rec.file, *hm);
        ++written;
      }
    }
    records.push_back(rec);
  }
  {
    auto out = open_out(out_dir / "heatmaps/index.json");
    out << localization_index_json(records).dump(2) << '\n';
    r.artifacts["heatmap_index"] = "heatmaps/index.json";
  }

  auto median = [](const std::vector<double>& v) { return v.empty() ? 0.0 : quantile_of(v, 0.5); };
  const double med = median(iou_combined);
  const double danger_rate =
      danger > 0 ? static_cast<double>(danger_in_box) / static_cast<double>(danger) : 0.0;
  r.summary = {{"seed", seed},
               {"iou_quantile", cfg.iou_quantile},
               {"anomalous_samples", anomalous},
               {"heatmaps_emitted", iou_combined.size()},
               {"median_iou", {{"combined", med},
                               {"attention", median(iou_attention)},
                               {"gradcam", median(iou_gradcam)}}},
               {"danger_samples", danger},
               {"danger_argmax_in_box", danger_in_box},
               {"stage1_normal_predictions", normal_predictions},
               {"stage2_calls_on_normal", normal_calls}};

  add_assertion(r, "median_iou_at_least_0.5", !iou_combined.empty() && med >= 0.5,
                "median " + fmt(med) + " over " + std::to_string(iou_combined.size()) + " of " +
                    std::to_string(anomalous) + " anomalous samples");
  add_assertion(r, "danger_argmax_in_hotspot_at_least_80pct", danger > 0 && danger_rate >= 0.8,
                std::to_string(danger_in_box) + "/" + std::to_string(danger));
  add_assertion(r, "stage2_never_called_on_normal", normal_calls == 0,
                std::to_string(normal_calls) + " calls over " +
                    std::to_string(normal_predictions) + " Normal predictions");
  finish(r);
  return r;
}

// ---- SHAP -------------------------------------------------------------------

ExperimentReport run_shap(Workspace& ws, const fs::path& out_dir) {
  ExperimentReport r = begin_report(ws, ExperimentKind::Shap);
  const auto& cfg = ws.config();
  const auto seed = cfg.seeds.front();
  r.cells.push_back(ws.compute_cell(make_cell("shap", ModelName::Forest, seed)));
  const Forest& forest = ws.forest(seed);

  std::vector<AttributionReport> reports;
  std::vector<std::size_t> explained;
  const auto ranking = shap_ranking(forest, ws, cfg.shap_samples, cfg.shap_background, seed,
                                    &reports, &explained);

  double max_error = 0.0;
  std::vector<ClassVector> mean_abs(forest.n_features, ClassVector{});
  for (const auto& rep : reports) {
    for (int c = 0; c < kNumClasses; ++c) {
      max_error = std::max(max_error, std::abs(rep.reconstructed(c) - rep.prediction[c]));
    }
    for (std::size_t f = 0; f < rep.phi.size(); ++f) {
      for (int c = 0; c < kNumClasses; ++c) {
        mean_abs[f][c] += std::abs(rep.phi[f][c]) / static_cast<double>(reports.size());
      }
    }
  }
  {
    auto out = open_out(out_dir / "shap/mean_abs_phi.csv");
    out << "feature,class,mean_abs_phi\n";
    for (std::size_t f = 0; f < mean_abs.size(); ++f) {
      for (int c = 0; c < kNumClasses; ++c) {
        out << reports.front().feature_names[f] << ','
            << label_name(static_cast<LabelClass>(c)) << ',' << mean_abs[f][c] << '\n';
      }
    }
    r.artifacts["shap_mean_abs_phi"] = "shap/mean_abs_phi.csv";
  }
  {
    auto out = open_out(out_dir / "shap/sensor_ranking.csv");
    out << "rank,channel,importance\n";
    for (std::size_t k = 0; k < ranking.size(); ++k) {
      out << k + 1 << ',' << ranking[k].channel << ',' << ranking[k].importance << '\n';
    }
    r.artifacts["shap_sensor_ranking"] = "shap/sensor_ranking.csv";
  }
  {
    const std::string rel = "shap/sample" + std::to_string(explained.front()) + ".csv";
    auto out = open_out(out_dir / rel);
    write_attribution_csv(out, reports.front());
    r.artifacts["shap_example"] = rel;
    auto js = open_out(out_dir / "shap/example_summary.json");
    js << attribution_summary_json(reports.front(), aggregate_by_sensor(reports.front(), ws.dataset().channel_names)).dump(2) << '\n';
    r.artifacts["shap_example_summary"] = "shap/example_summary.json";
  }
  r.summary = {{"seed", seed},
               {"explained", reports.size()},
               {"background", std::min(cfg.shap_background, ws.train_indices().size())},
               {"ranking", ranking_json(ranking)},
               {"max_local_accuracy_error", max_error}};

  const std::string designated = ws.dataset().channel_names.front();
  add_assertion(r, "designated_channel_ranks_first", ranking.front().channel == designated,
                "top " + ranking.front().channel + " (" + fmt(ranking.front().importance) +
                    "), designated " + designated);
  finish(r);
  return r;
}

ExperimentReport run_experiment(Workspace& ws, const fs::path& out_dir) {
  switch (ws.config().experiment) {
    case ExperimentKind::Ablation: return run_ablation(ws, out_dir);
    case ExperimentKind::NoiseSweep: return run_noise_sweep(ws, out_dir);
    case ExperimentKind::LearningCurve: return run_learning_curve(ws, out_dir);
    case ExperimentKind::Corruption: return run_corruption(ws, out_dir);
    case ExperimentKind::Audit: return run_audit(ws, out_dir);
    case ExperimentKind::Localize: return run_localize(ws, out_dir);
    case ExperimentKind::Shap: return run_shap(ws, out_dir);
  }
  throw InvalidArgument("unknown experiment");
}

}  // namespace cascade::experiments
