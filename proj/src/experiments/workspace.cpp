#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include "cascade/common/error.hpp"
#include "cascade/core/dataset_io.hpp"
#include "cascade/core/generator.hpp"
#include "cascade/experiments/experiments.hpp"

namespace cascade::experiments {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<ClassVector> forest_proba(const Forest& f, const FeatureMatrix& X,
                                      std::vector<int>& pred) {
  pred.clear();
  std::vector<ClassVector> prob;
  prob.reserve(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) {
    pred.push_back(to_index(f.predict(X.row(i))));
    prob.push_back(f.predict_proba(X.row(i)));
  }
  return prob;
}

}  // namespace

Workspace::Workspace(ExperimentConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.dataset_path) {
    dataset_ = load_dataset(*config_.dataset_path);
  } else {
    dataset_ = generate_dataset(config_.generator);
  }
  norm_ = baselines::fit_normalization(dataset_);
  data_ = baselines::prepare(dataset_, norm_);
  train_ = dataset_.indices(Split::Train);
  val_ = dataset_.indices(Split::Validation);
  if (train_.empty() || val_.empty()) throw InvalidArgument("dataset needs both splits");
  for (auto i : val_) val_labels_.push_back(data_.labels[i]);
  features_ = extract_statistical(data_.sensors);
}

Workspace::Key Workspace::key(std::uint64_t seed, double fraction) {
  return {seed, std::llround(fraction * 1e6)};
}

baselines::TrainOptions Workspace::train_options(std::uint64_t seed) const {
  baselines::TrainOptions o;
  o.train = config_.train;
  o.train.seed = seed;
  o.augment.enabled = config_.augment;
  return o;
}

std::vector<std::size_t> Workspace::training_subset(double fraction, std::uint64_t seed) const {
  if (fraction >= 1.0) return train_;
  std::vector<std::size_t> out;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (auto i : train_) {
      if (data_.labels[i] == c) members.push_back(i);
    }
    if (members.empty()) continue;
    Rng rng = make_rng(seed, 0x5ab5e7ULL << 8 | static_cast<std::uint64_t>(c));
    std::shuffle(members.begin(), members.end(), rng);
    // At least one per class so balanced class weights stay defined.
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size()))));
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(out.begin(), out.end());
  return out;
}

const Forest& Workspace::forest(std::uint64_t seed, double fraction) {
  auto& slot = forests_[key(seed, fraction)];
  if (!slot) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = training_subset(fraction, seed);
    std::vector<LabelClass> y;
    for (auto i : rows) y.push_back(label_from_index(data_.labels[i]));
    ForestConfig fc = config_.forest;
    fc.seed = seed;
    slot = std::make_shared<Forest>(fit_forest(features_.select_rows(rows), y, fc));
    std::clog << "[train] rf seed=" << seed << " fraction=" << fraction << " ("
              << seconds_since(t0) << " s)\n";
  }
  return *slot;
}

namespace {

template <class M, class Make>
void train_into(M& slot_model, nk::TrainingHistory& history, double& seconds, Make make,
                const baselines::PreparedData& data, const std::vector<std::size_t>& train,
                const std::vector<std::size_t>& val, const baselines::TrainOptions& options,
                const char* name, std::uint64_t seed, double fraction) {
  const auto t0 = std::chrono::steady_clock::now();
  auto model = make();
  history = baselines::train_model(*model, data, train, val, options);
  slot_model = std::move(model);  // only cached once training succeeded
  seconds = seconds_since(t0);
  std::clog << "[train] " << name << " seed=" << seed << " fraction=" << fraction
            << " epochs=" << history.epochs.size() << " best=" << history.best_epoch << " ("
            << seconds << " s)\n";
}

}  // namespace

std::shared_ptr<const baselines::SequenceClassifier> Workspace::sequence_ptr(std::uint64_t seed,
                                                                             double fraction) {
  auto& slot = sequences_[key(seed, fraction)];
  if (!slot.model) {
    const auto channels = static_cast<std::size_t>(data_.sensors.front().channels);
    train_into(
        slot.model, slot.history, slot.seconds,
        [&] {
          return std::make_shared<baselines::SequenceClassifier>(
              channels, baselines::SequenceClassifier::Config{}, seed);
        },
        data_, training_subset(fraction, seed), val_, train_options(seed), "sequence", seed,
        fraction);
  }
  return slot.model;
}

std::shared_ptr<const baselines::ThermalClassifier> Workspace::thermal_ptr(std::uint64_t seed,
                                                                           double fraction) {
  auto& slot = thermals_[key(seed, fraction)];
  if (!slot.model) {
    train_into(
        slot.model, slot.history, slot.seconds,
        [&] {
          return std::make_shared<baselines::ThermalClassifier>(
              baselines::ThermalClassifier::Config{}, seed);
        },
        data_, training_subset(fraction, seed), val_, train_options(seed), "thermal", seed,
        fraction);
  }
  return slot.model;
}

const baselines::SequenceClassifier& Workspace::sequence(std::uint64_t seed, double fraction) {
  return *sequence_ptr(seed, fraction);
}

const baselines::ThermalClassifier& Workspace::thermal(std::uint64_t seed, double fraction) {
  return *thermal_ptr(seed, fraction);
}

const baselines::FusionModel& Workspace::fusion(std::uint64_t seed, double fraction) {
  auto& slot = fusions_[key(seed, fraction)];
  if (!slot.model) {
    const auto channels = static_cast<std::size_t>(data_.sensors.front().channels);
    train_into(
        slot.model, slot.history, slot.seconds,
        [&] {
          return std::make_shared<baselines::FusionModel>(channels,
                                                          baselines::FusionModel::Config{}, seed);
        },
        data_, training_subset(fraction, seed), val_, train_options(seed), "fusion", seed,
        fraction);
  }
  return *slot.model;
}

const nk::TrainingHistory* Workspace::history(ModelName model, std::uint64_t seed,
                                              double fraction) const {
  const Key k = key(seed, fraction);
  switch (model) {
    case ModelName::Sequence:
      if (auto it = sequences_.find(k); it != sequences_.end() && it->second.model) {
        return &it->second.history;
      }
      break;
    case ModelName::Thermal:
      if (auto it = thermals_.find(k); it != thermals_.end() && it->second.model) {
        return &it->second.history;
      }
      break;
    case ModelName::Fusion:
      if (auto it = fusions_.find(k); it != fusions_.end() && it->second.model) {
        return &it->second.history;
      }
      break;
    default:
      break;
  }
  return nullptr;
}

std::optional<TrainingSummary> Workspace::training_summary(ModelName model, std::uint64_t seed,
                                                           double fraction) const {
  const nk::TrainingHistory* h = history(model, seed, fraction);
  if (!h) return std::nullopt;
  double seconds = 0.0;
  const Key k = key(seed, fraction);
  if (model == ModelName::Sequence) seconds = sequences_.at(k).seconds;
  if (model == ModelName::Thermal) seconds = thermals_.at(k).seconds;
  if (model == ModelName::Fusion) seconds = fusions_.at(k).seconds;
  return TrainingSummary{h->epochs.size(), h->best_epoch, h->stopped_early, seconds};
}

const baselines::PreparedData& Workspace::evaluation_data(double sigma, std::uint64_t seed) {
  if (sigma == 0.0) return data_;
  auto& slot = noisy_[key(seed, sigma)];
  if (slot.size() == 0) slot = baselines::with_sensor_noise(data_, sigma, seed);
  return slot;
}

CellResult Workspace::compute_cell(const CellSpec& spec) {
  if (spec.sigma < 0.0) throw InvalidArgument("cell sigma must be >= 0");
  if (spec.fraction <= 0.0 || spec.fraction > 1.0) {
    throw InvalidArgument("cell fraction must lie in (0, 1]");
  }
  const baselines::PreparedData& base = evaluation_data(spec.sigma, spec.seed);
  baselines::PreparedData corrupted;
  const baselines::PreparedData* eval = &base;
  if (spec.condition != Condition::Clean) {
    corrupted = baselines::corrupt(base, spec.condition == Condition::ZeroThermal
                                             ? Modality::Thermal
                                             : Modality::Sensor);
    eval = &corrupted;
  }

  std::vector<int> pred;
  std::vector<ClassVector> prob;
  try {
    switch (spec.model) {
      case ModelName::Forest: {
        const Forest& f = forest(spec.seed, spec.fraction);
        if (eval == &data_) {
          prob = forest_proba(f, features_.select_rows(val_), pred);
        } else {
          std::vector<SensorWindow> windows;
          windows.reserve(val_.size());
          for (auto i : val_) windows.push_back(eval->sensors[i]);
          prob = forest_proba(f, extract_statistical(windows), pred);
        }
        break;
      }
      case ModelName::Sequence:
        prob = baselines::predict_proba(sequence(spec.seed, spec.fraction), *eval, val_);
        break;
      case ModelName::Thermal:
        prob = baselines::predict_proba(thermal(spec.seed, spec.fraction), *eval, val_);
        break;
      case ModelName::Fusion:
        prob = baselines::predict_proba(fusion(spec.seed, spec.fraction), *eval, val_);
        break;
      case ModelName::LateFusion: {
        baselines::LateFusion late(sequence_ptr(spec.seed, spec.fraction),
                                   thermal_ptr(spec.seed, spec.fraction));
        prob = late.predict_proba(*eval, val_);
        break;
      }
    }
  } catch (const nk::TrainingDiverged& e) {
    CellResult failed;
    failed.spec = spec;
    failed.failure = e.what();
    std::clog << "[fail] " << spec.id << ": " << e.what() << '\n';
    return failed;
  }
  if (spec.model != ModelName::Forest) pred = baselines::argmax_labels(prob);

  CellResult r;
  r.spec = spec;
  r.metrics = compute_metrics(val_labels_, pred, prob);
  r.training = training_summary(spec.model, spec.seed, spec.fraction);
  return r;
}

std::string metrics_csv(const CellResult& cell) {
  std::ostringstream out;
  write_metrics_csv_header(out);
  write_metrics_csv_row(out, cell.spec.id, cell.metrics);
  return out.str();
}

}  // namespace cascade::experiments
