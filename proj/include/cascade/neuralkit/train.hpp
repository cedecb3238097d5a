#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "cascade/common/error.hpp"
#include "cascade/neuralkit/optim.hpp"

namespace cascade::nk {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  // Cosine horizon in epochs; 0 means max_epochs.
  std::size_t cosine_horizon = 0;
  AdamWConfig optimizer;
  std::uint64_t seed = 42;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

// Raised when a minibatch loss is NaN or infinite.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch, double loss);
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

// Mean loss over the given training indices; recorded graph expected.
using BatchLoss = std::function<Tensor(std::span<const std::size_t> batch, Rng& rng)>;
// Validation loss of the current parameters (called in no-grad mode).
using ValidationLoss = std::function<double()>;

// One AdamW update on a batch. Returns the loss value.
double train_step(AdamW& optimizer, const Tensor& loss);

// Minibatch training with per-epoch cosine lr, early stopping on the
// validation loss and restoration of the best parameters.
TrainingHistory fit(const ParameterList& params, std::size_t n_train, const BatchLoss& batch_loss,
                    const ValidationLoss& validation_loss, const TrainConfig& config);

void write_training_curve(const std::filesystem::path& path, const TrainingHistory& history);

}  // namespace cascade::nk
