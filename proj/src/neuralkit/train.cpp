#include "cascade/neuralkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cascade::nk {

TrainingDiverged::TrainingDiverged(std::size_t epoch, std::size_t batch, double loss)
    : Error("training diverged: loss " + std::to_string(loss) + " at epoch " +
            std::to_string(epoch) + ", batch " + std::to_string(batch)),
      epoch_(epoch),
      batch_(batch) {}

double train_step(AdamW& optimizer, const Tensor& loss) {
  double value = loss.item();
  optimizer.zero_grad();
  loss.backward();
  optimizer.step();
  return value;
}

namespace {

std::vector<std::vector<double>> snapshot(const ParameterList& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void restore(const ParameterList& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    std::copy(values[i].begin(), values[i].end(), t.values().begin());
  }
}

}  // namespace

TrainingHistory fit(const ParameterList& params, std::size_t n_train, const BatchLoss& batch_loss,
                    const ValidationLoss& validation_loss, const TrainConfig& config) {
  if (n_train == 0) throw InvalidArgument("fit: empty training set");
  if (config.batch_size == 0) throw InvalidArgument("fit: batch size must be positive");
  AdamW optimizer(params, config.optimizer);
  Rng rng = make_rng(config.seed, 0x7a11);
  const double horizon =
      static_cast<double>(config.cosine_horizon == 0 ? config.max_epochs : config.cosine_horizon);

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  TrainingHistory history;
  history.best_val_loss = INFINITY;
  auto best = snapshot(params);
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    double lr = cosine_lr(config.optimizer.lr, static_cast<double>(epoch), horizon);
    optimizer.set_lr(lr);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n_train; start += config.batch_size, ++batch_index) {
      std::size_t stop = std::min(n_train, start + config.batch_size);
      std::span<const std::size_t> batch(order.data() + start, stop - start);
      Tensor loss = batch_loss(batch, rng);
      if (!std::isfinite(loss.item())) throw TrainingDiverged(epoch, batch_index, loss.item());
      total += train_step(optimizer, loss) * static_cast<double>(batch.size());
    }
    double val;
    {
      NoGradGuard guard;
      val = validation_loss();
    }
    if (!std::isfinite(val)) throw TrainingDiverged(epoch, batch_index, val);
    history.epochs.push_back({epoch, total / static_cast<double>(n_train), val, lr});
    if (val < history.best_val_loss) {
      history.best_val_loss = val;
      history.best_epoch = epoch;
      best = snapshot(params);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      history.stopped_early = true;
      break;
    }
  }
  restore(params, best);
  zero_grads(params);
  return history;
}

void write_training_curve(const std::filesystem::path& path, const TrainingHistory& history) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << '\n';
  }
}

}  // namespace cascade::nk
