#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cascade/baselines/data.hpp"
#include "cascade/neuralkit/layers.hpp"
#include "cascade/neuralkit/train.hpp"

namespace cascade::baselines {

inline constexpr double kDefaultDropout = 0.3;

enum class ModelKind { Sequence, Thermal, Fusion };
std::string model_kind_name(ModelKind kind);

struct Batch {
  nk::Tensor sensors;  // undefined when the model ignores sensors
  nk::Tensor thermal;  // undefined when the model ignores thermal frames
};

// Gated recurrent encoder followed by additive temporal attention:
//   e_t = w_a^T tanh(W_h h_t + b_h), alpha = softmax(e), c_s = sum_t alpha_t h_t
class SequenceEncoder {
 public:
  struct Config {
    std::size_t hidden = 32;
    std::size_t attention_dim = 16;
  };
  struct Output {
    nk::Tensor states;   // [N, T, hidden]
    nk::Tensor alpha;    // [N, T]
    nk::Tensor context;  // [N, hidden]
  };

  SequenceEncoder() = default;
  SequenceEncoder(std::size_t channels, Config config, Rng& rng);

  Output forward(const nk::Tensor& x) const;
  void collect(nk::ParameterList& out) const;
  std::size_t output_dim() const { return config_.hidden; }

  // Attention scorer parameters, exposed for diagnostics and tests.
  nk::Dense& score_hidden() { return score_hidden_; }
  nk::Dense& score_out() { return score_out_; }

 private:
  Config config_;
  nk::Gru gru_;
  nk::Dense score_hidden_;  // W_h, b_h
  nk::Dense score_out_;     // w_a (bias held at zero)
};

// Three stride-2 3x3 convolutions with ReLU, then a 1x1 spatial attention
// map A = sigmoid(conv(F)), F' = A * F and c_t = GlobalAvgPool(F').
class ThermalEncoder {
 public:
  struct Config {
    std::vector<std::size_t> channels{8, 16, 32};
    std::size_t stride = 2;
  };
  struct Output {
    nk::Tensor features;  // F  [N, C, H', W'] (after the last ReLU)
    nk::Tensor attention; // A  [N, 1, H', W']
    nk::Tensor context;   // c_t [N, C]
  };

  ThermalEncoder() = default;
  ThermalEncoder(Config config, Rng& rng);

  Output forward(const nk::Tensor& x) const;
  void collect(nk::ParameterList& out) const;
  std::size_t output_dim() const { return config_.channels.back(); }

 private:
  Config config_;
  std::vector<nk::Conv2d> convs_;
  nk::Conv2d attention_;
};

class NeuralModel {
 public:
  virtual ~NeuralModel() = default;
  virtual ModelKind kind() const = 0;
  virtual bool uses_sensors() const = 0;
  virtual bool uses_thermal() const = 0;
  virtual nk::Tensor logits(const Batch& batch, bool training, Rng& rng) const = 0;
  virtual nk::ParameterList parameters() const = 0;
};

class SequenceClassifier : public NeuralModel {
 public:
  struct Config {
    SequenceEncoder::Config encoder;
    double dropout = kDefaultDropout;
  };

  SequenceClassifier(std::size_t channels, Config config, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::Sequence; }
  bool uses_sensors() const override { return true; }
  bool uses_thermal() const override { return false; }
  nk::Tensor logits(const Batch& batch, bool training, Rng& rng) const override;
  nk::ParameterList parameters() const override;

  SequenceEncoder& encoder() { return encoder_; }
  const SequenceEncoder& encoder() const { return encoder_; }

 private:
  Config config_;
  SequenceEncoder encoder_;
  nk::Dense head_;
};

class ThermalClassifier : public NeuralModel {
 public:
  struct Config {
    ThermalEncoder::Config encoder;
    double dropout = kDefaultDropout;
  };
  struct Forward {
    ThermalEncoder::Output encoder;
    nk::Tensor logits;
  };

  ThermalClassifier(Config config, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::Thermal; }
  bool uses_sensors() const override { return false; }
  bool uses_thermal() const override { return true; }
  nk::Tensor logits(const Batch& batch, bool training, Rng& rng) const override;
  nk::ParameterList parameters() const override;

  // Full forward pass with intermediate maps (evaluation mode).
  Forward forward(const nk::Tensor& thermal) const;

  // Number of forward passes run so far; used to prove the cascade skips
  // Stage 2 on Normal predictions.
  std::size_t forward_calls() const { return forward_calls_; }

 private:
  Config config_;
  ThermalEncoder encoder_;
  nk::Dense head_;
  mutable std::size_t forward_calls_ = 0;
};

// Both encoders, single-head cross-attention in each direction over the
// pooled contexts, and a sigmoid gate:
//   c_s' = Attn(c_s, c_t, c_t), c_t' = Attn(c_t, c_s, c_s)
//   g = sigmoid(W_g [c_s'; c_t'] + b_g), fused = g c_t' + (1 - g) c_s'
// With one key per query the attention weight is exactly 1, so each
// attended context is the value projection of the other modality.
class FusionModel : public NeuralModel {
 public:
  struct Config {
    SequenceEncoder::Config sequence;
    ThermalEncoder::Config thermal;
    std::size_t attention_dim = 32;
    bool vector_gate = false;  // one gate per fused dimension
    double dropout = kDefaultDropout;
  };
  struct Forward {
    SequenceEncoder::Output sensor;
    ThermalEncoder::Output thermal;
    nk::Tensor sensor_attended;   // c_s'
    nk::Tensor thermal_attended;  // c_t'
    nk::Tensor gate;              // [N, 1] or [N, attention_dim]
    nk::Tensor fused;
    nk::Tensor logits;
  };

  FusionModel(std::size_t channels, Config config, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::Fusion; }
  bool uses_sensors() const override { return true; }
  bool uses_thermal() const override { return true; }
  nk::Tensor logits(const Batch& batch, bool training, Rng& rng) const override;
  nk::ParameterList parameters() const override;

  Forward forward(const Batch& batch, bool training, Rng& rng) const;

  // Diagnostic hook: replaces the learned gate with a constant.
  void set_gate_override(std::optional<double> g) { gate_override_ = g; }
  const Config& config() const { return config_; }

  nk::ParameterList sensor_encoder_parameters() const;
  nk::ParameterList thermal_encoder_parameters() const;
  nk::Dense& gate_layer() { return gate_; }

 private:
  Config config_;
  SequenceEncoder sensor_;
  ThermalEncoder thermal_;
  nk::Dense sq_, sk_, sv_;  // sensor queries thermal
  nk::Dense tq_, tk_, tv_;  // thermal queries sensor
  nk::Dense gate_;
  nk::Dense head_;
  std::optional<double> gate_override_;
};

inline AugmentOptions training_augmentation() {
  AugmentOptions a;
  a.enabled = true;
  return a;
}

struct TrainOptions {
  nk::TrainConfig train;
  AugmentOptions augment = training_augmentation();
};

// Minibatch cross-entropy training with early stopping on validation loss.
nk::TrainingHistory train_model(NeuralModel& model, const PreparedData& data,
                                std::span<const std::size_t> train_idx,
                                std::span<const std::size_t> val_idx, const TrainOptions& options);

Batch make_batch(const NeuralModel& model, const PreparedData& data,
                 std::span<const std::size_t> idx, const AugmentOptions& augment = {},
                 Rng* rng = nullptr);

// Evaluation-mode class probabilities.
std::vector<ClassVector> predict_proba(const NeuralModel& model, const PreparedData& data,
                                       std::span<const std::size_t> idx);
double evaluation_loss(const NeuralModel& model, const PreparedData& data,
                       std::span<const std::size_t> idx);

// Temporal attention distribution for one z-scored window.
std::vector<double> attention_weights(const SequenceClassifier& model, const SensorWindow& window);
// Per-sample scalar gate (mean over dimensions for the vector variant).
std::vector<double> gate_values(const FusionModel& model, const PreparedData& data,
                                std::span<const std::size_t> idx);

// Unweighted mean of the members' class probabilities.
class LateFusion {
 public:
  LateFusion(std::shared_ptr<const SequenceClassifier> sequence,
             std::shared_ptr<const ThermalClassifier> thermal);
  std::vector<ClassVector> predict_proba(const PreparedData& data,
                                         std::span<const std::size_t> idx) const;

 private:
  std::shared_ptr<const SequenceClassifier> sequence_;
  std::shared_ptr<const ThermalClassifier> thermal_;
};

std::vector<int> argmax_labels(std::span<const ClassVector> probs);

}  // namespace cascade::baselines
