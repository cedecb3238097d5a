#include "cascade/baselines/models.hpp"

#include <algorithm>

#include "cascade/common/error.hpp"
#include "cascade/neuralkit/ops.hpp"

namespace cascade::baselines {

using nk::Tensor;

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Sequence: return "sequence";
    case ModelKind::Thermal: return "thermal";
    case ModelKind::Fusion: return "fusion";
  }
  return "unknown";
}

SequenceEncoder::SequenceEncoder(std::size_t channels, Config config, Rng& rng)
    : config_(config),
      gru_(channels, config.hidden, rng, "seq.gru"),
      score_hidden_(config.hidden, config.attention_dim, rng, "seq.attn_hidden"),
      score_out_(config.attention_dim, 1, rng, "seq.attn_out") {
  std::fill(score_out_.bias.values().begin(), score_out_.bias.values().end(), 0.0);
}

SequenceEncoder::Output SequenceEncoder::forward(const Tensor& x) const {
  Tensor h = gru_.forward(x);
  std::size_t n = h.dim(0), t = h.dim(1);
  Tensor flat = nk::reshape(h, {n * t, config_.hidden});
  Tensor e = nk::linear(nk::tanh(score_hidden_.forward(flat)), score_out_.weight);
  Tensor alpha = nk::softmax(nk::reshape(e, {n, t}));
  return {h, alpha, nk::weighted_sum_steps(alpha, h)};
}

void SequenceEncoder::collect(nk::ParameterList& out) const {
  gru_.collect(out);
  score_hidden_.collect(out);
  out.push_back({score_out_.name + ".weight", score_out_.weight});
}

ThermalEncoder::ThermalEncoder(Config config, Rng& rng) : config_(std::move(config)) {
  if (config_.channels.empty()) throw InvalidArgument("thermal encoder needs conv layers");
  std::size_t in = 1;
  for (std::size_t i = 0; i < config_.channels.size(); ++i) {
    convs_.emplace_back(in, config_.channels[i], 3, nk::Conv2dOptions{config_.stride, 1}, rng,
                        "thermal.conv" + std::to_string(i + 1));
    in = config_.channels[i];
  }
  attention_ = nk::Conv2d(in, 1, 1, {1, 0}, rng, "thermal.spatial_attn");
}

ThermalEncoder::Output ThermalEncoder::forward(const Tensor& x) const {
  Tensor f = x;
  for (const auto& conv : convs_) f = nk::relu(conv.forward(f));
  Tensor a = nk::sigmoid(attention_.forward(f));
  Tensor c = nk::global_avg_pool(nk::spatial_gate(a, f));
  return {f, a, c};
}

void ThermalEncoder::collect(nk::ParameterList& out) const {
  for (const auto& conv : convs_) conv.collect(out);
  attention_.collect(out);
}

SequenceClassifier::SequenceClassifier(std::size_t channels, Config config, std::uint64_t seed)
    : config_(config) {
  Rng rng = make_rng(seed, 0x5e0);
  encoder_ = SequenceEncoder(channels, config.encoder, rng);
  head_ = nk::Dense(encoder_.output_dim(), kNumClasses, rng, "seq.head");
}

Tensor SequenceClassifier::logits(const Batch& batch, bool training, Rng& rng) const {
  auto enc = encoder_.forward(batch.sensors);
  return head_.forward(nk::dropout(enc.context, config_.dropout, rng, training));
}

nk::ParameterList SequenceClassifier::parameters() const {
  nk::ParameterList p;
  encoder_.collect(p);
  head_.collect(p);
  return p;
}

ThermalClassifier::ThermalClassifier(Config config, std::uint64_t seed) : config_(config) {
  Rng rng = make_rng(seed, 0x7e0);
  encoder_ = ThermalEncoder(config.encoder, rng);
  head_ = nk::Dense(encoder_.output_dim(), kNumClasses, rng, "thermal.head");
}

Tensor ThermalClassifier::logits(const Batch& batch, bool training, Rng& rng) const {
  ++forward_calls_;
  auto enc = encoder_.forward(batch.thermal);
  return head_.forward(nk::dropout(enc.context, config_.dropout, rng, training));
}

ThermalClassifier::Forward ThermalClassifier::forward(const Tensor& thermal) const {
  ++forward_calls_;
  auto enc = encoder_.forward(thermal);
  Tensor logits = head_.forward(enc.context);
  return {enc, logits};
}

nk::ParameterList ThermalClassifier::parameters() const {
  nk::ParameterList p;
  encoder_.collect(p);
  head_.collect(p);
  return p;
}

FusionModel::FusionModel(std::size_t channels, Config config, std::uint64_t seed)
    : config_(config) {
  Rng rng = make_rng(seed, 0xf0);
  sensor_ = SequenceEncoder(channels, config.sequence, rng);
  thermal_ = ThermalEncoder(config.thermal, rng);
  const std::size_t ds = sensor_.output_dim(), dt = thermal_.output_dim(), d = config.attention_dim;
  sq_ = nk::Dense(ds, d, rng, "fusion.s_query");
  sk_ = nk::Dense(dt, d, rng, "fusion.s_key");
  sv_ = nk::Dense(dt, d, rng, "fusion.s_value");
  tq_ = nk::Dense(dt, d, rng, "fusion.t_query");
  tk_ = nk::Dense(ds, d, rng, "fusion.t_key");
  tv_ = nk::Dense(ds, d, rng, "fusion.t_value");
  gate_ = nk::Dense(2 * d, config.vector_gate ? d : 1, rng, "fusion.gate");
  head_ = nk::Dense(d, kNumClasses, rng, "fusion.head");
}

FusionModel::Forward FusionModel::forward(const Batch& batch, bool training, Rng& rng) const {
  Forward out;
  out.sensor = sensor_.forward(batch.sensors);
  out.thermal = thermal_.forward(batch.thermal);
  const Tensor& cs = out.sensor.context;
  const Tensor& ct = out.thermal.context;
  const std::size_t n = cs.dim(0), d = config_.attention_dim;
  auto tokens = [n, d](const Tensor& t) { return nk::reshape(t, {n, 1, d}); };
  out.sensor_attended = nk::reshape(
      nk::attention(tokens(sq_.forward(cs)), tokens(sk_.forward(ct)), tokens(sv_.forward(ct))),
      {n, d});
  out.thermal_attended = nk::reshape(
      nk::attention(tokens(tq_.forward(ct)), tokens(tk_.forward(cs)), tokens(tv_.forward(cs))),
      {n, d});
  const std::size_t gate_width = config_.vector_gate ? d : 1;
  if (gate_override_) {
    out.gate = Tensor::full({n, gate_width}, *gate_override_);
  } else {
    out.gate = nk::sigmoid(
        gate_.forward(nk::concat_cols(out.sensor_attended, out.thermal_attended)));
  }
  if (config_.vector_gate) {
    out.fused = nk::add(nk::mul(out.gate, out.thermal_attended),
                        nk::mul(nk::one_minus(out.gate), out.sensor_attended));
  } else {
    out.fused = nk::add(nk::mul_col(out.gate, out.thermal_attended),
                        nk::mul_col(nk::one_minus(out.gate), out.sensor_attended));
  }
  out.logits = head_.forward(nk::dropout(out.fused, config_.dropout, rng, training));
  return out;
}

Tensor FusionModel::logits(const Batch& batch, bool training, Rng& rng) const {
  return forward(batch, training, rng).logits;
}

nk::ParameterList FusionModel::sensor_encoder_parameters() const {
  nk::ParameterList p;
  sensor_.collect(p);
  return p;
}

nk::ParameterList FusionModel::thermal_encoder_parameters() const {
  nk::ParameterList p;
  thermal_.collect(p);
  return p;
}

nk::ParameterList FusionModel::parameters() const {
  nk::ParameterList p;
  sensor_.collect(p);
  thermal_.collect(p);
  for (const nk::Dense* l : {&sq_, &sk_, &sv_, &tq_, &tk_, &tv_, &gate_, &head_}) l->collect(p);
  return p;
}

Batch make_batch(const NeuralModel& model, const PreparedData& data,
                 std::span<const std::size_t> idx, const AugmentOptions& augment, Rng* rng) {
  Batch b;
  if (model.uses_sensors()) b.sensors = sensor_batch(data, idx, augment, rng);
  if (model.uses_thermal()) b.thermal = thermal_batch(data, idx, augment, rng);
  return b;
}

namespace {
constexpr std::size_t kEvalBatch = 64;
}

nk::TrainingHistory train_model(NeuralModel& model, const PreparedData& data,
                                std::span<const std::size_t> train_idx,
                                std::span<const std::size_t> val_idx, const TrainOptions& options) {
  if (train_idx.empty() || val_idx.empty()) throw InvalidArgument("train_model: empty split");
  std::vector<std::size_t> train(train_idx.begin(), train_idx.end());
  auto batch_loss = [&](std::span<const std::size_t> batch, Rng& rng) {
    std::vector<std::size_t> rows;
    rows.reserve(batch.size());
    for (std::size_t b : batch) rows.push_back(train[b]);
    Batch input = make_batch(model, data, rows, options.augment, &rng);
    auto y = label_batch(data, rows);
    return nk::cross_entropy(model.logits(input, true, rng), y);
  };
  auto val_loss = [&] { return evaluation_loss(model, data, val_idx); };
  return nk::fit(model.parameters(), train.size(), batch_loss, val_loss, options.train);
}

std::vector<ClassVector> predict_proba(const NeuralModel& model, const PreparedData& data,
                                       std::span<const std::size_t> idx) {
  nk::NoGradGuard guard;
  Rng unused(0);
  std::vector<ClassVector> out;
  out.reserve(idx.size());
  for (std::size_t start = 0; start < idx.size(); start += kEvalBatch) {
    auto rows = idx.subspan(start, std::min(kEvalBatch, idx.size() - start));
    auto probs = nk::softmax_rows(model.logits(make_batch(model, data, rows), false, unused));
    for (const auto& p : probs) {
      ClassVector c{};
      std::copy_n(p.begin(), kNumClasses, c.begin());
      out.push_back(c);
    }
  }
  return out;
}

double evaluation_loss(const NeuralModel& model, const PreparedData& data,
                       std::span<const std::size_t> idx) {
  nk::NoGradGuard guard;
  Rng unused(0);
  double total = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += kEvalBatch) {
    auto rows = idx.subspan(start, std::min(kEvalBatch, idx.size() - start));
    auto y = label_batch(data, rows);
    Tensor loss = nk::cross_entropy(model.logits(make_batch(model, data, rows), false, unused), y);
    total += loss.item() * static_cast<double>(rows.size());
  }
  return total / static_cast<double>(idx.size());
}

std::vector<double> attention_weights(const SequenceClassifier& model, const SensorWindow& window) {
  nk::NoGradGuard guard;
  Tensor x = Tensor::from(
      {1, static_cast<std::size_t>(window.timesteps), static_cast<std::size_t>(window.channels)},
      window.values);
  auto alpha = model.encoder().forward(x).alpha;
  return {alpha.values().begin(), alpha.values().end()};
}

std::vector<double> gate_values(const FusionModel& model, const PreparedData& data,
                                std::span<const std::size_t> idx) {
  nk::NoGradGuard guard;
  Rng unused(0);
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t start = 0; start < idx.size(); start += kEvalBatch) {
    auto rows = idx.subspan(start, std::min(kEvalBatch, idx.size() - start));
    Tensor g = model.forward(make_batch(model, data, rows), false, unused).gate;
    const std::size_t width = g.dim(1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < width; ++j) s += g.values()[i * width + j];
      out.push_back(s / static_cast<double>(width));
    }
  }
  return out;
}

LateFusion::LateFusion(std::shared_ptr<const SequenceClassifier> sequence,
                       std::shared_ptr<const ThermalClassifier> thermal)
    : sequence_(std::move(sequence)), thermal_(std::move(thermal)) {
  if (!sequence_ || !thermal_) throw InvalidArgument("late fusion needs both members");
}

std::vector<ClassVector> LateFusion::predict_proba(const PreparedData& data,
                                                   std::span<const std::size_t> idx) const {
  auto a = baselines::predict_proba(*sequence_, data, idx);
  auto b = baselines::predict_proba(*thermal_, data, idx);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t c = 0; c < kNumClasses; ++c) a[i][c] = (a[i][c] + b[i][c]) / 2.0;
  }
  return a;
}

std::vector<int> argmax_labels(std::span<const ClassVector> probs) {
  std::vector<int> out;
  out.reserve(probs.size());
  for (const auto& p : probs) {
    out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  return out;
}

}  // namespace cascade::baselines
