#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "cascade/neuralkit/checkpoint.hpp"
#include "cascade/neuralkit/gradcheck.hpp"
#include "cascade/neuralkit/ops.hpp"
#include "cascade/neuralkit/optim.hpp"
#include "cascade/neuralkit/train.hpp"

namespace nk = cascade::nk;
using nk::Tensor;

namespace {

constexpr int kTrials = 20;

// Values in [-1, 1] kept away from 0 so ReLU kinks stay out of the
// finite-difference stencil.
Tensor random_leaf(nk::Shape shape, cascade::Rng& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(nk::shape_size(shape));
  for (double& x : v) {
    do {
      x = dist(rng);
    } while (std::abs(x) < 1e-2);
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

std::size_t pick(cascade::Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Scalar probe sum(out * R) with a fixed random R, so every output entry
// contributes a distinct weight to the gradient.
Tensor probe(const Tensor& out, std::uint64_t seed) {
  cascade::Rng rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> r(out.size());
  for (double& x : r) x = dist(rng);
  return nk::sum(nk::mul(out, Tensor::from(out.shape(), std::move(r))));
}

void expect_grad_ok(const std::function<Tensor()>& forward, const nk::ParameterList& inputs,
                    std::uint64_t seed) {
  auto report = nk::grad_check([&] { return probe(forward(), seed); }, inputs);
  EXPECT_TRUE(report.passed) << "max rel error " << report.max_rel_error << " in "
                             << report.worst_parameter << "[" << report.worst_index << "]";
}

}  // namespace

TEST(Tensor, ShapeMismatchAndScalarRoot) {
  EXPECT_THROW(Tensor::from({2, 3}, std::vector<double>(5)), cascade::DimensionError);
  auto a = Tensor::zeros({2, 2}, true);
  auto b = Tensor::zeros({2, 3}, true);
  EXPECT_THROW(nk::add(a, b), cascade::DimensionError);
  EXPECT_THROW(nk::add(a, a).backward(), cascade::DimensionError);
  EXPECT_THROW(Tensor::zeros({1}).backward(), cascade::Error);
}

TEST(Tensor, NoGradGuardStopsRecording) {
  auto a = Tensor::full({3}, 2.0, true);
  {
    nk::NoGradGuard guard;
    EXPECT_FALSE(nk::mul(a, a).requires_grad());
  }
  EXPECT_TRUE(nk::mul(a, a).requires_grad());
}

TEST(Tensor, SharedSubexpressionAccumulates) {
  auto x = Tensor::from({1}, {3.0}, true);
  auto y = nk::mul(x, x);
  nk::sum(nk::add(y, y)).backward();  // d/dx 2x^2 = 4x
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Ops, CrossEntropyUniformLogitsIsLn4) {
  auto logits = Tensor::zeros({1, 4}, true);
  std::vector<int> y{2};
  EXPECT_NEAR(nk::cross_entropy(logits, y).item(), std::log(4.0), 1e-12);
}

TEST(Ops, CrossEntropyStableForLargeLogits) {
  auto logits = Tensor::from({1, 2}, {1000.0, 0.0});
  std::vector<int> y{1};
  EXPECT_NEAR(nk::cross_entropy(logits, y).item(), 1000.0, 1e-9);
}

TEST(Ops, SoftmaxSumsToOneAndIsShiftInvariant) {
  cascade::Rng rng(3);
  for (int trial = 0; trial < kTrials; ++trial) {
    auto x = random_leaf({pick(rng, 1, 5), pick(rng, 2, 7)}, rng);
    auto shifted = Tensor::from(x.shape(), std::vector<double>(x.values().begin(), x.values().end()));
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted.values()[i] += 37.5;
    auto p = nk::softmax(x);
    auto q = nk::softmax(shifted);
    std::size_t m = x.dim(1);
    for (std::size_t r = 0; r < x.dim(0); ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        s += p.values()[r * m + j];
        EXPECT_NEAR(p.values()[r * m + j], q.values()[r * m + j], 1e-12);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Ops, DeltaKernelConvolutionCopiesInput) {
  cascade::Rng rng(5);
  auto x = random_leaf({1, 1, 5, 6}, rng);
  std::vector<double> k(9, 0.0);
  k[4] = 1.0;
  auto w = Tensor::from({1, 1, 3, 3}, k);
  auto y = nk::conv2d(x, w, {}, {1, 1});
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y.values()[i], x.values()[i]);

  auto valid = nk::conv2d(x, w, {}, {1, 0});
  ASSERT_EQ(valid.shape(), (nk::Shape{1, 1, 3, 4}));
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_DOUBLE_EQ(valid.values()[r * 4 + c], x.values()[(r + 1) * 6 + c + 1]);
    }
  }
}

TEST(Ops, ConvOutputShapeWithStride) {
  auto x = Tensor::zeros({2, 1, 48, 50});
  auto w = Tensor::zeros({8, 1, 3, 3});
  auto y = nk::conv2d(x, w, {}, {2, 1});
  EXPECT_EQ(y.shape(), (nk::Shape{2, 8, 24, 25}));
  EXPECT_THROW(nk::conv2d(x, Tensor::zeros({8, 2, 3, 3}), {}, {1, 1}), cascade::DimensionError);
}

TEST(Ops, DenseGradientIsOuterProduct) {
  // L = sum(W x + b) => dL/dW[o][k] = sum_n x[n][k], dL/db[o] = N.
  cascade::Rng rng(11);
  auto x = random_leaf({3, 4}, rng);
  auto w = random_leaf({2, 4}, rng);
  auto b = random_leaf({2}, rng);
  nk::sum(nk::linear(x, w, b)).backward();
  auto gw = w.grad();
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t k = 0; k < 4; ++k) {
      double col = 0.0;
      for (std::size_t n = 0; n < 3; ++n) col += x.values()[n * 4 + k];
      EXPECT_NEAR(gw[o * 4 + k], col, 1e-12);
    }
    EXPECT_DOUBLE_EQ(b.grad()[o], 3.0);
  }
  auto report = nk::grad_check([&] { return nk::sum(nk::linear(x, w, b)); },
                               {{"x", x}, {"w", w}, {"b", b}});
  EXPECT_LT(report.max_rel_error, 1e-9);
}

TEST(GradCheck, Elementwise) {
  cascade::Rng rng(101);
  for (int trial = 0; trial < kTrials; ++trial) {
    nk::Shape s{pick(rng, 1, 4), pick(rng, 1, 5)};
    auto a = random_leaf(s, rng);
    auto b = random_leaf(s, rng);
    nk::ParameterList in{{"a", a}, {"b", b}};
    expect_grad_ok([&] { return nk::add(a, b); }, in, trial);
    expect_grad_ok([&] { return nk::sub(a, b); }, in, trial);
    expect_grad_ok([&] { return nk::mul(a, b); }, in, trial);
    expect_grad_ok([&] { return nk::scale(a, -1.7); }, in, trial);
    expect_grad_ok([&] { return nk::one_minus(a); }, in, trial);
    expect_grad_ok([&] { return nk::sigmoid(a); }, in, trial);
    expect_grad_ok([&] { return nk::tanh(a); }, in, trial);
    expect_grad_ok([&] { return nk::relu(a); }, in, trial);
    expect_grad_ok([&] { return nk::softmax(a); }, in, trial);
    expect_grad_ok([&] { return nk::mean(nk::mul(a, a)); }, in, trial);
  }
}

TEST(GradCheck, DenseAndReshaping) {
  cascade::Rng rng(202);
  for (int trial = 0; trial < kTrials; ++trial) {
    std::size_t n = pick(rng, 1, 4), in = pick(rng, 1, 6), out = pick(rng, 1, 5);
    auto x = random_leaf({n, in}, rng);
    auto w = random_leaf({out, in}, rng);
    auto b = random_leaf({out}, rng);
    auto g = random_leaf({n, 1}, rng);
    auto y = random_leaf({n, out}, rng);
    nk::ParameterList all{{"x", x}, {"w", w}, {"b", b}, {"g", g}, {"y", y}};
    expect_grad_ok([&] { return nk::linear(x, w, b); }, all, trial);
    expect_grad_ok([&] { return nk::linear(x, w); }, all, trial);
    expect_grad_ok([&] { return nk::mul_col(g, x); }, all, trial);
    expect_grad_ok([&] { return nk::concat_cols(x, y); }, all, trial);
    std::size_t c = pick(rng, 0, in - 1);
    expect_grad_ok([&] { return nk::select_column(x, c); }, all, trial);
    expect_grad_ok([&] { return nk::reshape(x, {in, n}); }, all, trial);
  }
}

TEST(GradCheck, SequenceOps) {
  cascade::Rng rng(303);
  for (int trial = 0; trial < kTrials; ++trial) {
    std::size_t n = pick(rng, 1, 3), t = pick(rng, 1, 5), f = pick(rng, 1, 4);
    auto h = random_leaf({n, t, f}, rng);
    auto alpha = random_leaf({n, t}, rng);
    auto s0 = random_leaf({n, f}, rng);
    auto s1 = random_leaf({n, f}, rng);
    nk::ParameterList all{{"h", h}, {"alpha", alpha}, {"s0", s0}, {"s1", s1}};
    std::size_t step = pick(rng, 0, t - 1);
    expect_grad_ok([&] { return nk::select_step(h, step); }, all, trial);
    expect_grad_ok(
        [&] {
          std::vector<Tensor> st{s0, s1, s0};
          return nk::stack_steps(st);
        },
        all, trial);
    expect_grad_ok([&] { return nk::weighted_sum_steps(nk::softmax(alpha), h); }, all, trial);
  }
}

TEST(GradCheck, Convolution) {
  cascade::Rng rng(404);
  for (int trial = 0; trial < kTrials; ++trial) {
    std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), o = pick(rng, 1, 3);
    std::size_t k = pick(rng, 1, 3), stride = pick(rng, 1, 2), pad = pick(rng, 0, 1);
    std::size_t h = pick(rng, k, 7), w = pick(rng, k, 7);
    auto x = random_leaf({n, c, h, w}, rng);
    auto wt = random_leaf({o, c, k, k}, rng);
    auto b = random_leaf({o}, rng);
    nk::ParameterList all{{"x", x}, {"w", wt}, {"b", b}};
    expect_grad_ok([&] { return nk::conv2d(x, wt, b, {stride, pad}); }, all, trial);
  }
}

TEST(GradCheck, SpatialOps) {
  cascade::Rng rng(505);
  for (int trial = 0; trial < kTrials; ++trial) {
    std::size_t n = pick(rng, 1, 3), c = pick(rng, 1, 4), h = pick(rng, 1, 5), w = pick(rng, 1, 5);
    auto a = random_leaf({n, 1, h, w}, rng);
    auto f = random_leaf({n, c, h, w}, rng);
    nk::ParameterList all{{"a", a}, {"f", f}};
    expect_grad_ok([&] { return nk::spatial_gate(nk::sigmoid(a), f); }, all, trial);
    expect_grad_ok([&] { return nk::global_avg_pool(f); }, all, trial);
  }
}

TEST(GradCheck, Attention) {
  cascade::Rng rng(606);
  for (int trial = 0; trial < kTrials; ++trial) {
    std::size_t n = pick(rng, 1, 3), lq = pick(rng, 1, 4), lk = pick(rng, 1, 4);
    std::size_t d = pick(rng, 1, 5), dv = pick(rng, 1, 4);
    auto q = random_leaf({n, lq, d}, rng);
    auto k = random_leaf({n, lk, d}, rng);
    auto v = random_leaf({n, lk, dv}, rng);
    nk::ParameterList all{{"q", q}, {"k", k}, {"v", v}};
    expect_grad_ok([&] { return nk::attention(q, k, v); }, all, trial);
  }
}

TEST(GradCheck, CrossEntropyAndDropout) {
  cascade::Rng rng(707);
  for (int trial = 0; trial < kTrials; ++trial) {
    std::size_t n = pick(rng, 1, 6), c = pick(rng, 2, 5);
    auto z = random_leaf({n, c}, rng);
    std::vector<int> labels(n);
    for (int& y : labels) y = static_cast<int>(pick(rng, 0, c - 1));
    auto report = nk::grad_check([&] { return nk::cross_entropy(z, labels); }, {{"z", z}});
    EXPECT_TRUE(report.passed) << report.max_rel_error;
    // A fixed mask makes dropout a deterministic linear map.
    expect_grad_ok(
        [&] {
          cascade::Rng mask_rng(99 + trial);
          return nk::dropout(z, 0.3, mask_rng, true);
        },
        {{"z", z}}, trial);
  }
}

TEST(GradCheck, GruCell) {
  cascade::Rng rng(808);
  for (int trial = 0; trial < kTrials; ++trial) {
    std::size_t n = pick(rng, 1, 3), t = pick(rng, 1, 4), f = pick(rng, 1, 4), hid = pick(rng, 1, 4);
    nk::Gru gru(f, hid, rng, "gru");
    auto x = random_leaf({n, t, f}, rng);
    nk::ParameterList all{{"x", x}};
    gru.collect(all);
    expect_grad_ok([&] { return gru.forward(x); }, all, trial);
  }
}

TEST(GradCheck, LinearModelIsExact) {
  cascade::Rng rng(1);
  auto x = random_leaf({5, 3}, rng);
  nk::Dense d(3, 2, rng, "d");
  nk::ParameterList p;
  d.collect(p);
  auto report = nk::grad_check([&] { return nk::sum(d.forward(x)); }, p);
  EXPECT_LT(report.max_rel_error, 1e-9);
}

TEST(GradCheck, TwoLayerTanhNetwork) {
  cascade::Rng rng(0);
  auto x = random_leaf({8, 5}, rng);
  nk::Dense l1(5, 6, rng, "l1"), l2(6, 3, rng, "l2");
  std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
  nk::ParameterList p;
  l1.collect(p);
  l2.collect(p);
  auto report = nk::grad_check(
      [&] { return nk::cross_entropy(l2.forward(nk::tanh(l1.forward(x))), y); }, p);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(GradCheck, DeadReluUnitHasZeroGradient) {
  auto x = Tensor::from({2, 2}, {0.5, 1.0, 1.5, 0.25});
  auto w = Tensor::from({2, 2}, {0.3, -0.2, 0.1, 0.4}, true);
  auto b = Tensor::from({2}, {-50.0, 0.1}, true);  // unit 0 never fires
  nk::ParameterList p{{"w", w}, {"b", b}};
  auto loss = [&] { return nk::sum(nk::relu(nk::linear(x, w, b))); };
  loss().backward();
  EXPECT_EQ(w.grad()[0], 0.0);
  EXPECT_EQ(w.grad()[1], 0.0);
  EXPECT_EQ(b.grad()[0], 0.0);
  EXPECT_TRUE(nk::grad_check(loss, p).passed);
}

TEST(GradCheck, NonFiniteGradientIsAnError) {
  auto x = Tensor::from({1}, {INFINITY}, true);
  EXPECT_THROW(nk::grad_check([&] { return nk::sum(nk::mul(x, x)); }, {{"x", x}}), cascade::Error);
}

TEST(Optimizer, CosineEndpoints) {
  EXPECT_NEAR(nk::cosine_lr(1e-3, 0, 50), 1e-3, 1e-12);
  EXPECT_NEAR(nk::cosine_lr(1e-3, 50, 50), 0.0, 1e-12);
  EXPECT_NEAR(nk::cosine_lr(1e-3, 25, 50), 5e-4, 1e-12);
}

TEST(Optimizer, ZeroLearningRateLeavesParameters) {
  cascade::Rng rng(4);
  auto w = random_leaf({3, 3}, rng);
  std::vector<double> before(w.values().begin(), w.values().end());
  nk::AdamW opt({{"w", w}}, {.lr = 0.0});
  for (int i = 0; i < 5; ++i) nk::train_step(opt, nk::sum(nk::mul(w, w)));
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(w.values()[i], before[i]);
}

TEST(Optimizer, DecoupledDecayWithZeroGradient) {
  auto w = Tensor::from({1}, {2.0}, true);
  nk::AdamW opt({{"w", w}}, {.lr = 0.1, .weight_decay = 0.5});
  opt.step();  // no gradient: only theta -= lr * wd * theta
  EXPECT_DOUBLE_EQ(w.values()[0], 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(Optimizer, FirstStepMovesByLearningRate) {
  // Bias-corrected m/sqrt(v) equals sign(g) on the first step.
  auto w = Tensor::from({2}, {1.0, -3.0}, true);
  nk::AdamW opt({{"w", w}}, {.lr = 0.01, .weight_decay = 0.0});
  nk::train_step(opt, nk::sum(nk::mul(w, w)));
  EXPECT_NEAR(w.values()[0], 0.99, 1e-9);
  EXPECT_NEAR(w.values()[1], -2.99, 1e-9);
}

TEST(Optimizer, QuadraticBowlDecreases) {
  auto w = Tensor::from({4}, {3.0, -2.0, 1.5, 4.0}, true);
  auto target = Tensor::from({4}, {0.5, 0.5, -0.5, 1.0});
  nk::AdamW opt({{"w", w}}, {.lr = 0.05});
  auto loss = [&] {
    auto d = nk::sub(w, target);
    return nk::sum(nk::mul(d, d));
  };
  double first = loss().item();
  double prev = first;
  int increases = 0;
  for (int i = 0; i < 200; ++i) {
    double l = nk::train_step(opt, loss());
    if (i > 10 && l > prev + 1e-12) ++increases;
    prev = l;
  }
  EXPECT_LT(loss().item(), 1e-3 * first);
  EXPECT_LE(increases, 20);  // Adam momentum may overshoot briefly near the minimum
}

namespace {

struct ToyProblem {
  Tensor x;
  std::vector<int> y;
  nk::Dense layer;
};

ToyProblem make_toy(std::uint64_t seed) {
  cascade::Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> xs;
  std::vector<int> ys;
  for (int i = 0; i < 64; ++i) {
    int c = i % 2;
    xs.push_back(noise(rng) + (c ? 1.5 : -1.5));
    xs.push_back(noise(rng));
    ys.push_back(c);
  }
  cascade::Rng init(seed + 1);
  return {Tensor::from({64, 2}, xs), ys, nk::Dense(2, 2, init, "clf")};
}

nk::TrainingHistory train_toy(ToyProblem& p, std::size_t epochs, std::size_t patience) {
  nk::ParameterList params;
  p.layer.collect(params);
  auto batch_loss = [&](std::span<const std::size_t> batch, cascade::Rng&) {
    std::vector<double> xb;
    std::vector<int> yb;
    for (std::size_t i : batch) {
      xb.push_back(p.x.values()[i * 2]);
      xb.push_back(p.x.values()[i * 2 + 1]);
      yb.push_back(p.y[i]);
    }
    return nk::cross_entropy(p.layer.forward(Tensor::from({batch.size(), 2}, xb)), yb);
  };
  auto val = [&] { return nk::cross_entropy(p.layer.forward(p.x), p.y).item(); };
  nk::TrainConfig cfg;
  cfg.max_epochs = epochs;
  cfg.patience = patience;
  cfg.optimizer.lr = 0.05;
  cfg.seed = 42;
  return nk::fit(params, 64, batch_loss, val, cfg);
}

}  // namespace

TEST(Training, IdenticalSeedsGiveIdenticalTrajectories) {
  auto a = make_toy(9);
  auto b = make_toy(9);
  auto ha = train_toy(a, 15, 10);
  auto hb = train_toy(b, 15, 10);
  ASSERT_EQ(ha.epochs.size(), hb.epochs.size());
  for (std::size_t i = 0; i < ha.epochs.size(); ++i) {
    EXPECT_EQ(ha.epochs[i].train_loss, hb.epochs[i].train_loss);
  }
  for (std::size_t i = 0; i < a.layer.weight.size(); ++i) {
    EXPECT_EQ(a.layer.weight.values()[i], b.layer.weight.values()[i]);
  }
}

TEST(Training, LearnsAndRestoresBestEpoch) {
  auto p = make_toy(10);
  auto h = train_toy(p, 30, 5);
  EXPECT_LT(h.best_val_loss, h.epochs.front().val_loss);
  double restored = nk::cross_entropy(p.layer.forward(p.x), p.y).item();
  EXPECT_NEAR(restored, h.best_val_loss, 1e-12);
  for (std::size_t i = 1; i < h.epochs.size(); ++i) EXPECT_LE(h.epochs[i].lr, h.epochs[i - 1].lr);
}

TEST(Training, EarlyStoppingAfterPatience) {
  auto p = make_toy(11);
  nk::ParameterList params;
  p.layer.collect(params);
  // Validation loss that never improves after epoch 0.
  std::size_t calls = 0;
  auto val = [&] { return calls++ == 0 ? 1.0 : 2.0; };
  auto batch_loss = [&](std::span<const std::size_t>, cascade::Rng&) {
    return nk::cross_entropy(p.layer.forward(p.x), p.y);
  };
  nk::TrainConfig cfg;
  cfg.patience = 3;
  auto h = nk::fit(params, 64, batch_loss, val, cfg);
  EXPECT_TRUE(h.stopped_early);
  EXPECT_EQ(h.epochs.size(), 4u);
  EXPECT_EQ(h.best_epoch, 0u);
}

TEST(Training, NonFiniteLossAborts) {
  auto w = Tensor::from({1}, {1.0}, true);
  auto batch_loss = [&](std::span<const std::size_t>, cascade::Rng&) {
    return nk::scale(nk::sum(w), NAN);
  };
  EXPECT_THROW(nk::fit({{"w", w}}, 4, batch_loss, [] { return 0.0; }, {}), nk::TrainingDiverged);
}

TEST(Checkpoint, RoundTripAndMismatch) {
  cascade::Rng rng(12);
  nk::Dense a(3, 2, rng, "d"), b(3, 2, rng, "d"), c(4, 2, rng, "d");
  nk::ParameterList pa, pb, pc;
  a.collect(pa);
  b.collect(pb);
  c.collect(pc);
  auto dir = std::filesystem::temp_directory_path() / "cascade_ckpt_test";
  std::filesystem::remove_all(dir);
  nk::save_checkpoint(dir, pa, {{"seed", 12}});
  auto meta = nk::load_checkpoint(dir, pb);
  EXPECT_EQ(meta.at("seed"), 12);
  for (std::size_t i = 0; i < a.weight.size(); ++i) {
    EXPECT_EQ(a.weight.values()[i], b.weight.values()[i]);
  }
  EXPECT_THROW(nk::load_checkpoint(dir, pc), cascade::DimensionError);
  std::filesystem::remove_all(dir);
}
