#pragma once

#include <span>
#include <vector>

#include "cascade/common/rng.hpp"
#include "cascade/neuralkit/tensor.hpp"

namespace cascade::nk {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor one_minus(const Tensor& a);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

// Softmax over the last axis.
Tensor softmax(const Tensor& x);

// x [N, in], w [out, in], b [out] (optional) -> x w^T + b, [N, out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = {});

// g [N, 1] scales every row of x [N, M].
Tensor mul_col(const Tensor& g, const Tensor& x);
// [N, p] ++ [N, q] -> [N, p + q].
Tensor concat_cols(const Tensor& a, const Tensor& b);
// Column c of x [N, M] as [N, 1].
Tensor select_column(const Tensor& x, std::size_t c);

Tensor reshape(const Tensor& x, Shape shape);

// x [N, T, F] -> step t as [N, F].
Tensor select_step(const Tensor& x, std::size_t t);
// T tensors of [N, F] -> [N, T, F].
Tensor stack_steps(std::span<const Tensor> steps);
// alpha [N, T], h [N, T, F] -> sum_t alpha[n, t] h[n, t, :], [N, F].
Tensor weighted_sum_steps(const Tensor& alpha, const Tensor& h);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// x [N, C, H, W], w [O, C, K, K], b [O] (optional) -> [N, O, H', W'] with
// H' = (H + 2p - K) / s + 1 (floor).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dOptions options);

// a [N, 1, H, W] broadcast over the channels of f [N, C, H, W].
Tensor spatial_gate(const Tensor& a, const Tensor& f);
// [N, C, H, W] -> [N, C].
Tensor global_avg_pool(const Tensor& x);

// Scaled dot-product attention. q [N, Lq, d], k [N, Lk, d], v [N, Lk, dv]
// -> softmax(q k^T / sqrt(d)) v, [N, Lq, dv].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Inverted dropout; identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

// Mean over the batch of -log softmax(logits)[label], via log-sum-exp.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Row-wise softmax probabilities of plain values (no graph).
std::vector<std::vector<double>> softmax_rows(const Tensor& logits);

}  // namespace cascade::nk
