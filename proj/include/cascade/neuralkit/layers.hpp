#pragma once

#include <string>
#include <vector>

#include "cascade/common/rng.hpp"
#include "cascade/neuralkit/ops.hpp"

namespace cascade::nk {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedTensor>;

// Trainable leaf drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

void zero_grads(const ParameterList& params);
std::size_t parameter_count(const ParameterList& params);

class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in, std::size_t out, Rng& rng, std::string name);

  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(ParameterList& out) const;

  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
  std::string name;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         Conv2dOptions options, Rng& rng, std::string name);

  Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, options); }
  void collect(ParameterList& out) const;

  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]
  Conv2dOptions options;
  std::string name;
};

// Gated recurrent unit:
//   z = sigmoid(Wz x + Uz h), r = sigmoid(Wr x + Ur h)
//   n = tanh(Wn x + r * (Un h)), h' = (1 - z) * n + z * h
class Gru {
 public:
  Gru() = default;
  Gru(std::size_t input, std::size_t hidden, Rng& rng, std::string name);

  Tensor step(const Tensor& x, const Tensor& h) const;
  // x [N, T, F] -> hidden states [N, T, hidden], starting from h = 0.
  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& out) const;

  std::size_t hidden_size() const { return hidden_; }

 private:
  std::size_t hidden_ = 0;
  Dense wz_, uz_, wr_, ur_, wn_, un_;
};

}  // namespace cascade::nk
