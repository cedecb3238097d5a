#include "cascade/neuralkit/layers.hpp"

#include <cmath>

#include "cascade/common/error.hpp"

namespace cascade::nk {

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) {
    auto t = p.tensor;
    t.zero_grad();
  }
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

Dense::Dense(std::size_t in, std::size_t out, Rng& rng, std::string name_)
    : weight(init_uniform({out, in}, in, rng)),
      bias(init_uniform({out}, in, rng)),
      name(std::move(name_)) {}

void Dense::collect(ParameterList& out) const {
  out.push_back({name + ".weight", weight});
  out.push_back({name + ".bias", bias});
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               Conv2dOptions options_, Rng& rng, std::string name_)
    : weight(init_uniform({out_channels, in_channels, kernel, kernel},
                          in_channels * kernel * kernel, rng)),
      bias(init_uniform({out_channels}, in_channels * kernel * kernel, rng)),
      options(options_),
      name(std::move(name_)) {}

void Conv2d::collect(ParameterList& out) const {
  out.push_back({name + ".weight", weight});
  out.push_back({name + ".bias", bias});
}

Gru::Gru(std::size_t input, std::size_t hidden, Rng& rng, std::string name)
    : hidden_(hidden),
      wz_(input, hidden, rng, name + ".wz"),
      uz_(hidden, hidden, rng, name + ".uz"),
      wr_(input, hidden, rng, name + ".wr"),
      ur_(hidden, hidden, rng, name + ".ur"),
      wn_(input, hidden, rng, name + ".wn"),
      un_(hidden, hidden, rng, name + ".un") {}

Tensor Gru::step(const Tensor& x, const Tensor& h) const {
  Tensor z = sigmoid(add(wz_.forward(x), uz_.forward(h)));
  Tensor r = sigmoid(add(wr_.forward(x), ur_.forward(h)));
  Tensor n = tanh(add(wn_.forward(x), mul(r, un_.forward(h))));
  return add(mul(one_minus(z), n), mul(z, h));
}

Tensor Gru::forward(const Tensor& x) const {
  if (x.rank() != 3) throw DimensionError("Gru: expected [N, T, F], got " + shape_string(x.shape()));
  std::size_t n = x.dim(0), steps = x.dim(1);
  Tensor h = Tensor::zeros({n, hidden_});
  std::vector<Tensor> states;
  states.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    h = step(select_step(x, t), h);
    states.push_back(h);
  }
  return stack_steps(states);
}

void Gru::collect(ParameterList& out) const {
  for (const Dense* d : {&wz_, &uz_, &wr_, &ur_, &wn_, &un_}) d->collect(out);
}

}  // namespace cascade::nk
