#include "cascade/neuralkit/ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "cascade/common/error.hpp"

namespace cascade::nk {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

// Gradient buffer of parent i, or nullptr when it does not need one.
std::vector<double>* grad_of(Node& self, std::size_t i) {
  Node* p = self.parents[i].get();
  if (p == nullptr || !p->requires_grad) return nullptr;
  return &p->grad_buffer();
}

const std::vector<double>& value_of(Node& self, std::size_t i) { return self.parents[i]->value; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& x, F forward, D derivative) {
  std::vector<double> y(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = forward(xv[i]);
  return make_result(x.shape(), std::move(y), {x}, [derivative](Node& self) {
    auto* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    const auto& xin = value_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      (*gx)[i] += self.grad[i] * derivative(xin[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] + b.values()[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] - b.values()[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * b.values()[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(
      a, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Tensor one_minus(const Tensor& a) {
  return unary(
      a, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() == 0) throw DimensionError("softmax: scalar input");
  std::size_t m = x.shape().back();
  std::size_t rows = x.size() / m;
  std::vector<double> y(x.size());
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * m;
    double* out = y.data() + r * m;
    double mx = *std::max_element(in, in + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += out[j] = std::exp(in[j] - mx);
    for (std::size_t j = 0; j < m; ++j) out[j] /= z;
  }
  return make_result(x.shape(), std::move(y), {x}, [m, rows](Node& self) {
    auto* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yv = self.value.data() + r * m;
      const double* g = self.grad.data() + r * m;
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += g[j] * yv[j];
      for (std::size_t j = 0; j < m; ++j) (*gx)[r * m + j] += yv[j] * (g[j] - dot);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (w.dim(1) != in) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " vs weight " +
                         shape_string(w.shape()));
  }
  if (b.defined() && (b.rank() != 1 || b.dim(0) != out)) {
    throw DimensionError("linear: bias " + shape_string(b.shape()));
  }
  std::vector<double> y(n * out);
  MutMap ym(y.data(), n, out);
  ym.noalias() = ConstMap(x.values().data(), n, in) * ConstMap(w.values().data(), out, in).transpose();
  if (b.defined()) {
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.values().data(), out);
  }
  return make_result({n, out}, std::move(y), {x, w, b}, [n, in, out](Node& self) {
    ConstMap g(self.grad.data(), n, out);
    if (auto* gx = grad_of(self, 0)) {
      MutMap(gx->data(), n, in).noalias() += g * ConstMap(value_of(self, 1).data(), out, in);
    }
    if (auto* gw = grad_of(self, 1)) {
      MutMap(gw->data(), out, in).noalias() +=
          g.transpose() * ConstMap(value_of(self, 0).data(), n, in);
    }
    if (auto* gb = grad_of(self, 2)) {
      Eigen::Map<Eigen::RowVectorXd>(gb->data(), out) += g.colwise().sum();
    }
  });
}

Tensor mul_col(const Tensor& g, const Tensor& x) {
  require_rank(g, 2, "mul_col");
  require_rank(x, 2, "mul_col");
  if (g.dim(1) != 1 || g.dim(0) != x.dim(0)) {
    throw DimensionError("mul_col: gate " + shape_string(g.shape()) + " vs " +
                         shape_string(x.shape()));
  }
  std::size_t n = x.dim(0), m = x.dim(1);
  std::vector<double> y(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) y[i * m + j] = g.values()[i] * x.values()[i * m + j];
  }
  return make_result(x.shape(), std::move(y), {g, x}, [n, m](Node& self) {
    const auto& gv = value_of(self, 0);
    const auto& xv = value_of(self, 1);
    auto* gg = grad_of(self, 0);
    auto* gx = grad_of(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double up = self.grad[i * m + j];
        if (gg) (*gg)[i] += up * xv[i * m + j];
        if (gx) (*gx)[i * m + j] += up * gv[i];
      }
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  if (a.dim(0) != b.dim(0)) throw DimensionError("concat_cols: row counts differ");
  std::size_t n = a.dim(0), p = a.dim(1), q = b.dim(1);
  std::vector<double> y(n * (p + q));
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.values().data() + i * p, p, y.data() + i * (p + q));
    std::copy_n(b.values().data() + i * q, q, y.data() + i * (p + q) + p);
  }
  return make_result({n, p + q}, std::move(y), {a, b}, [n, p, q](Node& self) {
    auto* ga = grad_of(self, 0);
    auto* gb = grad_of(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double* g = self.grad.data() + i * (p + q);
      if (ga) {
        for (std::size_t j = 0; j < p; ++j) (*ga)[i * p + j] += g[j];
      }
      if (gb) {
        for (std::size_t j = 0; j < q; ++j) (*gb)[i * q + j] += g[p + j];
      }
    }
  });
}

Tensor select_column(const Tensor& x, std::size_t c) {
  require_rank(x, 2, "select_column");
  std::size_t n = x.dim(0), m = x.dim(1);
  if (c >= m) throw DimensionError("select_column: column out of range");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x.values()[i * m + c];
  return make_result({n, 1}, std::move(y), {x}, [n, m, c](Node& self) {
    if (auto* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) (*gx)[i * m + c] += self.grad[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  std::vector<double> y(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(y), {x}, [](Node& self) {
    if (auto* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
    }
  });
}

Tensor select_step(const Tensor& x, std::size_t t) {
  require_rank(x, 3, "select_step");
  std::size_t n = x.dim(0), steps = x.dim(1), f = x.dim(2);
  if (t >= steps) throw DimensionError("select_step: step out of range");
  std::vector<double> y(n * f);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(x.values().data() + (i * steps + t) * f, f, y.data() + i * f);
  }
  return make_result({n, f}, std::move(y), {x}, [n, steps, f, t](Node& self) {
    if (auto* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < f; ++j) (*gx)[(i * steps + t) * f + j] += self.grad[i * f + j];
      }
    }
  });
}

Tensor stack_steps(std::span<const Tensor> steps) {
  if (steps.empty()) throw InvalidArgument("stack_steps: no steps");
  for (const auto& s : steps) {
    require_rank(s, 2, "stack_steps");
    require_same_shape(s, steps[0], "stack_steps");
  }
  std::size_t n = steps[0].dim(0), f = steps[0].dim(1), t_count = steps.size();
  std::vector<double> y(n * t_count * f);
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(steps[t].values().data() + i * f, f, y.data() + (i * t_count + t) * f);
    }
  }
  std::vector<Tensor> parents(steps.begin(), steps.end());
  return make_result({n, t_count, f}, std::move(y), std::move(parents),
                     [n, f, t_count](Node& self) {
                       for (std::size_t t = 0; t < t_count; ++t) {
                         auto* g = grad_of(self, t);
                         if (g == nullptr) continue;
                         for (std::size_t i = 0; i < n; ++i) {
                           for (std::size_t j = 0; j < f; ++j) {
                             (*g)[i * f + j] += self.grad[(i * t_count + t) * f + j];
                           }
                         }
                       }
                     });
}

Tensor weighted_sum_steps(const Tensor& alpha, const Tensor& h) {
  require_rank(alpha, 2, "weighted_sum_steps");
  require_rank(h, 3, "weighted_sum_steps");
  std::size_t n = h.dim(0), steps = h.dim(1), f = h.dim(2);
  if (alpha.dim(0) != n || alpha.dim(1) != steps) {
    throw DimensionError("weighted_sum_steps: weights " + shape_string(alpha.shape()) + " vs " +
                         shape_string(h.shape()));
  }
  std::vector<double> y(n * f, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < steps; ++t) {
      double a = alpha.values()[i * steps + t];
      const double* hr = h.values().data() + (i * steps + t) * f;
      for (std::size_t j = 0; j < f; ++j) y[i * f + j] += a * hr[j];
    }
  }
  return make_result({n, f}, std::move(y), {alpha, h}, [n, steps, f](Node& self) {
    const auto& av = value_of(self, 0);
    const auto& hv = value_of(self, 1);
    auto* ga = grad_of(self, 0);
    auto* gh = grad_of(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double* g = self.grad.data() + i * f;
      for (std::size_t t = 0; t < steps; ++t) {
        const double* hr = hv.data() + (i * steps + t) * f;
        if (ga) {
          double acc = 0.0;
          for (std::size_t j = 0; j < f; ++j) acc += g[j] * hr[j];
          (*ga)[i * steps + t] += acc;
        }
        if (gh) {
          double a = av[i * steps + t];
          double* ghr = gh->data() + (i * steps + t) * f;
          for (std::size_t j = 0; j < f; ++j) ghr[j] += g[j] * a;
        }
      }
    }
  });
}

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w, o, k, stride, pad, oh, ow;
  std::size_t patch() const { return c * k * k; }
  std::size_t positions() const { return oh * ow; }
};

// cols[(ci*k + ky)*k + kx][oy*ow + ox] = x[ci, oy*s + ky - p, ox*s + kx - p], zero outside.
// Rows of cols are row_stride apart.
void im2col(const ConvGeometry& g, const double* x, double* cols, std::size_t row_stride) {
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        double* row = cols + ((ci * g.k + ky) * g.k + kx) * row_stride;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          double* out = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill_n(out, g.ow, 0.0);
            continue;
          }
          const double* in = x + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            out[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : in[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* x, std::size_t row_stride) {
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const double* row = cols + ((ci * g.k + ky) * g.k + kx) * row_stride;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          double* out = x + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
          const double* in = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.w)) out[ix] += in[ox];
          }
        }
      }
    }
  }
}

// Sample i occupies columns [i * pos, (i + 1) * pos) of a [patch, N * pos] matrix.
void batch_im2col(const ConvGeometry& g, const double* x, double* cols) {
  const std::size_t plane = g.c * g.h * g.w, span = g.n * g.positions();
  for (std::size_t i = 0; i < g.n; ++i) im2col(g, x + i * plane, cols + i * g.positions(), span);
}

void batch_col2im_add(const ConvGeometry& g, const double* cols, double* x) {
  const std::size_t plane = g.c * g.h * g.w, span = g.n * g.positions();
  for (std::size_t i = 0; i < g.n; ++i) {
    col2im_add(g, cols + i * g.positions(), x + i * plane, span);
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dOptions options) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d");
  if (options.stride == 0) throw InvalidArgument("conv2d: stride must be positive");
  ConvGeometry g{};
  g.n = x.dim(0);
  g.c = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.o = w.dim(0);
  g.k = w.dim(2);
  g.stride = options.stride;
  g.pad = options.padding;
  if (w.dim(1) != g.c || w.dim(3) != g.k) {
    throw DimensionError("conv2d: input " + shape_string(x.shape()) + " vs kernel " +
                         shape_string(w.shape()));
  }
  if (g.h + 2 * g.pad < g.k || g.w + 2 * g.pad < g.k) {
    throw DimensionError("conv2d: kernel larger than padded input");
  }
  if (b.defined() && (b.rank() != 1 || b.dim(0) != g.o)) {
    throw DimensionError("conv2d: bias " + shape_string(b.shape()));
  }
  g.oh = (g.h + 2 * g.pad - g.k) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - g.k) / g.stride + 1;

  // One GEMM over the whole batch: cols is [patch, N * pos] so the inner
  // loops run over N * pos contiguous entries.
  const std::size_t patch = g.patch(), pos = g.positions(), span = g.n * pos;
  auto cols = std::make_shared<std::vector<double>>(patch * span);
  batch_im2col(g, x.values().data(), cols->data());
  std::vector<double> ys(g.o * span);
  auto wv = w.values();
  for (std::size_t o = 0; o < g.o; ++o) {
    std::fill_n(ys.data() + o * span, span, b.defined() ? b.values()[o] : 0.0);
  }
  MutMap(ys.data(), g.o, span).noalias() +=
      ConstMap(wv.data(), g.o, patch) * ConstMap(cols->data(), patch, span);
  std::vector<double> y(g.n * g.o * pos);
  for (std::size_t o = 0; o < g.o; ++o) {
    for (std::size_t i = 0; i < g.n; ++i) {
      std::copy_n(ys.data() + o * span + i * pos, pos, y.data() + (i * g.o + o) * pos);
    }
  }
  if (!(grad_enabled() && (x.requires_grad() || w.requires_grad() ||
                           (b.defined() && b.requires_grad())))) {
    cols.reset();
  }
  return make_result({g.n, g.o, g.oh, g.ow}, std::move(y), {x, w, b}, [g, cols](Node& self) {
    const auto& wv = value_of(self, 1);
    auto* gx = grad_of(self, 0);
    auto* gw = grad_of(self, 1);
    auto* gb = grad_of(self, 2);
    const std::size_t patch = g.patch(), pos = g.positions(), span = g.n * pos;
    // Upstream gradient regrouped as [O, N * pos].
    std::vector<double> gy(g.o * span);
    for (std::size_t o = 0; o < g.o; ++o) {
      for (std::size_t i = 0; i < g.n; ++i) {
        std::copy_n(self.grad.data() + (i * g.o + o) * pos, pos, gy.data() + o * span + i * pos);
      }
    }
    if (gb) {
      for (std::size_t o = 0; o < g.o; ++o) {
        double acc = 0.0;
        for (std::size_t j = 0; j < span; ++j) acc += gy[o * span + j];
        (*gb)[o] += acc;
      }
    }
    if (gw) {
      MutMap(gw->data(), g.o, patch).noalias() +=
          ConstMap(gy.data(), g.o, span) * ConstMap(cols->data(), patch, span).transpose();
    }
    if (gx) {
      std::vector<double> gcols(patch * span);
      MutMap(gcols.data(), patch, span).noalias() =
          ConstMap(wv.data(), g.o, patch).transpose() * ConstMap(gy.data(), g.o, span);
      batch_col2im_add(g, gcols.data(), gx->data());
    }
  });
}

Tensor spatial_gate(const Tensor& a, const Tensor& f) {
  require_rank(a, 4, "spatial_gate");
  require_rank(f, 4, "spatial_gate");
  if (a.dim(1) != 1 || a.dim(0) != f.dim(0) || a.dim(2) != f.dim(2) || a.dim(3) != f.dim(3)) {
    throw DimensionError("spatial_gate: map " + shape_string(a.shape()) + " vs features " +
                         shape_string(f.shape()));
  }
  std::size_t n = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
  std::vector<double> y(f.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double* am = a.values().data() + i * hw;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* fm = f.values().data() + (i * c + ch) * hw;
      double* out = y.data() + (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) out[j] = am[j] * fm[j];
    }
  }
  return make_result(f.shape(), std::move(y), {a, f}, [n, c, hw](Node& self) {
    const auto& av = value_of(self, 0);
    const auto& fv = value_of(self, 1);
    auto* ga = grad_of(self, 0);
    auto* gf = grad_of(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t off = (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          double g = self.grad[off + j];
          if (ga) (*ga)[i * hw + j] += g * fv[off + j];
          if (gf) (*gf)[off + j] += g * av[i * hw + j];
        }
      }
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool");
  std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> y(n * c);
  for (std::size_t i = 0; i < n * c; ++i) {
    const double* in = x.values().data() + i * hw;
    double acc = 0.0;
    for (std::size_t j = 0; j < hw; ++j) acc += in[j];
    y[i] = acc / static_cast<double>(hw);
  }
  return make_result({n, c}, std::move(y), {x}, [n, c, hw](Node& self) {
    if (auto* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < n * c; ++i) {
        double g = self.grad[i] / static_cast<double>(hw);
        for (std::size_t j = 0; j < hw; ++j) (*gx)[i * hw + j] += g;
      }
    }
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_rank(q, 3, "attention");
  require_rank(k, 3, "attention");
  require_rank(v, 3, "attention");
  std::size_t n = q.dim(0), lq = q.dim(1), d = q.dim(2), lk = k.dim(1), dv = v.dim(2);
  if (k.dim(0) != n || v.dim(0) != n || k.dim(2) != d || v.dim(1) != lk) {
    throw DimensionError("attention: q " + shape_string(q.shape()) + ", k " +
                         shape_string(k.shape()) + ", v " + shape_string(v.shape()));
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  // probs is kept for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(n * lq * lk);
  std::vector<double> y(n * lq * dv, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < lq; ++a) {
      double* p = probs->data() + (i * lq + a) * lk;
      const double* qa = q.values().data() + (i * lq + a) * d;
      double mx = -INFINITY;
      for (std::size_t b = 0; b < lk; ++b) {
        const double* kb = k.values().data() + (i * lk + b) * d;
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += qa[j] * kb[j];
        p[b] = s * inv;
        mx = std::max(mx, p[b]);
      }
      double z = 0.0;
      for (std::size_t b = 0; b < lk; ++b) z += p[b] = std::exp(p[b] - mx);
      double* out = y.data() + (i * lq + a) * dv;
      for (std::size_t b = 0; b < lk; ++b) {
        p[b] /= z;
        const double* vb = v.values().data() + (i * lk + b) * dv;
        for (std::size_t j = 0; j < dv; ++j) out[j] += p[b] * vb[j];
      }
    }
  }
  return make_result({n, lq, dv}, std::move(y), {q, k, v},
                     [n, lq, lk, d, dv, inv, probs](Node& self) {
                       const auto& qv = value_of(self, 0);
                       const auto& kv = value_of(self, 1);
                       const auto& vv = value_of(self, 2);
                       auto* gq = grad_of(self, 0);
                       auto* gk = grad_of(self, 1);
                       auto* gv = grad_of(self, 2);
                       std::vector<double> gp(lk), gs(lk);
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t a = 0; a < lq; ++a) {
                           const double* p = probs->data() + (i * lq + a) * lk;
                           const double* go = self.grad.data() + (i * lq + a) * dv;
                           double dot = 0.0;
                           for (std::size_t b = 0; b < lk; ++b) {
                             const double* vb = vv.data() + (i * lk + b) * dv;
                             double acc = 0.0;
                             for (std::size_t j = 0; j < dv; ++j) acc += go[j] * vb[j];
                             gp[b] = acc;
                             dot += acc * p[b];
                             if (gv) {
                               double* gvb = gv->data() + (i * lk + b) * dv;
                               for (std::size_t j = 0; j < dv; ++j) gvb[j] += p[b] * go[j];
                             }
                           }
                           for (std::size_t b = 0; b < lk; ++b) gs[b] = p[b] * (gp[b] - dot) * inv;
                           const double* qa = qv.data() + (i * lq + a) * d;
                           for (std::size_t b = 0; b < lk; ++b) {
                             const double* kb = kv.data() + (i * lk + b) * d;
                             if (gq) {
                               double* gqa = gq->data() + (i * lq + a) * d;
                               for (std::size_t j = 0; j < d; ++j) gqa[j] += gs[b] * kb[j];
                             }
                             if (gk) {
                               double* gkb = gk->data() + (i * lk + b) * d;
                               for (std::size_t j = 0; j < d; ++j) gkb[j] += gs[b] * qa[j];
                             }
                           }
                         }
                       }
                     });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw InvalidArgument("dropout: p must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  const double s = 1.0 / (1.0 - p);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    (*mask)[i] = keep(rng) ? s : 0.0;
    y[i] = x.values()[i] * (*mask)[i];
  }
  return make_result(x.shape(), std::move(y), {x}, [mask](Node& self) {
    if (auto* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i] * (*mask)[i];
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy");
  std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) throw DimensionError("cross_entropy: label count differs from batch");
  if (n == 0) throw InvalidArgument("cross_entropy: empty batch");
  auto probs = std::make_shared<std::vector<double>>(n * c);
  auto lab = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) throw InvalidArgument("cross_entropy: bad label");
    const double* z = logits.values().data() + i * c;
    double mx = *std::max_element(z, z + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (*probs)[i * c + j] = std::exp(z[j] - mx);
    for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] /= s;
    loss += mx + std::log(s) - z[y];
  }
  loss /= static_cast<double>(n);
  return make_result({1}, {loss}, {logits}, [n, c, probs, lab](Node& self) {
    auto* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    double g = self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        double t = (static_cast<int>(j) == (*lab)[i]) ? 1.0 : 0.0;
        (*gx)[i * c + j] += g * ((*probs)[i * c + j] - t);
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({1}, {s}, {x}, [](Node& self) {
    if (auto* gx = grad_of(self, 0)) {
      for (double& g : *gx) g += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw InvalidArgument("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

std::vector<std::vector<double>> softmax_rows(const Tensor& logits) {
  NoGradGuard guard;
  Tensor p = softmax(logits);
  std::size_t m = logits.shape().back();
  std::vector<std::vector<double>> rows(p.size() / m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows[r].assign(p.values().begin() + static_cast<long>(r * m),
                   p.values().begin() + static_cast<long>((r + 1) * m));
  }
  return rows;
}

}  // namespace cascade::nk
