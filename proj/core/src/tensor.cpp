/* Copyright 2026 The AAD Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "aad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "aad/errors.hpp"

namespace aad {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value.assign(shape_size(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    fail(ErrorKind::kShape, "shape " + shape_string(shape) + " does not hold " +
                                std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return full({}, value, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) fail(ErrorKind::kContract, "item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

namespace {

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

// Allocates an op result; parents are linked only if one of them needs grad.
template <typename T>
Tensor<T> make_result(Shape shape, const char* op, std::initializer_list<NodePtr<T>> inputs) {
  auto node = std::make_shared<TensorNode<T>>();
  node->value.assign(shape_size(shape), T(0));
  node->shape = std::move(shape);
  node->op = op;
  for (const auto& in : inputs) {
    if (in && in->requires_grad && g_grad_enabled) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const auto& in : inputs) {
      if (in) node->parents.push_back(in);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::kShape, std::string(op) + ": " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, const char* op, F f, D dfdx) {
  Tensor<T> out = make_result<T>(x.shape(), op, {x.node()});
  auto xs = x.values();
  auto ys = out.values();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
  if (out.requires_grad()) {
    out.node()->backward_fn = [dfdx](TensorNode<T>& self) {
      auto& in = *self.parents[0];
      auto& g = in.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * dfdx(in.value[i], self.value[i]);
      }
    };
  }
  return out;
}

}  // namespace

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    fail(ErrorKind::kContract, "backward() needs a scalar loss, got " +
                                   (loss.defined() ? shape_string(loss.shape()) : "undefined"));
  }
  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> seen;
  std::vector<std::pair<TensorNode<T>*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->value.size(), T(0));
  }
  loss.node()->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) ||
      (b.defined() && (b.rank() != 1 || b.dim(0) != w.dim(1)))) {
    fail(ErrorKind::kShape, "dense: x " + shape_string(x.shape()) + ", W " +
                                shape_string(w.shape()) + ", b " +
                                (b.defined() ? shape_string(b.shape()) : "none"));
  }
  const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  Tensor<T> out = make_result<T>({batch, out_dim}, "dense", {x.node(), w.node(), b.node()});
  const T* xv = x.values().data();
  const T* wv = w.values().data();
  T* yv = out.values().data();
  for (std::size_t r = 0; r < batch; ++r) {
    T* yrow = yv + r * out_dim;
    if (b.defined()) std::copy(b.values().begin(), b.values().end(), yrow);
    for (std::size_t i = 0; i < in; ++i) {
      const T xi = xv[r * in + i];
      if (xi == T(0)) continue;
      const T* wrow = wv + i * out_dim;
      for (std::size_t o = 0; o < out_dim; ++o) yrow[o] += xi * wrow[o];
    }
  }
  if (out.requires_grad()) {
    const bool has_bias = b.defined();
    out.node()->backward_fn = [batch, in, out_dim, has_bias](TensorNode<T>& self) {
      auto& xn = *self.parents[0];
      auto& wn = *self.parents[1];
      const T* dy = self.grad.data();
      if (xn.requires_grad) {
        T* dx = xn.ensure_grad().data();
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t i = 0; i < in; ++i) {
            const T* wrow = wn.value.data() + i * out_dim;
            const T* dyr = dy + r * out_dim;
            T acc = 0;
            for (std::size_t o = 0; o < out_dim; ++o) acc += dyr[o] * wrow[o];
            dx[r * in + i] += acc;
          }
        }
      }
      if (wn.requires_grad) {
        T* dw = wn.ensure_grad().data();
        for (std::size_t r = 0; r < batch; ++r) {
          const T* dyr = dy + r * out_dim;
          for (std::size_t i = 0; i < in; ++i) {
            const T xi = xn.value[r * in + i];
            if (xi == T(0)) continue;
            T* dwrow = dw + i * out_dim;
            for (std::size_t o = 0; o < out_dim; ++o) dwrow[o] += xi * dyr[o];
          }
        }
      }
      if (has_bias && self.parents[2]->requires_grad) {
        T* db = self.parents[2]->ensure_grad().data();
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t o = 0; o < out_dim; ++o) db[o] += dy[r * out_dim + o];
        }
      }
    };
  }
  return out;
}

namespace {

struct ConvGeometry {
  std::size_t batch, in_ch, out_ch, k, t_in, t_out, dilation, stride;
  std::ptrdiff_t shift;  // read position of tap j is t*stride + shift - j*dilation

  // Valid output range [lo, hi) for tap j.
  std::pair<std::size_t, std::size_t> range(std::size_t j) const {
    const std::ptrdiff_t off = shift - static_cast<std::ptrdiff_t>(j * dilation);
    const auto s = static_cast<std::ptrdiff_t>(stride);
    std::ptrdiff_t lo = off >= 0 ? 0 : (-off + s - 1) / s;
    std::ptrdiff_t hi_incl = (static_cast<std::ptrdiff_t>(t_in) - 1 - off);
    if (hi_incl < 0) return {0, 0};
    std::ptrdiff_t hi = hi_incl / s + 1;
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(t_out));
    if (lo >= hi) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
  }
  std::ptrdiff_t offset(std::size_t j) const {
    return shift - static_cast<std::ptrdiff_t>(j * dilation);
  }
};

}  // namespace

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 Conv1dOptions options) {
  if (x.rank() != 3 || w.rank() != 3 || x.dim(1) != w.dim(1) ||
      (b.defined() && (b.rank() != 1 || b.dim(0) != w.dim(0)))) {
    fail(ErrorKind::kShape, "conv1d: x " + shape_string(x.shape()) + ", w " +
                                shape_string(w.shape()) + ", b " +
                                (b.defined() ? shape_string(b.shape()) : "none"));
  }
  if (options.dilation < 1 || options.stride < 1 || w.dim(2) < 1) {
    fail(ErrorKind::kContract, "conv1d: dilation, stride and kernel must be >= 1");
  }
  ConvGeometry g{};
  g.batch = x.dim(0);
  g.in_ch = x.dim(1);
  g.t_in = x.dim(2);
  g.out_ch = w.dim(0);
  g.k = w.dim(2);
  g.dilation = options.dilation;
  g.stride = options.stride;
  g.t_out = (g.t_in + g.stride - 1) / g.stride;
  const std::size_t span = (g.k - 1) * g.dilation;
  g.shift = options.padding == Padding::kCausal ? 0 : static_cast<std::ptrdiff_t>(span / 2);

  Tensor<T> out = make_result<T>({g.batch, g.out_ch, g.t_out}, "conv1d",
                                 {x.node(), w.node(), b.node()});
  const T* xv = x.values().data();
  const T* wv = w.values().data();
  T* yv = out.values().data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      T* y = yv + (n * g.out_ch + o) * g.t_out;
      if (b.defined()) std::fill(y, y + g.t_out, b.values()[o]);
      for (std::size_t i = 0; i < g.in_ch; ++i) {
        const T* xi = xv + (n * g.in_ch + i) * g.t_in;
        for (std::size_t j = 0; j < g.k; ++j) {
          const T wj = wv[(o * g.in_ch + i) * g.k + j];
          const auto [lo, hi] = g.range(j);
          const std::ptrdiff_t off = g.offset(j);
          if (g.stride == 1) {
            for (std::size_t t = lo; t < hi; ++t) {
              y[t] += wj * xi[static_cast<std::ptrdiff_t>(t) + off];
            }
          } else {
            for (std::size_t t = lo; t < hi; ++t) {
              y[t] += wj * xi[static_cast<std::ptrdiff_t>(t * g.stride) + off];
            }
          }
        }
      }
    }
  }

  if (out.requires_grad()) {
    const bool has_bias = b.defined();
    out.node()->backward_fn = [g, has_bias](TensorNode<T>& self) {
      auto& xn = *self.parents[0];
      auto& wn = *self.parents[1];
      const T* dyv = self.grad.data();
      T* dx = xn.requires_grad ? xn.ensure_grad().data() : nullptr;
      T* dw = wn.requires_grad ? wn.ensure_grad().data() : nullptr;
      for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t o = 0; o < g.out_ch; ++o) {
          const T* dy = dyv + (n * g.out_ch + o) * g.t_out;
          for (std::size_t i = 0; i < g.in_ch; ++i) {
            const std::size_t xbase = (n * g.in_ch + i) * g.t_in;
            const T* xi = xn.value.data() + xbase;
            for (std::size_t j = 0; j < g.k; ++j) {
              const std::size_t widx = (o * g.in_ch + i) * g.k + j;
              const T wj = wn.value[widx];
              const auto [lo, hi] = g.range(j);
              const std::ptrdiff_t off = g.offset(j);
              T acc = 0;
              for (std::size_t t = lo; t < hi; ++t) {
                const auto src = static_cast<std::ptrdiff_t>(t * g.stride) + off;
                acc += dy[t] * xi[src];
                if (dx) dx[xbase + static_cast<std::size_t>(src)] += wj * dy[t];
              }
              if (dw) dw[widx] += acc;
            }
          }
        }
      }
      if (has_bias && self.parents[2]->requires_grad) {
        T* db = self.parents[2]->ensure_grad().data();
        for (std::size_t n = 0; n < g.batch; ++n) {
          for (std::size_t o = 0; o < g.out_ch; ++o) {
            const T* dy = dyv + (n * g.out_ch + o) * g.t_out;
            for (std::size_t t = 0; t < g.t_out; ++t) db[o] += dy[t];
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>(
      x, "relu", [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      x, "sigmoid", [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary<T>(
      x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>(
      x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary<T>(
      x, "square", [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary<T>(
      x, "scale", [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  return unary<T>(
      x, "add_scalar", [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

namespace {

template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, const char* op, F f, DA da, DB db) {
  require_same_shape(a, b, op);
  Tensor<T> out = make_result<T>(a.shape(), op, {a.node(), b.node()});
  auto av = a.values();
  auto bv = b.values();
  auto yv = out.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = f(av[i], bv[i]);
  if (out.requires_grad()) {
    out.node()->backward_fn = [da, db](TensorNode<T>& self) {
      auto& an = *self.parents[0];
      auto& bn = *self.parents[1];
      if (an.requires_grad) {
        auto& g = an.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * da(an.value[i], bn.value[i]);
      }
      if (bn.requires_grad) {
        auto& g = bn.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * db(an.value[i], bn.value[i]);
      }
    };
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  Tensor<T> out = make_result<T>({}, "sum", {x.node()});
  T acc = 0;
  for (T v : x.values()) acc += v;
  out.values()[0] = acc;
  if (out.requires_grad()) {
    out.node()->backward_fn = [](TensorNode<T>& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (auto& v : g) v += self.grad[0];
    };
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    fail(ErrorKind::kShape, "reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  Tensor<T> out = make_result<T>(std::move(shape), "reshape", {x.node()});
  std::copy(x.values().begin(), x.values().end(), out.values().begin());
  if (out.requires_grad()) {
    out.node()->backward_fn = [](TensorNode<T>& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    };
  }
  return out;
}

template <typename T>
Tensor<T> upsample(const Tensor<T>& x, std::size_t factor) {
  if (x.rank() < 1 || factor < 1) fail(ErrorKind::kShape, "upsample: bad input");
  Shape shape = x.shape();
  const std::size_t len = shape.back();
  shape.back() = len * factor;
  const std::size_t rows = x.size() / std::max<std::size_t>(len, 1);
  Tensor<T> out = make_result<T>(shape, "upsample", {x.node()});
  auto xv = x.values();
  auto yv = out.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < len * factor; ++t) yv[r * len * factor + t] = xv[r * len + t / factor];
  }
  if (out.requires_grad()) {
    out.node()->backward_fn = [rows, len, factor](TensorNode<T>& self) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t t = 0; t < len * factor; ++t) g[r * len + t / factor] += self.grad[r * len * factor + t];
      }
    };
  }
  return out;
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), T(0));
    v_.emplace_back(p.size(), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    auto values = params_[p].values();
    const auto grad = params_[p].grad();
    if (grad.empty()) continue;  // never touched by backward: zero gradient
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = config_.lr * (mi / c1) / (std::sqrt(vi / c2) + config_.eps);
      values[i] = static_cast<T>(values[i] - update);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
Tensor<T> he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> values(shape_size(shape));
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(values), true);
}

#define AAD_INSTANTIATE(T)                                                            \
  template class Tensor<T>;                                                           \
  template class Adam<T>;                                                             \
  template void backward<T>(const Tensor<T>&);                                        \
  template Tensor<T> dense<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> conv1d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                               Conv1dOptions);                                        \
  template Tensor<T> relu<T>(const Tensor<T>&);                                       \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                    \
  template Tensor<T> tanh<T>(const Tensor<T>&);                                       \
  template Tensor<T> exp<T>(const Tensor<T>&);                                        \
  template Tensor<T> square<T>(const Tensor<T>&);                                     \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                   \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                              \
  template Tensor<T> sum<T>(const Tensor<T>&);                                        \
  template Tensor<T> mean<T>(const Tensor<T>&);                                       \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                             \
  template Tensor<T> upsample<T>(const Tensor<T>&, std::size_t);                      \
  template Tensor<T> he_uniform<T>(Shape, std::size_t, std::mt19937_64&);

AAD_INSTANTIATE(float)
AAD_INSTANTIATE(double)

#undef AAD_INSTANTIATE

}  // namespace aad
