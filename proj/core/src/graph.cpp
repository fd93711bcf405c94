#include "dio/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dio {

namespace {

thread_local std::size_t g_backward_calls = 0;

void require_same(const char* op, const Var& a, const Var& b) {
  if (&a.graph() != &b.graph())
    throw GradError(std::string(op) + ": operands live on different graphs");
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.shape().size() != rank) throw ShapeError(op, a.shape(), Shape(rank, 1));
}

template <typename F>
Var unary(Var a, Tensor out, F local_grad) {
  Graph& g = a.graph();
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia},
                  [ia, local_grad](std::span<const double> go, Graph& gr) {
                    auto ga = gr.grad_buffer(ia);
                    const auto x = gr.value(ia).data();
                    for (std::size_t i = 0; i < go.size(); ++i)
                      ga[i] += go[i] * local_grad(x[i]);
                  });
}

template <typename F>
Tensor map(const Tensor& t, F f) {
  Tensor out(t.shape());
  auto o = out.data();
  auto x = t.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = f(x[i]);
  return out;
}

}  // namespace

const Tensor& Var::value() const { return graph().value(id_); }

Graph& Var::graph() const {
  if (!graph_) throw GradError("use of an unbound Var");
  return *graph_;
}

std::size_t Graph::backward_calls() noexcept { return g_backward_calls; }

void Graph::ensure_open() const {
  if (consumed_) throw GradError("graph already consumed by backward()");
}

Var Graph::leaf(const Tensor& t) {
  ensure_open();
  if (!t.valid()) throw GradError("leaf from empty tensor");
  Node n;
  n.value = t;
  n.needs_grad = tracking_ && t.requires_grad();
  if (n.needs_grad) n.leaf = t;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::variable(const Tensor& t) {
  ensure_open();
  if (!t.valid()) throw GradError("variable from empty tensor");
  Node n;
  n.value = t;
  n.needs_grad = true;
  n.leaf = t;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor t) {
  ensure_open();
  if (!t.valid()) throw GradError("constant from empty tensor");
  Node n;
  n.value = std::move(t);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs,
                  BackwardFn fn) {
  ensure_open();
  Node n;
  n.value = std::move(value);
  n.needs_grad = std::any_of(inputs.begin(), inputs.end(),
                             [this](std::size_t i) { return nodes_[i].needs_grad; });
  if (n.needs_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

std::span<double> Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw GradError("loss belongs to another graph");
  ensure_open();
  if (loss.size() != 1)
    throw GradError("backward() needs a scalar loss, got shape " +
                    to_string(loss.shape()));
  ++g_backward_calls;
  consumed_ = true;

  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
    n.backward(n.grad, *this);
  }
  for (auto& n : nodes_) {
    if (!n.leaf.valid()) continue;
    auto dst = n.leaf.mutable_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += n.grad[i];
  }
}

// ---------------------------------------------------------------------------
// Elementwise

Var operator+(Var a, Var b) {
  require_same("add", a, b);
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.value().data();
  auto y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {ia, ib},
                          [ia, ib](std::span<const double> go, Graph& g) {
                            for (auto id : {ia, ib}) {
                              if (!g.needs_grad(id)) continue;
                              auto gi = g.grad_buffer(id);
                              for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
                            }
                          });
}

Var operator-(Var a, Var b) {
  require_same("sub", a, b);
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.value().data();
  auto y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {ia, ib},
                          [ia, ib](std::span<const double> go, Graph& g) {
                            if (g.needs_grad(ia)) {
                              auto ga = g.grad_buffer(ia);
                              for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                            }
                            if (g.needs_grad(ib)) {
                              auto gb = g.grad_buffer(ib);
                              for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
                            }
                          });
}

Var operator*(Var a, Var b) {
  require_same("mul", a, b);
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.value().data();
  auto y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {ia, ib},
                          [ia, ib](std::span<const double> go, Graph& g) {
                            auto x = g.value(ia).data();
                            auto y = g.value(ib).data();
                            if (g.needs_grad(ia)) {
                              auto ga = g.grad_buffer(ia);
                              for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i];
                            }
                            if (g.needs_grad(ib)) {
                              auto gb = g.grad_buffer(ib);
                              for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * x[i];
                            }
                          });
}

Var operator/(Var a, Var b) {
  require_same("div", a, b);
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.value().data();
  auto y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] / y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {ia, ib},
                          [ia, ib](std::span<const double> go, Graph& g) {
                            auto x = g.value(ia).data();
                            auto y = g.value(ib).data();
                            if (g.needs_grad(ia)) {
                              auto ga = g.grad_buffer(ia);
                              for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / y[i];
                            }
                            if (g.needs_grad(ib)) {
                              auto gb = g.grad_buffer(ib);
                              for (std::size_t i = 0; i < go.size(); ++i)
                                gb[i] -= go[i] * x[i] / (y[i] * y[i]);
                            }
                          });
}

Var operator-(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
  return unary(a, map(a.value(), [c](double v) { return c * v; }),
               [c](double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary(a, map(a.value(), [c](double v) { return v + c; }),
               [](double) { return 1.0; });
}

Var relu(Var a) {
  return unary(a, map(a.value(), [](double v) { return v > 0 ? v : 0.0; }),
               [](double v) { return v > 0 ? 1.0 : 0.0; });
}

Var abs(Var a) {
  // Subgradient 0 at the kink.
  return unary(a, map(a.value(), [](double v) { return std::fabs(v); }),
               [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var tanh(Var a) {
  return unary(a, map(a.value(), [](double v) { return std::tanh(v); }),
               [](double v) {
                 const double t = std::tanh(v);
                 return 1.0 - t * t;
               });
}

Var sqrt(Var a) {
  return unary(a, map(a.value(), [](double v) { return std::sqrt(v); }),
               [](double v) { return 0.5 / std::sqrt(v); });
}

Var clamp(Var a, double lo, double hi) {
  return unary(a,
               map(a.value(), [lo, hi](double v) { return std::clamp(v, lo, hi); }),
               [lo, hi](double v) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw GradError("matmul: operands live on different graphs");
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul", a.shape(), b.shape());
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  Tensor out({n, m});
  {
    auto o = out.data();
    auto x = a.value().data();
    auto y = b.value().data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double xv = x[i * k + p];
        if (xv == 0.0) continue;
        const double* yr = &y[p * m];
        double* orow = &o[i * m];
        for (std::size_t j = 0; j < m; ++j) orow[j] += xv * yr[j];
      }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(
      std::move(out), {ia, ib}, [ia, ib, n, k, m](std::span<const double> go, Graph& g) {
        auto x = g.value(ia).data();
        auto y = g.value(ib).data();
        if (g.needs_grad(ia)) {
          // dA = dO * B^T
          auto ga = g.grad_buffer(ia);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < m; ++j) acc += go[i * m + j] * y[p * m + j];
              ga[i * k + p] += acc;
            }
        }
        if (g.needs_grad(ib)) {
          // dB = A^T * dO
          auto gb = g.grad_buffer(ib);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double xv = x[i * k + p];
              if (xv == 0.0) continue;
              for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += xv * go[i * m + j];
            }
        }
      });
}

Var transpose(Var a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  Tensor out({c, r});
  auto o = out.data();
  auto x = a.value().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) o[j * r + i] = x[i * c + j];
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {ia},
                          [ia, r, c](std::span<const double> go, Graph& g) {
                            auto ga = g.grad_buffer(ia);
                            for (std::size_t i = 0; i < r; ++i)
                              for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j * r + i];
                          });
}

Var add_bias(Var a, Var bias) {
  if (&a.graph() != &bias.graph()) throw GradError("add_bias: operands live on different graphs");
  const Shape& s = a.shape();
  if (bias.shape().size() != 1) throw ShapeError("add_bias", s, bias.shape());
  const std::size_t nb = bias.shape()[0];
  std::size_t outer = 0, inner = 0;
  if (s.size() == 2 && s[1] == nb) {
    outer = s[0];
    inner = 1;
  } else if (s.size() == 4 && s[1] == nb) {
    outer = s[0];
    inner = s[2] * s[3];
  } else {
    throw ShapeError("add_bias", s, bias.shape());
  }
  Tensor out = a.value().clone();
  {
    auto o = out.data();
    auto b = bias.value().data();
    for (std::size_t n = 0; n < outer; ++n)
      for (std::size_t c = 0; c < nb; ++c) {
        double* p = &o[(n * nb + c) * inner];
        for (std::size_t t = 0; t < inner; ++t) p[t] += b[c];
      }
  }
  const std::size_t ia = a.id(), ib = bias.id();
  return a.graph().record(std::move(out), {ia, ib},
                          [ia, ib, outer, nb, inner](std::span<const double> go, Graph& g) {
                            if (g.needs_grad(ia)) {
                              auto ga = g.grad_buffer(ia);
                              for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                            }
                            if (g.needs_grad(ib)) {
                              auto gb = g.grad_buffer(ib);
                              for (std::size_t n = 0; n < outer; ++n)
                                for (std::size_t c = 0; c < nb; ++c) {
                                  const double* p = &go[(n * nb + c) * inner];
                                  double acc = 0.0;
                                  for (std::size_t t = 0; t < inner; ++t) acc += p[t];
                                  gb[c] += acc;
                                }
                            }
                          });
}

Var conv2d(Var x, Var w, Conv2dOptions opts) {
  if (&x.graph() != &w.graph()) throw GradError("conv2d: operands live on different graphs");
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1] || opts.stride == 0)
    throw ShapeError("conv2d", xs, ws);
  const std::size_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const std::size_t O = ws[0], KH = ws[2], KW = ws[3];
  const std::size_t S = opts.stride, P = opts.padding;
  if (H + 2 * P < KH || W + 2 * P < KW) throw ShapeError("conv2d", xs, ws);
  const std::size_t OH = (H + 2 * P - KH) / S + 1;
  const std::size_t OW = (W + 2 * P - KW) / S + 1;

  // Visits every (output, input, weight) index triple that contributes.
  auto for_each_tap = [=](auto&& f) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t oy = 0; oy < OH; ++oy)
          for (std::size_t ox = 0; ox < OW; ++ox) {
            const std::size_t out_idx = ((n * O + o) * OH + oy) * OW + ox;
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t ky = 0; ky < KH; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * S + ky) -
                                          static_cast<std::ptrdiff_t>(P);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t kx = 0; kx < KW; ++kx) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * S + kx) -
                                            static_cast<std::ptrdiff_t>(P);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                  const std::size_t in_idx =
                      ((n * C + c) * H + static_cast<std::size_t>(iy)) * W +
                      static_cast<std::size_t>(ix);
                  const std::size_t w_idx = ((o * C + c) * KH + ky) * KW + kx;
                  f(out_idx, in_idx, w_idx);
                }
              }
          }
  };

  Tensor out({N, O, OH, OW});
  {
    auto od = out.data();
    auto xd = x.value().data();
    auto wd = w.value().data();
    for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) { od[oi] += xd[ii] * wd[wi]; });
  }
  const std::size_t ix_ = x.id(), iw = w.id();
  return x.graph().record(
      std::move(out), {ix_, iw}, [ix_, iw, for_each_tap](std::span<const double> go, Graph& g) {
        auto xd = g.value(ix_).data();
        auto wd = g.value(iw).data();
        const bool gx = g.needs_grad(ix_), gw = g.needs_grad(iw);
        std::span<double> gxb, gwb;
        if (gx) gxb = g.grad_buffer(ix_);
        if (gw) gwb = g.grad_buffer(iw);
        for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) {
          if (gx) gxb[ii] += go[oi] * wd[wi];
          if (gw) gwb[wi] += go[oi] * xd[ii];
        });
      });
}

Var reshape(Var a, Shape shape) {
  if (numel(shape) != a.size()) throw ShapeError("reshape", a.shape(), shape);
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {ia}, [ia](std::span<const double> go, Graph& g) {
    auto ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.graph().record(Tensor::scalar(s), {ia}, [ia](std::span<const double> go, Graph& g) {
    auto ga = g.grad_buffer(ia);
    for (auto& v : ga) v += go[0];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.graph().record(Tensor::scalar(s / n), {ia},
                          [ia, n](std::span<const double> go, Graph& g) {
                            auto ga = g.grad_buffer(ia);
                            for (auto& v : ga) v += go[0] / n;
                          });
}

Var l2_norm(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v * v;
  const double norm = std::sqrt(s);
  const std::size_t ia = a.id();
  return a.graph().record(Tensor::scalar(norm), {ia},
                          [ia, norm](std::span<const double> go, Graph& g) {
                            if (norm == 0.0) return;  // subgradient 0
                            auto ga = g.grad_buffer(ia);
                            auto x = g.value(ia).data();
                            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[0] * x[i] / norm;
                          });
}

Var dot(Var a, Var b) {
  require_same("dot", a, b);
  double s = 0.0;
  auto x = a.value().data();
  auto y = b.value().data();
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(Tensor::scalar(s), {ia, ib},
                          [ia, ib](std::span<const double> go, Graph& g) {
                            auto x = g.value(ia).data();
                            auto y = g.value(ib).data();
                            if (g.needs_grad(ia)) {
                              auto ga = g.grad_buffer(ia);
                              for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[0] * y[i];
                            }
                            if (g.needs_grad(ib)) {
                              auto gb = g.grad_buffer(ib);
                              for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[0] * x[i];
                            }
                          });
}

namespace {

template <typename Better>
Var extremum(Var a, Better better) {
  auto x = a.value().data();
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (better(x[i], x[best])) best = i;
  const std::size_t ia = a.id();
  return a.graph().record(Tensor::scalar(x[best]), {ia},
                          [ia, best](std::span<const double> go, Graph& g) {
                            g.grad_buffer(ia)[best] += go[0];
                          });
}

template <typename Better>
Var row_extremum(const char* op, Var a, Better better) {
  require_rank(op, a, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1];
  auto x = a.value().data();
  std::vector<std::size_t> arg(n);
  Tensor out({n});
  auto o = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (better(x[i * k + j], x[i * k + best])) best = j;
    arg[i] = i * k + best;
    o[i] = x[arg[i]];
  }
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {ia},
                          [ia, arg = std::move(arg)](std::span<const double> go, Graph& g) {
                            auto ga = g.grad_buffer(ia);
                            for (std::size_t i = 0; i < arg.size(); ++i) ga[arg[i]] += go[i];
                          });
}

}  // namespace

Var max(Var a) { return extremum(a, [](double x, double y) { return x > y; }); }
Var min(Var a) { return extremum(a, [](double x, double y) { return x < y; }); }
Var row_max(Var a) { return row_extremum("row_max", a, [](double x, double y) { return x > y; }); }
Var row_min(Var a) { return row_extremum("row_min", a, [](double x, double y) { return x < y; }); }

Var sum_rows(Var a) {
  require_rank("sum_rows", a, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1];
  Tensor out({k});
  auto o = out.data();
  auto x = a.value().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) o[j] += x[i * k + j];
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {ia}, [ia, n, k](std::span<const double> go, Graph& g) {
    auto ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j) ga[i * k + j] += go[j];
  });
}

Var row_sum(Var a) {
  require_rank("row_sum", a, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1];
  Tensor out({n});
  auto o = out.data();
  auto x = a.value().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) o[i] += x[i * k + j];
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {ia}, [ia, n, k](std::span<const double> go, Graph& g) {
    auto ga = g.grad_buffer(ia);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j) ga[i * k + j] += go[i];
  });
}

Var gather(Var a, std::vector<std::size_t> indices, Shape shape) {
  if (shape.empty()) shape = {indices.size()};
  if (numel(shape) != indices.size() || indices.empty())
    throw ShapeError("gather", a.shape(), shape);
  const std::size_t n = a.size();
  Tensor out(std::move(shape));
  auto o = out.data();
  auto x = a.value().data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= n) throw ShapeError("gather", a.shape(), Shape{indices[i] + 1});
    o[i] = x[indices[i]];
  }
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {ia},
                          [ia, idx = std::move(indices)](std::span<const double> go, Graph& g) {
                            auto ga = g.grad_buffer(ia);
                            for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += go[i];
                          });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  require_rank("softmax_cross_entropy", logits, 2);
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != n)
    throw ShapeError("softmax_cross_entropy", logits.shape(), Shape{labels.size()});
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) +
                              " outside [0," + std::to_string(k) + ")");
  auto x = logits.value().data();
  std::vector<double> probs(n * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &x[i * k];
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      probs[i * k + j] = std::exp(row[j] - mx);
      z += probs[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] /= z;
    const auto y = static_cast<std::size_t>(labels[i]);
    loss += -(row[y] - mx - std::log(z));
  }
  loss /= static_cast<double>(n);
  std::vector<int> ys(labels.begin(), labels.end());
  const std::size_t ia = logits.id();
  return logits.graph().record(
      Tensor::scalar(loss), {ia},
      [ia, n, k, probs = std::move(probs), ys = std::move(ys)](std::span<const double> go,
                                                               Graph& g) {
        auto ga = g.grad_buffer(ia);
        const double s = go[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const double target = (static_cast<std::size_t>(ys[i]) == j) ? 1.0 : 0.0;
            ga[i * k + j] += s * (probs[i * k + j] - target);
          }
      });
}

}  // namespace dio
