#include "dio/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dio {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

DenseLayer make_dense(std::size_t in, std::size_t out, Rng& rng) {
  return {kaiming_uniform({in, out}, in, rng), Tensor({out}, 0.0)};
}

ConvLayer make_conv(std::size_t in_c, std::size_t out_c, std::size_t k, Conv2dOptions opts,
                    Rng& rng) {
  return {kaiming_uniform({out_c, in_c, k, k}, in_c * k * k, rng), Tensor({out_c}, 0.0), opts};
}

Tensor deep_copy(const Tensor& t) { return t.clone(); }

void mark_trainable(std::vector<Tensor> params) {
  for (auto& p : params) p.set_requires_grad(true);
}

}  // namespace

Backbone::Backbone(std::vector<Layer> layers, std::size_t feature_dim)
    : layers_(std::move(layers)), feature_dim_(feature_dim) {}

Var Backbone::forward(Graph& g, Var x) const {
  Var h = x;
  if (!layers_.empty() && std::holds_alternative<DenseLayer>(layers_.front()) &&
      h.shape().size() > 2) {
    h = reshape(h, {h.shape()[0], numel(h.shape()) / h.shape()[0]});
  }
  for (const auto& layer : layers_) {
    h = std::visit(
        overloaded{
            [&](const DenseLayer& d) { return add_bias(matmul(h, g.leaf(d.weight)), g.leaf(d.bias)); },
            [&](const ConvLayer& c) {
              return add_bias(conv2d(h, g.leaf(c.weight), c.options), g.leaf(c.bias));
            },
            [&](const ReluLayer&) { return relu(h); },
            [&](const FlattenLayer&) {
              return reshape(h, {h.shape()[0], numel(h.shape()) / h.shape()[0]});
            },
        },
        layer);
  }
  if (h.shape().size() != 2 || h.shape()[1] != feature_dim_)
    throw ShapeError("backbone", h.shape(), Shape{h.shape()[0], feature_dim_});
  return h;
}

std::vector<Tensor> Backbone::parameters() const {
  std::vector<Tensor> out;
  for (const auto& layer : layers_) {
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      out.push_back(d->weight);
      out.push_back(d->bias);
    } else if (auto* c = std::get_if<ConvLayer>(&layer)) {
      out.push_back(c->weight);
      out.push_back(c->bias);
    }
  }
  return out;
}

Var Head::forward(Graph& g, Var z) const {
  return add_bias(matmul(z, g.leaf(weight)), g.leaf(bias));
}

double head_inner_product(const Head& a, const Head& b) {
  if (a.weight.shape() != b.weight.shape())
    throw ShapeError("head_inner_product", a.weight.shape(), b.weight.shape());
  double s = 0.0;
  auto x = a.weight.data();
  auto y = b.weight.data();
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

DioModel::DioModel(ArchSpec arch, Backbone backbone, std::vector<Head> heads)
    : arch_(std::move(arch)), backbone_(std::move(backbone)), heads_(std::move(heads)) {
  if (heads_.empty()) throw std::invalid_argument("DioModel needs at least one head");
  for (const auto& h : heads_) {
    if (h.weight.rank() != 2 || h.bias.rank() != 1 || h.weight.dim(1) != h.bias.dim(0))
      throw ShapeError("head", h.weight.shape(), h.bias.shape());
    if (h.weight.shape() != heads_.front().weight.shape())
      throw ShapeError("head", h.weight.shape(), heads_.front().weight.shape());
    if (h.features() != backbone_.feature_dim())
      throw ShapeError("head", h.weight.shape(), Shape{backbone_.feature_dim()});
  }
  arch_.heads = heads_.size();
}

std::vector<Var> DioModel::forward_all_heads(Graph& g, Var x) const {
  Var z = features(g, x);
  std::vector<Var> out;
  out.reserve(heads_.size());
  for (const auto& h : heads_) out.push_back(h.forward(g, z));
  return out;
}

Var DioModel::forward_head(Graph& g, Var x, std::size_t head) const {
  if (head >= heads_.size())
    throw std::out_of_range("head index " + std::to_string(head) + " >= L=" +
                            std::to_string(heads_.size()));
  return heads_[head].forward(g, features(g, x));
}

Var DioModel::forward_random_head(Graph& g, Var x, Rng& rng, std::size_t* drawn) const {
  const std::size_t i = rng.uniform_index(heads_.size());
  if (drawn) *drawn = i;
  return forward_head(g, x, i);
}

std::vector<Tensor> DioModel::parameters() const {
  auto out = backbone_.parameters();
  for (const auto& h : heads_) {
    out.push_back(h.weight);
    out.push_back(h.bias);
  }
  return out;
}

std::size_t DioModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

std::uint64_t DioModel::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.data().data());
    for (std::size_t i = 0; i < p.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

DioModel DioModel::clone() const {
  std::vector<Layer> layers;
  for (const auto& layer : backbone_.layers()) {
    layers.push_back(std::visit(
        overloaded{
            [](const DenseLayer& d) -> Layer { return DenseLayer{deep_copy(d.weight), deep_copy(d.bias)}; },
            [](const ConvLayer& c) -> Layer {
              return ConvLayer{deep_copy(c.weight), deep_copy(c.bias), c.options};
            },
            [](const ReluLayer& r) -> Layer { return r; },
            [](const FlattenLayer& f) -> Layer { return f; },
        },
        layer));
  }
  std::vector<Head> heads;
  for (const auto& h : heads_) heads.push_back({deep_copy(h.weight), deep_copy(h.bias)});
  DioModel m(arch_, Backbone(std::move(layers), backbone_.feature_dim()), std::move(heads));
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    m.parameters()[i].set_requires_grad(parameters()[i].requires_grad());
  return m;
}

DioModel make_model(const ArchSpec& arch, std::uint64_t seed) {
  if (arch.classes < 2) throw std::invalid_argument("arch: classes must be >= 2");
  if (arch.heads < 1) throw std::invalid_argument("arch: heads must be >= 1");
  if (arch.features < 1) throw std::invalid_argument("arch: features must be >= 1");

  Rng rng(mix_seed(seed, 0));
  std::vector<Layer> layers;
  if (arch.kind == "mlp") {
    if (arch.hidden < 1) throw std::invalid_argument("arch: hidden must be >= 1");
    const std::size_t d = arch.input_dim();
    layers.push_back(make_dense(d, arch.hidden, rng));
    layers.push_back(ReluLayer{});
    layers.push_back(make_dense(arch.hidden, arch.hidden, rng));
    layers.push_back(ReluLayer{});
    layers.push_back(make_dense(arch.hidden, arch.features, rng));
  } else if (arch.kind == "cnn") {
    if (arch.input_shape.size() != 3)
      throw std::invalid_argument("arch: cnn needs input_shape (c,h,w)");
    const std::size_t c = arch.input_shape[0], h = arch.input_shape[1], w = arch.input_shape[2];
    // conv 3x3 pad 1, then conv 3x3 stride 2 pad 1.
    layers.push_back(make_conv(c, arch.conv1_channels, 3, {1, 1}, rng));
    layers.push_back(ReluLayer{});
    layers.push_back(make_conv(arch.conv1_channels, arch.conv2_channels, 3, {2, 1}, rng));
    layers.push_back(ReluLayer{});
    layers.push_back(FlattenLayer{});
    const std::size_t oh = (h + 2 - 3) / 2 + 1, ow = (w + 2 - 3) / 2 + 1;
    layers.push_back(make_dense(arch.conv2_channels * oh * ow, arch.features, rng));
  } else {
    throw std::invalid_argument("unknown architecture '" + arch.kind + "'");
  }
  if (arch.feature_relu) layers.push_back(ReluLayer{});

  std::vector<Head> heads;
  for (std::size_t i = 0; i < arch.heads; ++i) {
    Rng head_rng(mix_seed(seed, 1000 + i));
    auto d = make_dense(arch.features, arch.classes, head_rng);
    heads.push_back({d.weight, d.bias});
  }
  DioModel model(arch, Backbone(std::move(layers), arch.features), std::move(heads));
  mark_trainable(model.parameters());
  return model;
}

DioModel with_heads(const DioModel& model, std::vector<Head> heads) {
  ArchSpec arch = model.arch();
  arch.heads = heads.size();
  return DioModel(arch, model.backbone(), std::move(heads));
}

std::vector<Tensor> predict_all_heads(const DioModel& model, const Tensor& x) {
  Graph g(false);
  auto outs = model.forward_all_heads(g, g.constant(x));
  std::vector<Tensor> res;
  for (auto& o : outs) res.push_back(o.value());
  return res;
}

Tensor predict_head(const DioModel& model, const Tensor& x, std::size_t head) {
  Graph g(false);
  return model.forward_head(g, g.constant(x), head).value();
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  auto x = logits.data();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (x[i * k + j] > x[i * k + best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace dio
