#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "dio/graph.hpp"
#include "dio/rng.hpp"

namespace dio {

/// Architecture description; everything needed to rebuild a model's shape.
struct ArchSpec {
  std::string kind = "mlp";  // "mlp" | "cnn"
  Shape input_shape{20};     // (d) for mlp, (c,h,w) for cnn
  std::size_t hidden = 64;   // mlp hidden width; cnn dense width unused
  std::size_t features = 32; // m
  std::size_t classes = 4;   // K
  std::size_t heads = 1;     // L
  bool feature_relu = false; // ReLU on z
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;

  std::size_t input_dim() const { return numel(input_shape); }
  bool operator==(const ArchSpec&) const = default;
};

struct DenseLayer {
  Tensor weight;  // (in, out)
  Tensor bias;    // (out)
};

struct ConvLayer {
  Tensor weight;  // (out_c, in_c, k, k)
  Tensor bias;    // (out_c)
  Conv2dOptions options;
};

struct ReluLayer {};
struct FlattenLayer {};

using Layer = std::variant<DenseLayer, ConvLayer, ReluLayer, FlattenLayer>;

/// Feature extractor g: R^d -> R^m.
class Backbone {
 public:
  Backbone() = default;
  Backbone(std::vector<Layer> layers, std::size_t feature_dim);

  /// x is (batch, d...) ; returns (batch, m).
  Var forward(Graph& g, Var x) const;
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Tensor> parameters() const;

 private:
  std::vector<Layer> layers_;
  std::size_t feature_dim_ = 0;
};

/// Linear head h(z) = W^T z + b with W of shape (m, K); column j is the
/// hyperplane of class j.
struct Head {
  Tensor weight;  // (m, K)
  Tensor bias;    // (K)

  Var forward(Graph& g, Var z) const;
  std::size_t features() const { return weight.dim(0); }
  std::size_t classes() const { return weight.dim(1); }
};

/// <vec(W_i), vec(W_j)>; biases are not part of the inner product.
double head_inner_product(const Head& a, const Head& b);

/// Shared backbone with L parallel linear heads.
class DioModel {
 public:
  DioModel() = default;
  DioModel(ArchSpec arch, Backbone backbone, std::vector<Head> heads);

  const ArchSpec& arch() const noexcept { return arch_; }
  const Backbone& backbone() const noexcept { return backbone_; }
  const std::vector<Head>& heads() const noexcept { return heads_; }
  std::size_t num_heads() const noexcept { return heads_.size(); }
  std::size_t num_classes() const { return heads_.front().classes(); }

  Var features(Graph& g, Var x) const { return backbone_.forward(g, x); }
  /// Backbone runs once; element i is h_i(g(x)).
  std::vector<Var> forward_all_heads(Graph& g, Var x) const;
  Var forward_head(Graph& g, Var x, std::size_t head) const;
  /// Draws one head uniformly for the whole batch; the index is written to
  /// *drawn when given. No ensembling.
  Var forward_random_head(Graph& g, Var x, Rng& rng, std::size_t* drawn = nullptr) const;

  /// Backbone parameters in layer order, then W_1, b_1, ..., W_L, b_L.
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
  /// FNV-1a over the raw bytes of every parameter.
  std::uint64_t checksum() const;
  /// Deep copy with independent storage.
  DioModel clone() const;

 private:
  ArchSpec arch_;
  Backbone backbone_;
  std::vector<Head> heads_;
};

/// Builds a freshly initialized model: Kaiming-uniform fan-in weights
/// (bound sqrt(6 / fan_in)), zero biases, each head from its own seed.
/// Throws std::invalid_argument for an unknown kind or bad dimensions.
DioModel make_model(const ArchSpec& arch, std::uint64_t seed);

/// Model with the given heads replaced (used by tests and by the
/// single-head extraction in adaptive attacks).
DioModel with_heads(const DioModel& model, std::vector<Head> heads);

/// Logits of every head for a constant input batch (no gradient tracking).
std::vector<Tensor> predict_all_heads(const DioModel& model, const Tensor& x);
Tensor predict_head(const DioModel& model, const Tensor& x, std::size_t head);

/// Argmax per row of a (n,K) logit tensor; ties -> lowest class.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace dio
