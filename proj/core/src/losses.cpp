#include "dio/losses.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dio {

namespace {
constexpr double kNormFloor = 1e-12;
}

void LossWeights::validate() const {
  if (!std::isfinite(alpha) || alpha < 0) throw std::invalid_argument("alpha must be finite and >= 0");
  if (!std::isfinite(beta) || beta < 0) throw std::invalid_argument("beta must be finite and >= 0");
  if (!std::isfinite(tau) || tau <= 0) throw std::invalid_argument("tau must be finite and > 0");
}

Var classification_loss(std::span<const Var> logits_per_head, std::span<const int> labels) {
  if (logits_per_head.empty()) throw std::invalid_argument("classification_loss: no heads");
  Var total = softmax_cross_entropy(logits_per_head[0], labels);
  for (std::size_t i = 1; i < logits_per_head.size(); ++i)
    total = total + softmax_cross_entropy(logits_per_head[i], labels);
  return total;
}

Var orthogonality_loss(Graph& g, const std::vector<Head>& heads) {
  std::vector<Var> w;
  w.reserve(heads.size());
  for (const auto& h : heads) w.push_back(g.leaf(h.weight));
  Var total = g.constant(Tensor::scalar(0.0));
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (i == j) continue;
      Var p = dot(w[i], w[j]);
      total = total + p * p;
    }
  return total;
}

double orthogonality_value(const std::vector<Head>& heads) {
  double total = 0.0;
  for (std::size_t i = 0; i < heads.size(); ++i)
    for (std::size_t j = 0; j < heads.size(); ++j) {
      if (i == j) continue;
      const double p = head_inner_product(heads[i], heads[j]);
      total += p * p;
    }
  return total;
}

double margin(std::span<const double> z, const Head& head, int y) {
  const std::size_t m = head.features(), k = head.classes();
  if (k < 2) throw std::invalid_argument("margin: need at least 2 classes");
  if (z.size() != m) throw ShapeError("margin", Shape{z.size()}, head.weight.shape());
  if (y < 0 || static_cast<std::size_t>(y) >= k) throw std::out_of_range("margin: label out of range");
  auto w = head.weight.data();
  auto b = head.bias.data();
  std::vector<double> logits(k);
  for (std::size_t j = 0; j < k; ++j) {
    double s = b[j];
    for (std::size_t r = 0; r < m; ++r) s += w[r * k + j] * z[r];
    logits[j] = s;
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    if (j == static_cast<std::size_t>(y)) continue;
    double norm2 = 0.0;
    for (std::size_t r = 0; r < m; ++r) norm2 += w[r * k + j] * w[r * k + j];
    if (norm2 == 0.0)
      throw std::invalid_argument("margin: column " + std::to_string(j) + " has zero norm");
    best = std::min(best, std::fabs(logits[j] - logits[static_cast<std::size_t>(y)]) / std::sqrt(norm2));
  }
  return best;
}

Var head_margin_loss(Var logits, Var weight, std::span<const int> labels, double tau) {
  Graph& g = logits.graph();
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != n) throw ShapeError("margin_loss", logits.shape(), Shape{labels.size()});
  if (k < 2) throw std::invalid_argument("margin_loss: need at least 2 classes");
  const auto pred = argmax_rows(logits.value());

  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < n; ++i)
    if (pred[i] == labels[i]) correct.push_back(i);
  if (correct.empty()) return g.constant(Tensor::scalar(0.0));

  const std::size_t nc = correct.size(), kc = k - 1;
  std::vector<std::size_t> true_idx, other_idx, col_idx;
  true_idx.reserve(nc * kc);
  other_idx.reserve(nc * kc);
  col_idx.reserve(nc * kc);
  auto lv = logits.value().data();
  for (std::size_t r : correct) {
    const auto y = static_cast<std::size_t>(labels[r]);
    for (std::size_t j = 0; j < k; ++j) {
      if (j == y) continue;
      // Correctly classified with argmax ties broken low; a positive gap is
      // what makes |h_j - h_y| equal h_y - h_j below.
      if (!(lv[r * k + y] >= lv[r * k + j]))
        throw std::logic_error("margin_loss: filtered sample is not correctly classified");
      true_idx.push_back(r * k + y);
      other_idx.push_back(r * k + j);
      col_idx.push_back(j);
    }
  }
  const Shape grid{nc, kc};
  Var ly = gather(logits, true_idx, grid);
  Var lj = gather(logits, other_idx, grid);
  Var col_norms = add_scalar(sqrt(sum_rows(weight * weight)), kNormFloor);
  Var norms = gather(col_norms, col_idx, grid);
  Var gaps = abs(lj - ly) / norms;
  Var d = row_min(gaps);
  Var hinge = relu(add_scalar(scale(d, -1.0), tau));
  return mean(hinge);
}

Var margin_loss(Graph& g, const DioModel& model, std::size_t head_index, Var x,
                std::span<const int> labels, double tau) {
  if (head_index >= model.num_heads()) throw std::out_of_range("margin_loss: head index");
  const Head& h = model.heads()[head_index];
  Var z = model.features(g, x);
  Var w = g.leaf(h.weight);
  Var logits = add_bias(matmul(z, w), g.leaf(h.bias));
  return head_margin_loss(logits, w, labels, tau);
}

Objective total_objective(Graph& g, const DioModel& model, Var x, std::span<const int> labels,
                          const LossWeights& weights) {
  weights.validate();
  Var z = model.features(g, x);
  const auto& heads = model.heads();
  const std::size_t L = heads.size();

  std::vector<Var> logits;
  std::vector<Var> ws;
  for (const auto& h : heads) {
    Var w = g.leaf(h.weight);
    ws.push_back(w);
    logits.push_back(add_bias(matmul(z, w), g.leaf(h.bias)));
  }
  Var lc = classification_loss(logits, labels);

  Var lo = g.constant(Tensor::scalar(0.0));
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < L; ++j) {
      if (i == j) continue;
      Var p = dot(ws[i], ws[j]);
      lo = lo + p * p;
    }

  Var ld = head_margin_loss(logits[0], ws[0], labels, weights.tau);
  for (std::size_t i = 1; i < L; ++i) ld = ld + head_margin_loss(logits[i], ws[i], labels, weights.tau);
  ld = scale(ld, 1.0 / static_cast<double>(L));

  Var total = lc + scale(lo, weights.alpha) + scale(ld, weights.beta);
  Objective out;
  out.total = total;
  out.values.classification = lc.value().item();
  out.values.orthogonality = lo.value().item();
  out.values.margin = ld.value().item();
  out.values.total = total.value().item();
  return out;
}

std::string to_csv_row(std::size_t epoch, std::size_t step, const LossBreakdown& b) {
  // Shortest form that parses back to the same double.
  auto num = [](double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  return std::to_string(epoch) + ',' + std::to_string(step) + ',' + num(b.classification) + ',' +
         num(b.orthogonality) + ',' + num(b.margin) + ',' + num(b.total);
}

}  // namespace dio
