#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "dio/grad_check.hpp"
#include "dio/losses.hpp"
#include "helpers.hpp"

using namespace dio;

namespace {

constexpr double kTol = 1e-10;

Head make_head(Tensor w, Tensor b) { return Head{std::move(w), std::move(b)}; }

DioModel identity_model(std::vector<Head> heads) {
  const std::size_t d = heads.front().features();
  ArchSpec arch;
  arch.input_shape = {d};
  arch.features = d;
  arch.classes = heads.front().classes();
  return DioModel(arch, Backbone({}, d), std::move(heads));
}

// Reference CE by log-sum-exp, independent of the graph code.
double ce_ref(const std::vector<double>& logits, std::size_t k, int y) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - mx);
  (void)k;
  return mx + std::log(s) - logits[static_cast<std::size_t>(y)];
}

std::vector<double> head_logits_ref(const Head& h, const std::vector<double>& z) {
  const std::size_t m = h.features(), k = h.classes();
  std::vector<double> out(k);
  for (std::size_t j = 0; j < k; ++j) {
    out[j] = h.bias[j];
    for (std::size_t r = 0; r < m; ++r) out[j] += h.weight[r * k + j] * z[r];
  }
  return out;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("classification loss") {
  Graph g;
  std::vector<int> y{2, 7};
  Var uniform = g.constant(Tensor({2, 10}, 0.3));
  std::vector<Var> two{uniform, uniform};
  CHECK(std::abs(classification_loss(two, y).value().item() - 2 * std::log(10.0)) < kTol);

  Rng rng(1);
  Var logits = g.constant(test::random_tensor({2, 10}, rng));
  std::vector<Var> one{logits};
  std::vector<Var> three{logits, logits, logits};
  const double single = softmax_cross_entropy(logits, y).value().item();
  CHECK(std::abs(classification_loss(one, y).value().item() - single) < kTol);
  CHECK(std::abs(classification_loss(three, y).value().item() - 3 * single) < kTol);
}

TEST_CASE("orthogonality loss") {
  Head a = make_head(Tensor::matrix(1, 2, {1, 0}), Tensor({2}));
  Head b = make_head(Tensor::matrix(1, 2, {0, 1}), Tensor({2}));
  Head c = make_head(Tensor::matrix(1, 2, {1, 1}), Tensor({2}));
  Graph g;
  CHECK(orthogonality_loss(g, {a}).value().item() == 0.0);
  CHECK(std::abs(orthogonality_loss(g, {a, b}).value().item()) < kTol);
  CHECK(std::abs(orthogonality_loss(g, {c, c}).value().item() - 8.0) < kTol);
  CHECK(std::abs(orthogonality_value({c, c}) - 8.0) < kTol);

  // Three heads: every ordered pair counted.
  Head d = make_head(Tensor::matrix(1, 2, {2, -1}), Tensor({2}));
  const double ac = 1, ad = 2, cd = 1;
  const double expect = 2 * (ac * ac + ad * ad + cd * cd);
  CHECK(std::abs(orthogonality_loss(g, {a, c, d}).value().item() - expect) < kTol);
}

TEST_CASE("margin") {
  Head eye = make_head(Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor({2}));
  std::vector<double> z{3, 1};
  CHECK(std::abs(margin(z, eye, 0) - 2.0) < kTol);

  Head scaled = make_head(Tensor::matrix(2, 2, {1, 0, 0, 2}), Tensor({2}));
  CHECK(std::abs(margin(z, scaled, 0) - 0.5) < kTol);

  // K=3, unit columns, logits (6, 4, 1): gaps 2 and 5.
  Head three = make_head(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}), Tensor({3}));
  std::vector<double> z3{6, 4, 1};
  CHECK(std::abs(margin(z3, three, 0) - 2.0) < kTol);

  Head one_class = make_head(Tensor::matrix(2, 1, {1, 1}), Tensor({1}));
  CHECK_THROWS_AS(margin(z, one_class, 0), std::invalid_argument);
  Head zero_col = make_head(Tensor::matrix(2, 2, {1, 0, 0, 0}), Tensor({2}));
  CHECK_THROWS_AS(margin(z, zero_col, 0), std::invalid_argument);
}

TEST_CASE("margin loss") {
  Head scaled = make_head(Tensor::matrix(2, 2, {1, 0, 0, 2}), Tensor({2}));
  DioModel m = identity_model({scaled});
  std::vector<int> y{0};
  Graph g;
  Var x = g.constant(Tensor::matrix(1, 2, {3, 1}));
  // D = 0.5, tau = 2
  CHECK(std::abs(margin_loss(g, m, 0, x, y, 2.0).value().item() - 1.5) < kTol);
  // saturated hinge
  CHECK(margin_loss(g, m, 0, x, y, 0.4).value().item() == 0.0);
  // nothing correctly classified
  std::vector<int> wrong{1};
  CHECK(margin_loss(g, m, 0, x, wrong, 2.0).value().item() == 0.0);

  // Mixed batch: only correct rows enter the mean.
  Head eye = make_head(Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor({2}));
  DioModel e = identity_model({eye});
  Var xb = g.constant(Tensor::matrix(3, 2, {3, 1, 0.2, 0, 1, 2}));
  std::vector<int> yb{0, 0, 0};
  // rows 0 and 1 correct with D = 2 and 0.2; row 2 wrong
  const double expect = (std::max(0.0, 1.0 - 2.0) + (1.0 - 0.2)) / 2.0;
  CHECK(std::abs(margin_loss(g, e, 0, xb, yb, 1.0).value().item() - expect) < kTol);
  CHECK_THROWS_AS(margin_loss(g, e, 1, xb, yb, 1.0), std::out_of_range);
}

TEST_CASE("total objective against a hand computation") {
  Head h1 = make_head(Tensor::matrix(2, 3, {1, 0, -0.5, 0.2, 1, 0.3}), Tensor::vector({0.1, 0, -0.1}));
  Head h2 = make_head(Tensor::matrix(2, 3, {0.5, -1, 0.1, 1, 0.4, -0.2}), Tensor::vector({0, 0.2, 0}));
  DioModel m = identity_model({h1, h2});
  const std::vector<std::vector<double>> xs{{2, 0.5}, {-1, 1.5}, {0.3, -0.4}};
  std::vector<int> y{0, 1, 2};
  Tensor x({3, 2});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t r = 0; r < 2; ++r) x[i * 2 + r] = xs[i][r];

  const LossWeights w{0.1, 0.1, 1.5};
  double lc = 0.0, ld = 0.0;
  for (const Head* h : {&h1, &h2}) {
    double ce = 0.0, hinge = 0.0;
    int correct = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      auto l = head_logits_ref(*h, xs[i]);
      ce += ce_ref(l, 3, y[i]);
      std::size_t arg = 0;
      for (std::size_t j = 1; j < 3; ++j)
        if (l[j] > l[arg]) arg = j;
      if (static_cast<int>(arg) == y[i]) {
        ++correct;
        hinge += std::max(0.0, w.tau - margin(xs[i], *h, y[i]));
      }
    }
    lc += ce / 3.0;
    if (correct > 0) ld += hinge / correct;
  }
  ld /= 2.0;
  const double ip = head_inner_product(h1, h2);
  const double lo = 2 * ip * ip;

  Graph g;
  Objective obj = total_objective(g, m, g.constant(x), y, w);
  CHECK(std::abs(obj.values.classification - lc) < kTol);
  CHECK(std::abs(obj.values.orthogonality - lo) < kTol);
  CHECK(std::abs(obj.values.margin - ld) < kTol);
  CHECK(std::abs(obj.values.total - (lc + 0.1 * lo + 0.1 * ld)) < kTol);
  CHECK(std::abs(obj.total.value().item() - obj.values.total) < 1e-12);

  Graph g0;
  Objective plain = total_objective(g0, m, g0.constant(x), y, LossWeights{0, 0, 1});
  CHECK(plain.values.total == plain.values.classification);
}

TEST_CASE("weights validation") {
  CHECK_THROWS_AS(LossWeights({-1, 0, 1}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(LossWeights({0, 0, 0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(LossWeights({0, NAN, 1}).validate(), std::invalid_argument);
}

TEST_CASE("full objective gradient on a non-degenerate point") {
  ArchSpec arch;
  arch.heads = 3;
  arch.hidden = 10;
  arch.features = 6;
  DioModel m = make_model(arch, 21);
  Rng rng(2);
  Tensor x = test::random_tensor({8, 20}, rng, 0, 1);
  std::vector<int> y{0, 1, 2, 3, 0, 1, 2, 3};
  // Relabel to the current predictions of head 0 so the margin term is
  // active on every row and every hinge sits strictly inside (tau large).
  Tensor l0 = predict_head(m, x, 0);
  auto pred = argmax_rows(l0);
  for (std::size_t i = 0; i < 8; ++i) y[i] = pred[i];
  const LossWeights w{0.1, 0.1, 50.0};
  auto loss = [&](Graph& g) { return total_objective(g, m, g.constant(x), y, w).total; };
  CHECK(grad_check_params(loss, m.parameters()) < 1e-4);
}

TEST_CASE("csv row") {
  LossBreakdown b{1.5, 0.25, 0.125, 1.5375};
  CHECK(to_csv_row(2, 7, b) == "2,7,1.5,0.25,0.125,1.5375");
}

}
