#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "dio/grad_check.hpp"
#include "dio/graph.hpp"
#include "helpers.hpp"

using namespace dio;
using dio::test::random_tensor;

namespace {

// Values kept away from kinks (0 for relu/abs, bounds for clamp) and ties.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng, 0.2, 1.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    if (rng.uniform() < 0.5) t[i] = -t[i];
  return t;
}

double check(const ScalarFn& fn, const Tensor& point) {
  return grad_check(fn, point).max_relative_error;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("forward examples") {
  Graph g;
  Var id = g.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  Var v = g.constant(Tensor::matrix(2, 1, {3, 4}));
  Var mv = matmul(id, v);
  CHECK(mv.value()[0] == 3);
  CHECK(mv.value()[1] == 4);

  Var r = relu(g.constant(Tensor::vector({-1, 0, 2})));
  CHECK(r.value()[0] == 0);
  CHECK(r.value()[1] == 0);
  CHECK(r.value()[2] == 2);

  std::vector<int> y{3};
  Var ce = softmax_cross_entropy(g.constant(Tensor({1, 10}, 0.7)), y);
  CHECK(ce.value().item() == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  CHECK(ce.value().item() == doctest::Approx(2.302585).epsilon(1e-6));
}

TEST_CASE("backward examples") {
  Tensor w = Tensor::vector({1, 2});
  w.set_requires_grad(true);
  {
    Graph g;
    Var x = g.leaf(w);
    g.backward(sum(x * x));
  }
  CHECK(w.grad()[0] == doctest::Approx(2));
  CHECK(w.grad()[1] == doctest::Approx(4));

  Tensor u({4}, 1.0);
  u.set_requires_grad(true);
  Graph g;
  g.backward(mean(g.leaf(u)));
  for (double v : u.grad()) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("gradients accumulate into leaves across graphs") {
  Tensor w = Tensor::vector({1, 2});
  w.set_requires_grad(true);
  for (int k = 0; k < 2; ++k) {
    Graph g;
    g.backward(sum(g.leaf(w)));
  }
  CHECK(w.grad()[0] == 2);
}

TEST_CASE("shared subexpressions sum their gradients") {
  Tensor w = Tensor::scalar(3.0);
  w.set_requires_grad(true);
  Graph g;
  Var x = g.leaf(w);
  Var y = x * x;
  g.backward(sum(y + y * x));  // x^2 + x^3
  CHECK(w.grad()[0] == doctest::Approx(2 * 3 + 3 * 9));
}

TEST_CASE("misuse raises GradError") {
  Graph g;
  Var x = g.constant(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(g.backward(x), GradError);  // not a scalar
  Var s = sum(x);
  g.backward(s);
  CHECK(g.consumed());
  CHECK_THROWS_AS(g.backward(s), GradError);
  CHECK_THROWS_AS(g.constant(Tensor::scalar(1)), GradError);
  CHECK_THROWS_AS(Var().value(), GradError);

  Graph a, b;
  CHECK_THROWS_AS(a.constant(Tensor::scalar(1)) + b.constant(Tensor::scalar(1)), GradError);
}

TEST_CASE("shape mismatches name the primitive") {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({3, 2}));
  try {
    (void)(a + b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(e.lhs() == Shape{2, 3});
    CHECK(e.rhs() == Shape{3, 2});
  }
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(add_bias(a, g.constant(Tensor({2}))), ShapeError);
  CHECK_THROWS_AS(reshape(a, {5}), ShapeError);
  CHECK_THROWS_AS(gather(a, {6}), ShapeError);
  std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(softmax_cross_entropy(a, bad), std::out_of_range);
  std::vector<int> short_labels{0};
  CHECK_THROWS_AS(softmax_cross_entropy(a, short_labels), ShapeError);
}

TEST_CASE("tracking off records no parameter gradient, variable still differentiates") {
  Tensor w = Tensor::vector({1, 2});
  w.set_requires_grad(true);
  Tensor x = Tensor::vector({3, 4});
  Graph g(false);
  Var vx = g.variable(x);
  g.backward(dot(g.leaf(w), vx));
  CHECK_FALSE(w.has_grad());
  CHECK(x.grad()[0] == 1);
  CHECK(x.grad()[1] == 2);
}

TEST_CASE("reduction ties resolve to the lowest index") {
  Graph g;
  Var m = g.constant(Tensor::matrix(2, 3, {1, 5, 5, 2, 2, 0}));
  Var rm = row_max(m);
  CHECK(rm.value()[0] == 5);
  Var rn = row_min(m);
  CHECK(rn.value()[1] == 0);
  Tensor t = Tensor::vector({2, 7, 7});
  t.set_requires_grad(true);
  Graph h;
  h.backward(max(h.leaf(t)));
  CHECK(t.grad()[1] == 1);
  CHECK(t.grad()[2] == 0);
}

TEST_CASE("grad_check on every primitive") {
  Rng rng(11);
  const double tol = 1e-4;
  const Tensor a = away_from_zero({3, 4}, rng);
  const Tensor pos = random_tensor({3, 4}, rng, 0.5, 2.0);
  const Tensor other = away_from_zero({3, 4}, rng);
  const Tensor right = random_tensor({4, 2}, rng);
  const Tensor bias4 = random_tensor({4}, rng);
  const Tensor bias_c = random_tensor({2}, rng);
  std::vector<int> labels{0, 3, 1};

  auto with = [](const Tensor& t) { return [t](Graph& g) { return g.constant(t); }; };
  auto c_other = with(other);

  SUBCASE("elementwise") {
    CHECK(check([&](Graph& g, Var x) { return sum((x + c_other(g)) * x); }, a) < tol);
    CHECK(check([&](Graph& g, Var x) { return sum((x - c_other(g)) * x); }, a) < tol);
    CHECK(check([&](Graph& g, Var x) { return sum(x * c_other(g)); }, a) < tol);
    CHECK(check([&](Graph& g, Var x) { return sum(c_other(g) / x); }, pos) < tol);
    CHECK(check([&](Graph& g, Var x) { return sum(x / g.constant(pos)); }, a) < tol);
    CHECK(check([](Graph&, Var x) { return sum(-x * x); }, a) < tol);
    CHECK(check([](Graph&, Var x) { return sum(scale(x, -2.5) * x); }, a) < tol);
    CHECK(check([](Graph&, Var x) { return sum(add_scalar(x, 0.3) * x); }, a) < tol);
    CHECK(check([](Graph&, Var x) { return sum(relu(x) * x); }, a) < tol);
    CHECK(check([](Graph&, Var x) { return sum(abs(x) * x); }, a) < tol);
    CHECK(check([](Graph&, Var x) { return sum(tanh(x) * x); }, a) < tol);
    CHECK(check([](Graph&, Var x) { return sum(sqrt(x)); }, pos) < tol);
    CHECK(check([](Graph&, Var x) { return sum(clamp(x, -0.5, 0.6) * x); }, a) < tol);
  }
  SUBCASE("linear algebra") {
    CHECK(check([&](Graph& g, Var x) { return sum(tanh(matmul(x, g.constant(right)))); }, a) < tol);
    CHECK(check([&](Graph& g, Var w) { return sum(tanh(matmul(g.constant(a), w))); }, right) < tol);
    CHECK(check([](Graph&, Var x) { return sum(tanh(transpose(x)) * transpose(x)); }, a) < tol);
    CHECK(check([&](Graph& g, Var x) { return sum(tanh(add_bias(x, g.constant(bias4)))); }, a) < tol);
    CHECK(check([&](Graph& g, Var b) { return sum(tanh(add_bias(g.constant(a), b))); }, bias4) < tol);
    CHECK(check([](Graph&, Var x) { return sum(tanh(reshape(x, {2, 6}))); }, a) < tol);
  }
  SUBCASE("convolution") {
    const Tensor img = random_tensor({2, 2, 5, 5}, rng);
    const Tensor ker = random_tensor({3, 2, 3, 3}, rng);
    for (Conv2dOptions o : {Conv2dOptions{1, 0}, Conv2dOptions{2, 1}}) {
      CHECK(check([&](Graph& g, Var x) { return sum(tanh(conv2d(x, g.constant(ker), o))); }, img) < tol);
      CHECK(check([&](Graph& g, Var w) { return sum(tanh(conv2d(g.constant(img), w, o))); }, ker) < tol);
    }
    CHECK(check([&](Graph& g, Var b) {
            return sum(tanh(add_bias(conv2d(g.constant(img), g.constant(ker)), b)));
          }, random_tensor({3}, rng)) < tol);
  }
  SUBCASE("reductions") {
    CHECK(check([](Graph&, Var x) { return sum(x) * mean(x); }, a) < tol);
    CHECK(check([](Graph&, Var x) { return l2_norm(x); }, a) < tol);
    CHECK(check([&](Graph& g, Var x) { return dot(x, c_other(g)) * dot(x, x); }, a) < tol);
    Tensor distinct({3, 4});
    for (std::size_t i = 0; i < distinct.size(); ++i) distinct[i] = 0.1 * static_cast<double>((i * 7) % 12) - 0.4;
    CHECK(check([](Graph&, Var x) { return max(x) * min(x); }, distinct) < tol);
    CHECK(check([](Graph&, Var x) { return sum(tanh(sum_rows(x))); }, a) < tol);
    CHECK(check([](Graph&, Var x) { return sum(tanh(row_sum(x))); }, a) < tol);
    CHECK(check([](Graph&, Var x) { return sum(tanh(row_max(x))); }, distinct) < tol);
    CHECK(check([](Graph&, Var x) { return sum(tanh(row_min(x))); }, distinct) < tol);
    CHECK(check([](Graph&, Var x) { return sum(tanh(gather(x, {0, 5, 5, 11}))); }, a) < tol);
  }
  SUBCASE("cross-entropy") {
    CHECK(check([&](Graph&, Var x) { return softmax_cross_entropy(x, labels); }, a) < tol);
  }
}

TEST_CASE("two-layer MLP against central differences") {
  Rng rng(5);
  Tensor w1 = random_tensor({6, 8}, rng), b1 = random_tensor({8}, rng);
  Tensor w2 = random_tensor({8, 3}, rng), b2 = random_tensor({3}, rng);
  Tensor x = random_tensor({5, 6}, rng);
  std::vector<int> y{0, 1, 2, 1, 0};
  auto loss = [&](Graph& g) {
    Var h = relu(add_bias(matmul(g.constant(x), g.leaf(w1)), g.leaf(b1)));
    return softmax_cross_entropy(add_bias(matmul(h, g.leaf(w2)), g.leaf(b2)), y);
  };
  CHECK(grad_check_params(loss, {w1, b1, w2, b2}) < 1e-4);
}

}
