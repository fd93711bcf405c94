#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "dio/attacks.hpp"
#include "helpers.hpp"

using namespace dio;

namespace {

DioModel logistic_1d() {
  ArchSpec arch;
  arch.input_shape = {1};
  arch.features = 1;
  arch.classes = 2;
  // logits (0, x): CE for y=0 is log(1 + e^x), increasing in x.
  return DioModel(arch, Backbone({}, 1), {Head{Tensor::matrix(1, 2, {0, 1}), Tensor({2})}});
}

DioModel small_model(std::size_t heads, std::uint64_t seed) {
  ArchSpec arch;
  arch.input_shape = {6};
  arch.hidden = 8;
  arch.features = 5;
  arch.classes = 3;
  arch.heads = heads;
  return make_model(arch, seed);
}

struct Batch {
  Tensor x;
  std::vector<int> y;
};

Batch random_batch(std::size_t n, std::size_t d, std::size_t k, Rng& rng) {
  Batch b{test::random_tensor({n, d}, rng, 0, 1), {}};
  for (std::size_t i = 0; i < n; ++i) b.y.push_back(static_cast<int>(rng.uniform_index(k)));
  return b;
}

bool in_box(const Tensor& t) {
  for (double v : t.data())
    if (v < 0.0 || v > 1.0) return false;
  return true;
}

}  // namespace

TEST_SUITE("attacks") {

TEST_CASE("names") {
  CHECK(parse_attack_kind("pgd") == AttackKind::pgd);
  CHECK(parse_attack_kind("adapt_a2") == AttackKind::adapt_a2);
  CHECK(parse_attack_kind("cw") == AttackKind::cw_l2);
  CHECK(to_string(AttackKind::square_l2) == "square_l2");
  CHECK_THROWS_AS(parse_attack_kind("deepfool"), std::invalid_argument);
}

TEST_CASE("spec validation") {
  AttackSpec s = AttackSpec::pgd(-0.1, 0.01, 10);
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = AttackSpec::pgd(0.1, 0.01, -1);
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = AttackSpec::cifar_cw();
  CHECK_NOTHROW(s.validate());
  s.cw.binary_search_steps = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = AttackSpec::cifar_square(100);
  s.square_p_init = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK(AttackSpec::cifar_pgd(20).eps == doctest::Approx(8.0 / 255.0));
  CHECK(AttackSpec::cifar_pgd(20).step == doctest::Approx(2.0 / 255.0));
  CHECK(AttackSpec::cifar_square(5000).eps == 0.5);
}

TEST_CASE("fgsm") {
  DioModel m = logistic_1d();
  auto logits = head_logits(m, 0);
  std::vector<int> y{0};
  Tensor x = Tensor::matrix(1, 1, {0.5});

  auto zero = fgsm(logits, x, y, 0.0);
  CHECK(bitwise_equal(zero.x_adv, x));

  CHECK(input_gradient(cross_entropy_objective(logits), x, y)[0] > 0);
  auto adv = fgsm(logits, x, y, 0.1);
  CHECK(adv.x_adv[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(adv.norms[0] == doctest::Approx(0.1));
  CHECK(adv.gradient_evaluations == 1);

  // Interior points with nonzero gradient move by exactly eps everywhere.
  DioModel net = small_model(1, 4);
  Rng rng(2);
  Batch b = random_batch(16, 6, 3, rng);
  for (auto& v : b.x.data()) v = 0.3 + 0.4 * v;
  auto out = fgsm(head_logits(net, 0), b.x, b.y, 0.05);
  const Tensor g = input_gradient(cross_entropy_objective(head_logits(net, 0)), b.x, b.y);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] != 0.0) CHECK(std::abs(out.x_adv[i] - b.x[i]) == doctest::Approx(0.05));

  CHECK_THROWS_AS(fgsm(logits, x, std::vector<int>{0, 1}, 0.1), ShapeError);
}

TEST_CASE("pgd with one step and no start collapses to a projected fgsm step") {
  DioModel net = small_model(1, 6);
  Rng rng(3);
  Batch b = random_batch(10, 6, 3, rng);
  auto logits = head_logits(net, 0);
  AttackSpec spec = AttackSpec::pgd(0.05, 0.02, 1);
  spec.random_start = false;
  auto p = pgd(logits, b.x, b.y, spec);
  const Tensor g = input_gradient(cross_entropy_objective(logits), b.x, b.y);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = g[i] > 0 ? 1.0 : (g[i] < 0 ? -1.0 : 0.0);
    CHECK(p.x_adv[i] == std::clamp(b.x[i] + 0.02 * s, 0.0, 1.0));
  }
  spec.step = 0.05;
  CHECK(bitwise_equal(pgd(logits, b.x, b.y, spec).x_adv, fgsm(logits, b.x, b.y, 0.05).x_adv));
}

TEST_CASE("pgd start distributions") {
  DioModel net = small_model(1, 6);
  Tensor x({200, 6}, 0.5);
  std::vector<int> y(200, 0);
  AttackSpec spec = AttackSpec::pgd(0.1, 0.01, 0);
  auto sym = pgd(head_logits(net, 0), x, y, spec);
  double lo = 1, hi = 0;
  for (double v : sym.x_adv.data()) lo = std::min(lo, v), hi = std::max(hi, v);
  CHECK(lo < 0.45);
  CHECK(hi > 0.55);
  spec.literal_uniform_start = true;
  auto one_sided = pgd(head_logits(net, 0), x, y, spec);
  for (double v : one_sided.x_adv.data()) CHECK(v >= 0.5);
}

TEST_CASE("L-inf attacks stay in the ball and the box") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    DioModel net = small_model(3, 100 + trial);
    Batch b = random_batch(8, 6, 3, rng);
    const double eps = rng.uniform(0.0, 0.3);
    AttackSpec spec = AttackSpec::pgd(eps, eps / 3, 5, trial);
    Rng head_rng(trial);
    for (const auto& adv : {fgsm(random_head_logits(net, head_rng), b.x, b.y, eps),
                            pgd(random_head_logits(net, head_rng), b.x, b.y, spec),
                            adapt_a1(net, b.x, b.y, spec), adapt_a2(net, 2, b.x, b.y, spec)}) {
      CHECK(in_box(adv.x_adv));
      for (double n : linf_distances(adv.x_adv, b.x)) CHECK(n <= eps + 1e-12);
    }
  }
}

TEST_CASE("adaptive attacks reduce to pgd") {
  Rng rng(8);
  Batch b = random_batch(12, 6, 3, rng);
  AttackSpec spec = AttackSpec::pgd(0.1, 0.02, 7, 42);

  DioModel one = small_model(1, 3);
  auto ref = pgd(head_logits(one, 0), b.x, b.y, spec);
  CHECK(bitwise_equal(adapt_a1(one, b.x, b.y, spec).x_adv, ref.x_adv));
  CHECK(bitwise_equal(adapt_a2(one, 0, b.x, b.y, spec).x_adv, ref.x_adv));

  // Three copies of the same head: the head average equals that head (up
  // to summation rounding, which can flip a sign only at exact zeros).
  const Head& h = one.heads()[0];
  DioModel triple = with_heads(one, {h, h, h});
  auto avg = adapt_a1(triple, b.x, b.y, spec);
  CHECK(test::max_abs_diff(avg.x_adv, ref.x_adv) < 1e-12);
}

TEST_CASE("carlini-wagner") {
  DioModel net = small_model(1, 12);
  Rng rng(9);
  Batch b = random_batch(10, 6, 3, rng);
  auto logits = head_logits(net, 0);
  AttackSpec spec = AttackSpec::cifar_cw();
  spec.cw.max_inner_iters = 30;
  spec.cw.lr = 0.05;
  spec.cw.binary_search_steps = 4;
  auto out = cw_l2(logits, b.x, b.y, spec);
  CHECK(in_box(out.x_adv));

  Tensor clean = predict_head(net, b.x, 0);
  auto margins = logit_margins(clean, b.y);
  for (std::size_t i = 0; i < b.y.size(); ++i) {
    if (margins[i] < 0) {
      // already misclassified: zero perturbation is the optimum
      CHECK(out.success[i]);
      CHECK(out.norms[i] == 0.0);
    }
  }

  spec.eps = 0.05;
  auto bounded = cw_l2(logits, b.x, b.y, spec);
  for (double n : bounded.norms) CHECK(n <= 0.05 + 1e-12);
  CHECK(in_box(bounded.x_adv));
}

TEST_CASE("square attack is query-only and monotone") {
  DioModel net = small_model(2, 14);
  Rng rng(10);
  Batch b = random_batch(10, 6, 3, rng);
  Rng head_rng(1);
  auto query = random_head_query(net, head_rng);

  AttackSpec zero = AttackSpec::cifar_square(0);
  CHECK(bitwise_equal(square_l2(query, b.x, b.y, zero).x_adv, b.x));

  // Single-head oracle for monotonicity: compare margins before and after.
  DioModel one = small_model(1, 14);
  Rng r1(0);
  auto q1 = random_head_query(one, r1);
  AttackSpec spec = AttackSpec::cifar_square(200);
  spec.eps = 0.3;
  spec.seed = 5;
  const std::size_t before = Graph::backward_calls();
  auto out = square_l2(q1, b.x, b.y, spec);
  CHECK(Graph::backward_calls() == before);
  CHECK(out.gradient_evaluations == 0);
  CHECK(in_box(out.x_adv));
  for (double n : out.norms) CHECK(n <= 0.3 + 1e-12);
  for (auto q : out.queries) CHECK(q <= 200);
  auto m0 = logit_margins(predict_head(one, b.x, 0), b.y);
  auto m1 = logit_margins(predict_head(one, out.x_adv, 0), b.y);
  for (std::size_t i = 0; i < m0.size(); ++i) CHECK(m1[i] <= m0[i]);

  // Image inputs use square windows.
  ArchSpec cnn;
  cnn.kind = "cnn";
  cnn.input_shape = {1, 6, 6};
  DioModel c = make_model(cnn, 2);
  Rng r2(0);
  Tensor img = test::random_tensor({3, 1, 6, 6}, rng, 0, 1);
  std::vector<int> yi{0, 1, 2};
  auto o = square_l2(random_head_query(c, r2), img, yi, spec);
  CHECK(in_box(o.x_adv));
  for (double n : o.norms) CHECK(n <= 0.3 + 1e-12);
}

TEST_CASE("transfer") {
  DioModel net = small_model(1, 20);
  Rng rng(11);
  Batch b = random_batch(40, 6, 3, rng);
  AttackSpec spec = default_attack(AttackKind::transfer);
  spec.eps = 0.1;
  Rng t1(0);
  const double self = transfer(net, net, b.x, b.y, spec, t1);
  auto white = fgsm(head_logits(net, 0), b.x, b.y, 0.1);
  std::size_t correct = 0;
  for (bool s : white.success) correct += !s;
  CHECK(self == doctest::Approx(100.0 * correct / 40.0));

  spec.eps = 0.0;
  Rng t2(0);
  auto pred = argmax_rows(predict_head(net, b.x, 0));
  std::size_t clean = 0;
  for (std::size_t i = 0; i < 40; ++i) clean += pred[i] == b.y[i];
  CHECK(transfer(net, net, b.x, b.y, spec, t2) == doctest::Approx(100.0 * clean / 40.0));

  ArchSpec other;
  other.input_shape = {7};
  Rng t3(0);
  CHECK_THROWS_AS(transfer(make_model(other, 1), net, b.x, b.y, spec, t3), std::invalid_argument);
}

TEST_CASE("attacks never touch parameter gradients") {
  DioModel net = small_model(2, 30);
  Rng rng(12);
  Batch b = random_batch(5, 6, 3, rng);
  pgd(head_logits(net, 1), b.x, b.y, AttackSpec::pgd(0.1, 0.02, 3));
  adapt_a1(net, b.x, b.y, AttackSpec::pgd(0.1, 0.02, 3));
  for (const auto& p : net.parameters()) CHECK_FALSE(p.has_grad());
}

}
