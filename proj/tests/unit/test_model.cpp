#include "doctest.h"

#include <stdexcept>

#include "dio/model.hpp"
#include "helpers.hpp"

using namespace dio;

namespace {

Head make_head(Tensor w, Tensor b) { return Head{std::move(w), std::move(b)}; }

DioModel identity_model(std::vector<Head> heads, std::size_t d) {
  ArchSpec arch;
  arch.input_shape = {d};
  arch.features = d;
  arch.classes = heads.front().classes();
  return DioModel(arch, Backbone({}, d), std::move(heads));
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("identity backbone with identity head") {
  DioModel m = identity_model({make_head(Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor({2}))}, 2);
  Tensor logits = predict_head(m, Tensor::matrix(1, 2, {1, 2}), 0);
  CHECK(logits[0] == 1);
  CHECK(logits[1] == 2);
}

TEST_CASE("all-heads forward matches independent single-head forwards") {
  ArchSpec arch;
  arch.heads = 3;
  DioModel m = make_model(arch, 17);
  Rng rng(3);
  Tensor x = test::random_tensor({5, 20}, rng, 0, 1);
  auto all = predict_all_heads(m, x);
  REQUIRE(all.size() == 3);
  for (std::size_t h = 0; h < 3; ++h) {
    // Oracle: features once, then W^T z + b by hand.
    Graph g(false);
    Tensor z = m.features(g, g.constant(x)).value();
    const Head& head = m.heads()[h];
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < 4; ++k) {
        double s = head.bias[k];
        for (std::size_t r = 0; r < z.dim(1); ++r) s += head.weight[r * 4 + k] * z[i * z.dim(1) + r];
        CHECK(all[h][i * 4 + k] == doctest::Approx(s).epsilon(1e-12));
      }
    CHECK(bitwise_equal(all[h], predict_head(m, x, h)));
  }
}

TEST_CASE("random head draws") {
  ArchSpec one;
  DioModel single = make_model(one, 1);
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    Graph g(false);
    std::size_t drawn = 99;
    single.forward_random_head(g, g.constant(Tensor({1, 20})), rng, &drawn);
    CHECK(drawn == 0);
  }

  ArchSpec four;
  four.heads = 4;
  DioModel m = make_model(four, 1);
  auto sequence = [&](std::uint64_t seed) {
    Rng r(seed);
    std::vector<std::size_t> out;
    for (int i = 0; i < 50; ++i) {
      Graph g(false);
      std::size_t drawn = 0;
      m.forward_random_head(g, g.constant(Tensor({1, 20})), r, &drawn);
      out.push_back(drawn);
    }
    return out;
  };
  CHECK(sequence(8) == sequence(8));
  auto s = sequence(8);
  std::vector<int> seen(4, 0);
  for (auto h : s) seen[h]++;
  for (int c : seen) CHECK(c > 0);
}

TEST_CASE("head inner product") {
  Head a = make_head(Tensor::matrix(1, 2, {1, 0}), Tensor({2}));
  Head b = make_head(Tensor::matrix(1, 2, {0, 1}), Tensor({2}));
  Head c = make_head(Tensor::matrix(1, 2, {1, 1}), Tensor({2}));
  CHECK(head_inner_product(a, b) == 0.0);
  CHECK(head_inner_product(c, c) == 2.0);
  ArchSpec arch;
  arch.heads = 2;
  DioModel m = make_model(arch, 9);
  CHECK(head_inner_product(m.heads()[0], m.heads()[1]) ==
        head_inner_product(m.heads()[1], m.heads()[0]));
  CHECK_THROWS_AS(head_inner_product(a, make_head(Tensor({2, 2}), Tensor({2}))), ShapeError);
}

TEST_CASE("construction and parameters") {
  ArchSpec arch;
  arch.heads = 2;
  DioModel m = make_model(arch, 5);
  // mlp d-h-h-m: dense(20,64), dense(64,64), dense(64,32), then two heads (32,4)
  CHECK(m.parameter_count() == 20 * 64 + 64 + 64 * 64 + 64 + 64 * 32 + 32 + 2 * (32 * 4 + 4));
  CHECK(m.parameters().size() == 6 + 4);
  CHECK(m.checksum() == make_model(arch, 5).checksum());
  CHECK(m.checksum() != make_model(arch, 6).checksum());
  // heads start from different seeds
  CHECK_FALSE(bitwise_equal(m.heads()[0].weight, m.heads()[1].weight));

  DioModel copy = m.clone();
  CHECK(copy.checksum() == m.checksum());
  CHECK_FALSE(copy.heads()[0].weight.shares_storage(m.heads()[0].weight));

  ArchSpec cnn;
  cnn.kind = "cnn";
  cnn.input_shape = {1, 8, 8};
  DioModel c = make_model(cnn, 1);
  Tensor out = predict_head(c, Tensor({3, 1, 8, 8}, 0.5), 0);
  CHECK(out.shape() == Shape{3, 4});

  ArchSpec bad = arch;
  bad.kind = "transformer";
  CHECK_THROWS_AS(make_model(bad, 0), std::invalid_argument);
  bad = arch;
  bad.heads = 0;
  CHECK_THROWS_AS(make_model(bad, 0), std::invalid_argument);
  CHECK_THROWS_AS(predict_head(m, Tensor({1, 20}), 2), std::out_of_range);
}

TEST_CASE("argmax ties go to the lowest class") {
  auto p = argmax_rows(Tensor::matrix(2, 3, {1, 3, 3, 0, 0, 0}));
  CHECK(p == std::vector<int>{1, 0});
}

}
