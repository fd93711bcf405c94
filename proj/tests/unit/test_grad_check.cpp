#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dio/grad_check.hpp"

using namespace dio;

TEST_SUITE("grad_check") {

TEST_CASE("square at 3") {
  auto r = grad_check([](Graph&, Var x) { return sum(x * x); }, Tensor::scalar(3.0), 1e-5);
  CHECK(r.autodiff_grad[0] == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(std::abs(r.numeric_grad[0] - 6.0) < 1e-6);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("L2 norm at (3,4)") {
  auto r = grad_check([](Graph&, Var x) { return l2_norm(x); }, Tensor::vector({3, 4}));
  CHECK(r.autodiff_grad[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(r.autodiff_grad[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(r.max_relative_error < 1e-8);
}

TEST_CASE("constant function") {
  auto r = grad_check([](Graph& g, Var) { return sum(g.constant(Tensor::scalar(2.0))); },
                      Tensor::vector({1, 2, 3}));
  for (double v : r.autodiff_grad.data()) CHECK(v == 0.0);
  CHECK(r.max_relative_error == 0.0);
}

TEST_CASE("non-finite values name the coordinate") {
  Tensor p = Tensor::vector({1.0, 0.0, 2.0});
  try {
    grad_check([](Graph&, Var x) { return sum(sqrt(x)); }, p);
    FAIL("expected GradError");
  } catch (const GradError& e) {
    CHECK(std::string(e.what()).find("coordinate 1") != std::string::npos);
  }
  CHECK_THROWS_AS(grad_check([](Graph&, Var x) { return sum(x); }, p, 0.0), std::invalid_argument);
}

TEST_CASE("reports the worst coordinate of a wrong gradient") {
  // relu at exactly 0: subgradient 0 vs central difference 0.5
  auto r = grad_check([](Graph&, Var x) { return sum(relu(x)); }, Tensor::vector({1.0, 0.0}));
  CHECK(r.worst_index == 1);
  CHECK(r.max_relative_error == doctest::Approx(0.5));
}

}
