#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dio/ortho_geometry.hpp"

using namespace dio;

TEST_SUITE("ortho_geometry") {

TEST_CASE("bound formula") {
  CHECK(lemma1_bound(10000, 0.1) == doctest::Approx(4.0 * std::exp(-12.5)).epsilon(1e-14));
  CHECK(lemma1_bound(10000, 0.1) == doctest::Approx(1.49e-5).epsilon(0.01));
  CHECK(lemma1_bound(100, 0.05) > 1.0);
}

TEST_CASE("domain guard") {
  CHECK_THROWS_AS(lemma1_check(8, 1.0, 100000, 0), std::invalid_argument);
  CHECK_THROWS_AS(lemma1_check(8, 0.0, 100000, 0), std::invalid_argument);
  CHECK_THROWS_AS(lemma1_check(0, 0.1, 100000, 0), std::invalid_argument);
  CHECK_THROWS_AS(lemma1_check(8, 0.5, 999, 0), std::invalid_argument);
}

TEST_CASE("Monte-Carlo estimate") {
  const LemmaTrial t = lemma1_check(100, 0.2, 20000, 3);
  CHECK(t.trials == 20000);
  CHECK(t.bound == lemma1_bound(100, 0.2));
  CHECK(t.sigma == doctest::Approx(std::sqrt(std::min(t.bound, 1.0) * (1 - std::min(t.bound, 1.0)) / 20000)));
  CHECK(t.passed);
  // <u,v> has variance 1/d; P(|N(0, 0.01)| >= 0.2) = P(|Z| >= 2) ~ 0.0455.
  CHECK(t.empirical == doctest::Approx(0.0455).epsilon(0.15));
  CHECK(lemma1_check(100, 0.2, 20000, 3).empirical == t.empirical);

  auto suite = lemma1_suite(100, {0.05, 0.2}, 20000, 3);
  CHECK(suite[1].empirical == t.empirical);
  CHECK(suite[0].empirical > suite[1].empirical);
}

TEST_CASE("margin set: single anchor") {
  std::vector<double> e1(50, 0.0);
  e1[0] = 1.0;
  auto set = sample_margin_set({Anchor{e1, 1}}, 0.5, 20, 4);
  CHECK(set.accepted.size() == 20);
  CHECK(set.all_satisfy_margin());
  for (const auto& w : set.accepted) {
    CHECK(w[0] > 0.5);
    double n = 0.0;
    for (double v : w) n += v * v;
    CHECK(n == doctest::Approx(1.0));
  }
  // The anchor is normalized before use.
  std::vector<double> long_e1(50, 0.0);
  long_e1[0] = 7.0;
  auto scaled = sample_margin_set({Anchor{long_e1, 1}}, 0.5, 20, 4);
  CHECK(scaled.accepted == set.accepted);
}

TEST_CASE("margin set: errors") {
  std::vector<double> e1(50, 0.0);
  e1[0] = 1.0;
  CHECK_THROWS_AS(sample_margin_set({Anchor{e1, 1}}, 0.99, 10, 1), std::runtime_error);
  CHECK_THROWS_AS(sample_margin_set({}, 0.1, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_margin_set({Anchor{e1, 0}}, 0.1, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_margin_set({Anchor{std::vector<double>(50, 0.0), 1}}, 0.1, 10, 1),
                  std::invalid_argument);
}

TEST_CASE("no constraint matches the unconstrained draw") {
  std::vector<double> e1(30, 0.0);
  e1[0] = 1.0;
  auto r = margin_constrained_orthogonality({Anchor{e1, 1}}, -std::numeric_limits<double>::infinity(),
                                            0.1, 5000, 6);
  CHECK(r.acceptance_rate == 1.0);
  const double se = std::sqrt(r.half_width_constrained * r.half_width_constrained +
                              r.half_width_unconstrained * r.half_width_unconstrained);
  CHECK(std::abs(r.p_constrained - r.p_unconstrained) <= 1.5 * se);
}

TEST_CASE("symmetric anchors, margin 0.3") {
  std::vector<double> a(100, 0.0), b(100, 0.0);
  a[0] = 1.0;
  b[0] = -1.0;
  auto r = margin_constrained_orthogonality({Anchor{a, 1}, Anchor{b, -1}}, 0.3, 0.1, 10000, 7);
  CHECK(r.pairs == 10000);
  CHECK(r.p_constrained >= 0.0);
  CHECK(r.p_constrained <= 1.0);
  CHECK(r.half_width_constrained ==
        doctest::Approx(1.96 * std::sqrt(r.p_constrained * (1 - r.p_constrained) / 10000)));
  MESSAGE("P(|<u,v>| <= 0.1): constrained " << r.p_constrained << " +/- " << r.half_width_constrained
                                            << ", unconstrained " << r.p_unconstrained << " +/- "
                                            << r.half_width_unconstrained << ", difference sign "
                                            << (r.p_constrained > r.p_unconstrained ? "+" : "-"));
}

}
