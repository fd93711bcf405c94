#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace dio {

/// One Monte-Carlo estimate of P(|<u,v>| >= eps) for u, v ~ N(0, I/d).
struct LemmaTrial {
  std::size_t dim = 0;
  double eps = 0.0;
  std::size_t trials = 0;
  double empirical = 0.0;
  double bound = 0.0;  // 4 exp(-eps^2 d / 8)
  double sigma = 0.0;  // binomial std of the estimate at p = min(bound, 1)
  bool passed = false; // empirical <= bound + 3 sigma
};

double lemma1_bound(std::size_t dim, double eps);

/// Throws std::invalid_argument unless d >= 1, 0 < eps < 1, n >= 1000.
/// Work is split over a fixed number of seeded shards, so the result does
/// not depend on the machine's thread count.
LemmaTrial lemma1_check(std::size_t dim, double eps, std::size_t trials, std::uint64_t seed);
/// Several eps values over one shared set of draws; element k equals
/// lemma1_check(dim, eps[k], trials, seed).
std::vector<LemmaTrial> lemma1_suite(std::size_t dim, const std::vector<double>& eps,
                                     std::size_t trials, std::uint64_t seed);

struct Anchor {
  std::vector<double> x;
  int y = 1;  // +1 / -1
};

struct MarginSampleSet {
  std::vector<Anchor> anchors;  // unit-normalized copies
  double delta = 0.0;
  std::vector<std::vector<double>> accepted;  // unit-norm w with y<w,x> > delta
  std::size_t attempts = 0;

  /// Re-checks the margin condition on every stored vector.
  bool all_satisfy_margin() const;
};

/// Rejection-samples unit-norm Gaussian directions w with y_i <w, x_i> > delta
/// for every (unit-normalized) anchor. Throws std::runtime_error when the
/// acceptance rate falls below 1e-5.
MarginSampleSet sample_margin_set(const std::vector<Anchor>& anchors, double delta,
                                  std::size_t count, std::uint64_t seed);

struct OrthogonalityComparison {
  double p_constrained = 0.0;    // P(|<u,v>| <= eps), u,v from the margin set
  double p_unconstrained = 0.0;  // same for unit-norm Gaussian directions
  double half_width_constrained = 0.0;  // 1.96 binomial sigma
  double half_width_unconstrained = 0.0;
  std::size_t pairs = 0;
  double acceptance_rate = 0.0;
};

OrthogonalityComparison margin_constrained_orthogonality(const std::vector<Anchor>& anchors,
                                                         double delta, double eps,
                                                         std::size_t pairs, std::uint64_t seed);

}  // namespace dio
