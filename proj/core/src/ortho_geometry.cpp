#include "dio/ortho_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include "dio/rng.hpp"

namespace dio {

namespace {

constexpr std::size_t kShards = 16;

double binomial_sigma(double p, std::size_t n) {
  p = std::clamp(p, 0.0, 1.0);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

// Runs fn(shard) for every shard on up to hardware_concurrency threads.
template <class Fn>
void run_shards(Fn fn) {
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, kShards);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t s = w; s < kShards; s += workers) fn(s);
    });
  for (auto& t : pool) t.join();
}

std::vector<double> unit_gaussian(Rng& rng, std::size_t d) {
  std::vector<double> w(d);
  double n = 0.0;
  for (auto& v : w) {
    v = rng.normal();
    n += v * v;
  }
  n = std::sqrt(n);
  for (auto& v : w) v /= n;
  return w;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double lemma1_bound(std::size_t dim, double eps) {
  return 4.0 * std::exp(-eps * eps * static_cast<double>(dim) / 8.0);
}

std::vector<LemmaTrial> lemma1_suite(std::size_t dim, const std::vector<double>& eps,
                                     std::size_t trials, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("lemma1_check: d must be >= 1");
  if (eps.empty()) throw std::invalid_argument("lemma1_check: no eps values");
  for (double e : eps)
    if (!(e > 0 && e < 1)) throw std::invalid_argument("lemma1_check: eps must be in (0,1)");
  if (trials < 1000) throw std::invalid_argument("lemma1_check: need at least 1000 trials");

  const double scale = 1.0 / static_cast<double>(dim);
  const std::size_t m = eps.size();
  std::vector<std::size_t> hits(kShards * m, 0);
  run_shards([&](std::size_t s) {
    const std::size_t begin = trials * s / kShards, end = trials * (s + 1) / kShards;
    Rng rng(mix_seed(seed, s));
    std::vector<double> u(dim);
    std::vector<std::size_t> h(m, 0);
    for (std::size_t t = begin; t < end; ++t) {
      for (auto& v : u) v = rng.normal();
      double ip = 0.0;
      for (std::size_t i = 0; i < dim; ++i) ip += u[i] * rng.normal();
      // u, v ~ N(0, I/d): scale the standard-normal product by 1/d.
      const double a = std::fabs(ip * scale);
      for (std::size_t k = 0; k < m; ++k) h[k] += a >= eps[k];
    }
    std::copy(h.begin(), h.end(), hits.begin() + static_cast<std::ptrdiff_t>(s * m));
  });

  std::vector<LemmaTrial> out;
  for (std::size_t k = 0; k < m; ++k) {
    LemmaTrial r;
    r.dim = dim;
    r.eps = eps[k];
    r.trials = trials;
    std::size_t total = 0;
    for (std::size_t s = 0; s < kShards; ++s) total += hits[s * m + k];
    r.empirical = static_cast<double>(total) / static_cast<double>(trials);
    r.bound = lemma1_bound(dim, eps[k]);
    r.sigma = binomial_sigma(std::min(r.bound, 1.0), trials);
    r.passed = r.empirical <= r.bound + 3.0 * r.sigma;
    out.push_back(r);
  }
  return out;
}

LemmaTrial lemma1_check(std::size_t dim, double eps, std::size_t trials, std::uint64_t seed) {
  return lemma1_suite(dim, {eps}, trials, seed).front();
}

bool MarginSampleSet::all_satisfy_margin() const {
  for (const auto& w : accepted)
    for (const auto& a : anchors)
      if (!(a.y * dot(w, a.x) > delta)) return false;
  return true;
}

MarginSampleSet sample_margin_set(const std::vector<Anchor>& anchors, double delta,
                                  std::size_t count, std::uint64_t seed) {
  if (anchors.empty()) throw std::invalid_argument("sample_margin_set: no anchors");
  const std::size_t d = anchors.front().x.size();
  MarginSampleSet set;
  set.delta = delta;
  for (const auto& a : anchors) {
    if (a.x.size() != d) throw std::invalid_argument("sample_margin_set: anchors differ in dimension");
    if (a.y != 1 && a.y != -1) throw std::invalid_argument("sample_margin_set: labels must be +1/-1");
    const double n = std::sqrt(dot(a.x, a.x));
    if (n == 0.0) throw std::invalid_argument("sample_margin_set: zero anchor");
    Anchor u{a.x, a.y};
    for (auto& v : u.x) v /= n;
    set.anchors.push_back(std::move(u));
  }

  constexpr std::size_t kMinAttempts = 1'000'000;
  constexpr double kMinRate = 1e-5;
  Rng rng(seed);
  while (set.accepted.size() < count) {
    auto w = unit_gaussian(rng, d);
    ++set.attempts;
    bool ok = true;
    for (const auto& a : set.anchors)
      if (!(a.y * dot(w, a.x) > delta)) {
        ok = false;
        break;
      }
    if (ok) set.accepted.push_back(std::move(w));
    if (set.attempts >= kMinAttempts &&
        static_cast<double>(set.accepted.size()) < kMinRate * static_cast<double>(set.attempts))
      throw std::runtime_error("sample_margin_set: acceptance rate " +
                               std::to_string(static_cast<double>(set.accepted.size()) /
                                              static_cast<double>(set.attempts)) +
                               " below 1e-5; delta=" + std::to_string(delta) +
                               " is too large for these anchors");
  }
  return set;
}

OrthogonalityComparison margin_constrained_orthogonality(const std::vector<Anchor>& anchors,
                                                         double delta, double eps,
                                                         std::size_t pairs, std::uint64_t seed) {
  if (pairs < 1) throw std::invalid_argument("margin_constrained_orthogonality: pairs must be >= 1");
  if (!(eps > 0)) throw std::invalid_argument("margin_constrained_orthogonality: eps must be > 0");
  const auto set = sample_margin_set(anchors, delta, 2 * pairs, mix_seed(seed, 1));
  if (!set.all_satisfy_margin()) throw std::logic_error("margin set violates its own constraint");

  const std::size_t d = set.anchors.front().x.size();
  Rng rng(mix_seed(seed, 2));
  std::size_t hit_c = 0, hit_u = 0;
  for (std::size_t p = 0; p < pairs; ++p) {
    if (std::fabs(dot(set.accepted[2 * p], set.accepted[2 * p + 1])) <= eps) ++hit_c;
    const auto u = unit_gaussian(rng, d), v = unit_gaussian(rng, d);
    if (std::fabs(dot(u, v)) <= eps) ++hit_u;
  }
  OrthogonalityComparison out;
  out.pairs = pairs;
  out.p_constrained = static_cast<double>(hit_c) / static_cast<double>(pairs);
  out.p_unconstrained = static_cast<double>(hit_u) / static_cast<double>(pairs);
  out.half_width_constrained = 1.96 * binomial_sigma(out.p_constrained, pairs);
  out.half_width_unconstrained = 1.96 * binomial_sigma(out.p_unconstrained, pairs);
  out.acceptance_rate = static_cast<double>(set.accepted.size()) / static_cast<double>(set.attempts);
  return out;
}

}  // namespace dio
