#include "dio/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dio {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::pgd: return "pgd";
    case AttackKind::cw_l2: return "cw_l2";
    case AttackKind::square_l2: return "square_l2";
    case AttackKind::transfer: return "transfer";
    case AttackKind::adapt_a1: return "adapt_a1";
    case AttackKind::adapt_a2: return "adapt_a2";
  }
  return "?";
}

AttackKind parse_attack_kind(const std::string& name) {
  for (auto k : {AttackKind::fgsm, AttackKind::pgd, AttackKind::cw_l2, AttackKind::square_l2,
                 AttackKind::transfer, AttackKind::adapt_a1, AttackKind::adapt_a2})
    if (to_string(k) == name) return k;
  if (name == "cw") return AttackKind::cw_l2;
  if (name == "square") return AttackKind::square_l2;
  throw std::invalid_argument("unknown attack '" + name + "'");
}

void AttackSpec::validate() const {
  const bool l2 = kind == AttackKind::cw_l2 || kind == AttackKind::square_l2;
  if (std::isnan(eps) || eps < 0 || (!l2 && std::isinf(eps)))
    throw std::invalid_argument("attack eps must be >= 0 and finite");
  if (kind == AttackKind::square_l2 && std::isinf(eps))
    throw std::invalid_argument("square_l2 needs a finite eps");
  if (iters < 0) throw std::invalid_argument("attack iters must be >= 0");
  if (!(step >= 0) || !std::isfinite(step)) throw std::invalid_argument("attack step must be >= 0");
  if (kind == AttackKind::cw_l2) {
    if (!(cw.c > 0)) throw std::invalid_argument("cw c must be > 0");
    if (!(cw.kappa >= 0)) throw std::invalid_argument("cw kappa must be >= 0");
    if (!(cw.lr > 0)) throw std::invalid_argument("cw lr must be > 0");
    if (cw.binary_search_steps < 1) throw std::invalid_argument("cw binary_search_steps must be >= 1");
    if (cw.max_inner_iters < 0) throw std::invalid_argument("cw max_inner_iters must be >= 0");
  }
  if (kind == AttackKind::square_l2 && !(square_p_init > 0 && square_p_init <= 1))
    throw std::invalid_argument("square p_init must be in (0,1]");
  if (kind == AttackKind::transfer && transfer_inner != AttackKind::fgsm &&
      transfer_inner != AttackKind::pgd)
    throw std::invalid_argument("transfer inner attack must be fgsm or pgd");
}

AttackSpec AttackSpec::fgsm(double eps) {
  AttackSpec s;
  s.kind = AttackKind::fgsm;
  s.eps = eps;
  s.step = eps;
  s.iters = 1;
  s.random_start = false;
  return s;
}

AttackSpec AttackSpec::pgd(double eps, double step, int iters, std::uint64_t seed) {
  AttackSpec s;
  s.kind = AttackKind::pgd;
  s.eps = eps;
  s.step = step;
  s.iters = iters;
  s.seed = seed;
  return s;
}

AttackSpec AttackSpec::cifar_pgd(int iters) { return pgd(8.0 / 255.0, 2.0 / 255.0, iters); }

AttackSpec AttackSpec::cifar_cw() {
  AttackSpec s;
  s.kind = AttackKind::cw_l2;
  s.eps = std::numeric_limits<double>::infinity();
  s.cw = CwParams{1.0, 0.0, 0.01, 9, 3};
  s.iters = 3;
  return s;
}

AttackSpec AttackSpec::cifar_square(int queries) {
  AttackSpec s;
  s.kind = AttackKind::square_l2;
  s.eps = 0.5;
  s.iters = queries;
  return s;
}

AttackSpec default_attack(AttackKind kind) {
  AttackSpec s;
  switch (kind) {
    case AttackKind::fgsm: s = AttackSpec::fgsm(8.0 / 255.0); break;
    case AttackKind::cw_l2:
      s = AttackSpec::cifar_cw();
      s.cw.max_inner_iters = 100;
      s.iters = 100;
      break;
    case AttackKind::square_l2: s = AttackSpec::cifar_square(1000); break;
    case AttackKind::transfer:
      s = AttackSpec::fgsm(8.0 / 255.0);
      s.kind = AttackKind::transfer;
      break;
    default: s = AttackSpec::cifar_pgd(10); s.kind = kind; break;
  }
  return s;
}

// ---------------------------------------------------------------------------

LogitsFn random_head_logits(const DioModel& model, Rng& rng) {
  return [&model, &rng](Graph& g, Var x) { return model.forward_random_head(g, x, rng); };
}

LogitsFn head_logits(const DioModel& model, std::size_t head) {
  if (head >= model.num_heads()) throw std::out_of_range("head index " + std::to_string(head));
  return [&model, head](Graph& g, Var x) { return model.forward_head(g, x, head); };
}

QueryFn random_head_query(const DioModel& model, Rng& rng) {
  return [&model, &rng](const Tensor& x) {
    Graph g(false);
    return model.forward_random_head(g, g.constant(x), rng).value().clone();
  };
}

AttackLossFn cross_entropy_objective(LogitsFn logits) {
  return [logits = std::move(logits)](Graph& g, Var x, std::span<const int> y) {
    return softmax_cross_entropy(logits(g, x), y);
  };
}

AttackLossFn head_average_objective(const DioModel& model) {
  return [&model](Graph&, Var x, std::span<const int> y) {
    auto all = model.forward_all_heads(x.graph(), x);
    Var total = softmax_cross_entropy(all[0], y);
    for (std::size_t i = 1; i < all.size(); ++i) total = total + softmax_cross_entropy(all[i], y);
    return scale(total, 1.0 / static_cast<double>(all.size()));
  };
}

Tensor input_gradient(const AttackLossFn& loss, const Tensor& x, std::span<const int> y) {
  Tensor xt = x.clone();
  Graph g(false);
  Var l = loss(g, g.variable(xt), y);
  g.backward(l);
  Tensor grad(x.shape());
  auto gd = grad.data();
  auto src = xt.grad();
  for (std::size_t i = 0; i < gd.size(); ++i) {
    if (!std::isfinite(src[i]))
      throw GradError("attack: non-finite input gradient at coordinate " + std::to_string(i));
    gd[i] = src[i];
  }
  return grad;
}

namespace {

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

void check_batch(const Tensor& x, std::span<const int> y, const char* who) {
  if (!x.valid() || x.rank() < 2 || x.dim(0) != y.size())
    throw ShapeError(who, x.valid() ? x.shape() : Shape{}, Shape{y.size()});
}

std::vector<bool> misclassified(const LogitsFn& model, const Tensor& x, std::span<const int> y) {
  Graph g(false);
  const auto pred = argmax_rows(model(g, g.constant(x)).value());
  std::vector<bool> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = pred[i] != y[i];
  return out;
}

AdversarialBatch package(const Tensor& x_adv, const Tensor& x, std::span<const int> y, bool l2) {
  AdversarialBatch out;
  out.x_adv = x_adv;
  out.x_clean = x;
  out.labels.assign(y.begin(), y.end());
  out.norms = l2 ? l2_distances(x_adv, x) : linf_distances(x_adv, x);
  out.queries.assign(y.size(), 0);
  return out;
}

}  // namespace

std::vector<double> linf_distances(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("linf_distances", a.shape(), b.shape());
  const std::size_t n = a.dim(0), d = a.size() / n;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i] = std::max(out[i], std::fabs(a[i * d + j] - b[i * d + j]));
  return out;
}

std::vector<double> l2_distances(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("l2_distances", a.shape(), b.shape());
  const std::size_t n = a.dim(0), d = a.size() / n;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = a[i * d + j] - b[i * d + j];
      s += t * t;
    }
    out[i] = std::sqrt(s);
  }
  return out;
}

std::vector<double> logit_margins(const Tensor& logits, std::span<const int> y) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (y.size() != n) throw ShapeError("logit_margins", logits.shape(), Shape{y.size()});
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto yi = static_cast<std::size_t>(y[i]);
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j)
      if (j != yi) other = std::max(other, logits[i * k + j]);
    out[i] = logits[i * k + yi] - other;
  }
  return out;
}

// ---------------------------------------------------------------------------

AdversarialBatch fgsm(const LogitsFn& model, const Tensor& x, std::span<const int> y, double eps) {
  check_batch(x, y, "fgsm");
  if (!(eps >= 0) || !std::isfinite(eps)) throw std::invalid_argument("fgsm: eps must be >= 0");
  const Tensor g = input_gradient(cross_entropy_objective(model), x, y);
  Tensor adv(x.shape());
  for (std::size_t i = 0; i < adv.size(); ++i)
    adv[i] = std::clamp(x[i] + eps * sign(g[i]), 0.0, 1.0);
  auto out = package(adv, x, y, false);
  out.gradient_evaluations = 1;
  out.success = misclassified(model, adv, y);
  return out;
}

AdversarialBatch pgd_on_objective(const AttackLossFn& loss, const LogitsFn& judge, const Tensor& x,
                                  std::span<const int> y, const AttackSpec& spec) {
  check_batch(x, y, "pgd");
  spec.validate();
  const double eps = spec.eps;
  Rng rng(spec.seed);
  Tensor adv = x.clone();
  if (spec.random_start && eps > 0) {
    const double lo = spec.literal_uniform_start ? 0.0 : -eps;
    for (std::size_t i = 0; i < adv.size(); ++i)
      adv[i] = std::clamp(x[i] + rng.uniform(lo, eps), 0.0, 1.0);
  }
  for (int t = 0; t < spec.iters; ++t) {
    const Tensor g = input_gradient(loss, adv, y);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const double stepped = adv[i] + spec.step * sign(g[i]);
      adv[i] = std::clamp(std::clamp(stepped, x[i] - eps, x[i] + eps), 0.0, 1.0);
    }
  }
  auto out = package(adv, x, y, false);
  out.gradient_evaluations = static_cast<std::size_t>(spec.iters);
  out.success = misclassified(judge, adv, y);
  return out;
}

AdversarialBatch pgd(const LogitsFn& model, const Tensor& x, std::span<const int> y,
                     const AttackSpec& spec) {
  return pgd_on_objective(cross_entropy_objective(model), model, x, y, spec);
}

AdversarialBatch adapt_a1(const DioModel& model, const Tensor& x, std::span<const int> y,
                          const AttackSpec& spec) {
  Rng judge_rng(mix_seed(spec.seed, 77));
  return pgd_on_objective(head_average_objective(model), random_head_logits(model, judge_rng), x, y,
                          spec);
}

AdversarialBatch adapt_a2(const DioModel& model, std::size_t head, const Tensor& x,
                          std::span<const int> y, const AttackSpec& spec) {
  auto logits = head_logits(model, head);
  return pgd_on_objective(cross_entropy_objective(logits), logits, x, y, spec);
}

// ---------------------------------------------------------------------------
// Carlini-Wagner L2

AdversarialBatch cw_l2(const LogitsFn& model, const Tensor& x, std::span<const int> y,
                       const AttackSpec& spec) {
  check_batch(x, y, "cw_l2");
  spec.validate();
  const CwParams& p = spec.cw;
  const std::size_t n = y.size(), d = x.size() / n;
  const double kappa = p.kappa;

  // tanh-space start; the 0.999999 keeps atanh finite at the box edges.
  Tensor zeta0(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) zeta0[i] = std::atanh((2.0 * x[i] - 1.0) * 0.999999);

  std::vector<double> c(n, p.c), lower(n, 0.0), upper(n, 1e10);
  std::vector<double> best_l2(n, std::numeric_limits<double>::infinity());
  Tensor best = x.clone();
  std::vector<bool> found(n, false);

  // Already-misclassified samples: the clean point is an optimal candidate.
  {
    Graph g(false);
    const auto m = logit_margins(model(g, g.constant(x)).value(), y);
    for (std::size_t i = 0; i < n; ++i)
      if (m[i] <= -kappa && (kappa > 0 || m[i] < 0)) {
        best_l2[i] = 0.0;
        found[i] = true;
      }
  }

  std::size_t grad_evals = 0;
  const std::size_t k_classes = [&] {
    Graph g(false);
    return model(g, g.constant(x)).shape()[1];
  }();

  for (int outer = 0; outer < p.binary_search_steps; ++outer) {
    Tensor zeta = zeta0.clone();
    std::vector<double> m1(zeta.size(), 0.0), m2(zeta.size(), 0.0);
    std::vector<bool> success_this_round(n, false);
    const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

    for (int it = 0; it <= p.max_inner_iters; ++it) {
      zeta.clear_grad();
      Graph g(false);
      Var zv = g.variable(zeta);
      Var xa = scale(add_scalar(tanh(zv), 1.0), 0.5);
      Var diff = xa - g.constant(x);
      Var dist = sum(diff * diff);
      Var logits = model(g, xa);

      std::vector<std::size_t> yi(n), oi(n * (k_classes - 1));
      for (std::size_t r = 0; r < n; ++r) {
        const auto lab = static_cast<std::size_t>(y[r]);
        yi[r] = r * k_classes + lab;
        std::size_t c2 = 0;
        for (std::size_t j = 0; j < k_classes; ++j)
          if (j != lab) oi[r * (k_classes - 1) + c2++] = r * k_classes + j;
      }
      Var zy = gather(logits, yi, Shape{n});
      Var zo = row_max(gather(logits, oi, Shape{n, k_classes - 1}));
      // max(Z_y - max_other, -kappa) = relu(gap + kappa) - kappa
      Var f = add_scalar(relu(add_scalar(zy - zo, kappa)), -kappa);
      Var total = dist + sum(g.constant(Tensor(Shape{n}, c)) * f);

      // Record candidates at the current iterate.
      const Tensor& xav = xa.value();
      const auto margins = logit_margins(logits.value(), y);
      for (std::size_t r = 0; r < n; ++r) {
        const bool adv = kappa > 0 ? margins[r] <= -kappa : margins[r] < 0;
        if (!adv) continue;
        double l2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double t = xav[r * d + j] - x[r * d + j];
          l2 += t * t;
        }
        l2 = std::sqrt(l2);
        if (l2 > spec.eps) continue;
        success_this_round[r] = true;
        if (l2 < best_l2[r]) {
          best_l2[r] = l2;
          found[r] = true;
          for (std::size_t j = 0; j < d; ++j) best[r * d + j] = xav[r * d + j];
        }
      }
      if (it == p.max_inner_iters) break;

      g.backward(total);
      ++grad_evals;
      auto gr = zeta.grad();
      const double t1 = 1.0 - std::pow(b1, it + 1), t2 = 1.0 - std::pow(b2, it + 1);
      for (std::size_t i = 0; i < zeta.size(); ++i) {
        if (!std::isfinite(gr[i])) throw GradError("cw_l2: non-finite gradient");
        m1[i] = b1 * m1[i] + (1 - b1) * gr[i];
        m2[i] = b2 * m2[i] + (1 - b2) * gr[i] * gr[i];
        zeta[i] -= p.lr * (m1[i] / t1) / (std::sqrt(m2[i] / t2) + adam_eps);
      }
    }

    for (std::size_t r = 0; r < n; ++r) {
      if (success_this_round[r]) {
        upper[r] = std::min(upper[r], c[r]);
        c[r] = (lower[r] + upper[r]) / 2.0;
      } else {
        lower[r] = std::max(lower[r], c[r]);
        c[r] = upper[r] < 1e9 ? (lower[r] + upper[r]) / 2.0 : c[r] * 10.0;
      }
    }
  }

  auto out = package(best, x, y, true);
  out.gradient_evaluations = grad_evals;
  out.success.assign(found.begin(), found.end());
  return out;
}

// ---------------------------------------------------------------------------
// Square (L2)

AdversarialBatch square_l2(const QueryFn& model, const Tensor& x, std::span<const int> y,
                           const AttackSpec& spec) {
  check_batch(x, y, "square_l2");
  spec.validate();
  const std::size_t n = y.size(), d = x.size() / n;
  const double eps = spec.eps;
  Tensor adv = x.clone();
  auto out = package(adv, x, y, true);
  out.success.assign(n, false);
  if (spec.iters == 0 || eps == 0) return out;

  Rng rng(spec.seed);
  // Window geometry: side x side squares over (h,w), or contiguous runs of
  // p*d coordinates for flat inputs.
  const bool image = x.rank() == 4;
  const std::size_t ch = image ? x.dim(1) : 1, h = image ? x.dim(2) : 1, w = image ? x.dim(3) : d;

  Tensor cur_logits = model(adv);
  std::vector<double> cur = logit_margins(cur_logits, y);
  std::vector<std::size_t> queries(n, 1);
  std::vector<int> pred = argmax_rows(cur_logits);

  std::vector<double> delta(x.size(), 0.0);
  for (int t = 1; t < spec.iters; ++t) {
    const int phase = (10 * t) / std::max(1, spec.iters);
    const double p = spec.square_p_init * std::pow(0.5, phase);
    Tensor cand(x.shape());
    std::vector<double> cand_delta(x.size());
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> u(d, 0.0);
      if (image) {
        const auto side = std::min<std::size_t>(
            std::min(h, w),
            std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(p * static_cast<double>(h * w))))));
        const std::size_t top = rng.uniform_index(h - side + 1), left = rng.uniform_index(w - side + 1);
        for (std::size_t c = 0; c < ch; ++c) {
          const double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
          for (std::size_t a = 0; a < side; ++a)
            for (std::size_t b = 0; b < side; ++b) u[(c * h + top + a) * w + left + b] = s;
        }
      } else {
        const auto len = std::min<std::size_t>(
            d, std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(p * static_cast<double>(d)))));
        const std::size_t start = rng.uniform_index(d - len + 1);
        for (std::size_t j = start; j < start + len; ++j) u[j] = rng.uniform() < 0.5 ? -1.0 : 1.0;
      }
      double un = 0.0;
      for (double v : u) un += v * v;
      un = std::sqrt(un);
      // Candidate delta: current plus a window step of norm eps, projected
      // back into the L2 ball, then into the box.
      double nn = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        cand_delta[r * d + j] = delta[r * d + j] + eps * u[j] / un;
        nn += cand_delta[r * d + j] * cand_delta[r * d + j];
      }
      nn = std::sqrt(nn);
      const double shrink = nn > eps ? eps / nn : 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double xv = x[r * d + j];
        const double v = std::clamp(xv + cand_delta[r * d + j] * shrink, 0.0, 1.0);
        cand[r * d + j] = v;
        cand_delta[r * d + j] = v - xv;
      }
    }
    const Tensor logits = model(cand);
    const auto m = logit_margins(logits, y);
    const auto cp = argmax_rows(logits);
    for (std::size_t r = 0; r < n; ++r) {
      ++queries[r];
      if (m[r] < cur[r]) {
        cur[r] = m[r];
        pred[r] = cp[r];
        for (std::size_t j = 0; j < d; ++j) {
          delta[r * d + j] = cand_delta[r * d + j];
          adv[r * d + j] = cand[r * d + j];
        }
      }
    }
  }
  out = package(adv, x, y, true);
  out.queries = queries;
  out.success.resize(n);
  for (std::size_t r = 0; r < n; ++r) out.success[r] = pred[r] != y[r];
  return out;
}

// ---------------------------------------------------------------------------

double transfer(const DioModel& source, const DioModel& target, const Tensor& x,
                std::span<const int> y, const AttackSpec& spec, Rng& target_rng) {
  spec.validate();
  if (source.arch().input_shape != target.arch().input_shape ||
      source.num_classes() != target.num_classes())
    throw std::invalid_argument("transfer: source and target disagree on input shape or classes");
  Rng source_rng(mix_seed(spec.seed, 11));
  auto src = random_head_logits(source, source_rng);
  AdversarialBatch adv = spec.transfer_inner == AttackKind::fgsm ? fgsm(src, x, y, spec.eps)
                                                                 : pgd(src, x, y, spec);
  Graph g(false);
  const auto pred = argmax_rows(target.forward_random_head(g, g.constant(adv.x_adv), target_rng).value());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(y.size());
}

}  // namespace dio
