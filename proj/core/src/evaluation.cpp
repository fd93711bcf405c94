#include "dio/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json_io.hpp"

namespace dio {

namespace {

void require_nonempty(const Dataset& data, const char* who) {
  if (data.size() == 0) throw std::invalid_argument(std::string(who) + ": empty dataset");
}

std::size_t count_correct(const Tensor& logits, std::span<const int> y) {
  const auto pred = argmax_rows(logits);
  std::size_t c = 0;
  for (std::size_t i = 0; i < y.size(); ++i) c += pred[i] == y[i];
  return c;
}

double percent(std::size_t correct, std::size_t total) {
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

// Crafts adversarial inputs for one batch. Batch b gets its own attack seed.
Tensor craft(const DioModel& model, const Tensor& x, std::span<const int> y, const AttackSpec& spec,
             std::size_t b, const DioModel* source) {
  AttackSpec s = spec;
  s.seed = mix_seed(spec.seed, b);
  Rng attack_rng(mix_seed(spec.seed, 1'000'000 + b));
  switch (spec.kind) {
    case AttackKind::fgsm: return fgsm(random_head_logits(model, attack_rng), x, y, s.eps).x_adv;
    case AttackKind::pgd: return pgd(random_head_logits(model, attack_rng), x, y, s).x_adv;
    case AttackKind::cw_l2: return cw_l2(random_head_logits(model, attack_rng), x, y, s).x_adv;
    case AttackKind::square_l2: return square_l2(random_head_query(model, attack_rng), x, y, s).x_adv;
    case AttackKind::adapt_a1: return adapt_a1(model, x, y, s).x_adv;
    case AttackKind::adapt_a2: return adapt_a2(model, s.head, x, y, s).x_adv;
    case AttackKind::transfer: {
      if (!source) throw std::invalid_argument("transfer attack needs a source model");
      if (source->arch().input_shape != model.arch().input_shape ||
          source->num_classes() != model.num_classes())
        throw std::invalid_argument("transfer: source and target disagree on input shape or classes");
      auto src = random_head_logits(*source, attack_rng);
      return s.transfer_inner == AttackKind::fgsm ? fgsm(src, x, y, s.eps).x_adv : pgd(src, x, y, s).x_adv;
    }
  }
  throw std::logic_error("unhandled attack kind");
}

}  // namespace

double accuracy(const DioModel& model, const Dataset& data, Rng& rng, const EvalOptions& opts,
                std::vector<std::size_t>* head_counts) {
  require_nonempty(data, "accuracy");
  if (head_counts) head_counts->assign(model.num_heads(), 0);
  std::size_t correct = 0;
  for (const auto& batch : sequential_batches(data, opts.batch_size)) {
    Graph g(false);
    std::size_t drawn = 0;
    correct += count_correct(model.forward_random_head(g, g.constant(batch.inputs), rng, &drawn).value(),
                             batch.labels);
    if (head_counts) (*head_counts)[drawn] += batch.labels.size();
  }
  return percent(correct, data.size());
}

double head_accuracy(const DioModel& model, const Dataset& data, std::size_t head,
                     const EvalOptions& opts) {
  require_nonempty(data, "head_accuracy");
  std::size_t correct = 0;
  for (const auto& batch : sequential_batches(data, opts.batch_size))
    correct += count_correct(predict_head(model, batch.inputs, head), batch.labels);
  return percent(correct, data.size());
}

std::vector<double> per_head_accuracy(const DioModel& model, const Dataset& data,
                                      const EvalOptions& opts) {
  require_nonempty(data, "per_head_accuracy");
  std::vector<std::size_t> correct(model.num_heads(), 0);
  for (const auto& batch : sequential_batches(data, opts.batch_size)) {
    const auto all = predict_all_heads(model, batch.inputs);
    for (std::size_t h = 0; h < all.size(); ++h) correct[h] += count_correct(all[h], batch.labels);
  }
  std::vector<double> out;
  for (auto c : correct) out.push_back(percent(c, data.size()));
  return out;
}

double robust_accuracy(const DioModel& model, const Dataset& data, const AttackSpec& spec, Rng& rng,
                       const EvalOptions& opts, const DioModel* source) {
  require_nonempty(data, "robust_accuracy");
  spec.validate();
  std::size_t correct = 0, b = 0;
  for (const auto& batch : sequential_batches(data, opts.batch_size)) {
    const Tensor adv = craft(model, batch.inputs, batch.labels, spec, b++, source);
    Graph g(false);
    correct += count_correct(model.forward_random_head(g, g.constant(adv), rng).value(), batch.labels);
  }
  return percent(correct, data.size());
}

std::vector<double> per_head_robust_accuracy(const DioModel& model, const Dataset& data,
                                             const AttackSpec& spec, const EvalOptions& opts) {
  require_nonempty(data, "per_head_robust_accuracy");
  spec.validate();
  const std::size_t L = model.num_heads();
  std::vector<std::size_t> correct(L, 0);
  std::size_t b = 0;
  for (const auto& batch : sequential_batches(data, opts.batch_size)) {
    if (spec.kind == AttackKind::adapt_a2) {
      for (std::size_t h = 0; h < L; ++h) {
        AttackSpec s = spec;
        s.head = h;
        s.seed = mix_seed(spec.seed, b);
        const Tensor adv = adapt_a2(model, h, batch.inputs, batch.labels, s).x_adv;
        correct[h] += count_correct(predict_head(model, adv, h), batch.labels);
      }
    } else {
      const Tensor adv = craft(model, batch.inputs, batch.labels, spec, b, nullptr);
      const auto all = predict_all_heads(model, adv);
      for (std::size_t h = 0; h < L; ++h) correct[h] += count_correct(all[h], batch.labels);
    }
    ++b;
  }
  std::vector<double> out;
  for (auto c : correct) out.push_back(percent(c, data.size()));
  return out;
}

// ---------------------------------------------------------------------------
// ROC / AUC

namespace {

constexpr std::size_t kFprGrid = 101;

// TPR at `x` on a ROC polyline sorted by FPR; at a vertical segment the top
// point is used.
double interp_tpr(const std::vector<std::pair<double, double>>& roc, double x) {
  std::size_t i = 0;
  while (i + 1 < roc.size() && roc[i + 1].first <= x) ++i;
  if (i + 1 == roc.size()) return roc[i].second;
  const auto [x0, y0] = roc[i];
  const auto [x1, y1] = roc[i + 1];
  return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
}

}  // namespace

double macro_auc(const Tensor& scores, std::span<const int> labels) {
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  if (labels.size() != n) throw ShapeError("macro_auc", scores.shape(), Shape{labels.size()});
  if (k < 2) throw std::invalid_argument("macro_auc: need K >= 2");
  std::vector<double> mean_tpr(kFprGrid, 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pos = 0;
    for (int y : labels) pos += static_cast<std::size_t>(y) == c;
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0)
      throw std::invalid_argument("macro_auc: class " + std::to_string(c) +
                                  (pos == 0 ? " is absent" : " is the only class present"));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a * k + c] > scores[b * k + c]; });
    std::vector<std::pair<double, double>> roc{{0.0, 0.0}};
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = order[i];
      (static_cast<std::size_t>(labels[r]) == c ? tp : fp) += 1;
      // Emit a point only once all tied scores are consumed.
      if (i + 1 < n && scores[order[i + 1] * k + c] == scores[r * k + c]) continue;
      roc.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                       static_cast<double>(tp) / static_cast<double>(pos));
    }
    for (std::size_t g = 0; g < kFprGrid; ++g)
      mean_tpr[g] += interp_tpr(roc, static_cast<double>(g) / (kFprGrid - 1));
  }
  double auc = 0.0;
  const double h = 1.0 / (kFprGrid - 1);
  for (std::size_t g = 0; g + 1 < kFprGrid; ++g)
    auc += 0.5 * h * (mean_tpr[g] + mean_tpr[g + 1]) / static_cast<double>(k);
  return auc;
}

std::vector<double> roc_auc_per_head(const DioModel& model, const Dataset& data,
                                     const EvalOptions& opts) {
  require_nonempty(data, "roc_auc_per_head");
  const std::size_t L = model.num_heads(), k = model.num_classes(), n = data.size();
  // One buffer per head; Tensor copies would share storage.
  std::vector<Tensor> scores;
  for (std::size_t h = 0; h < L; ++h) scores.emplace_back(Shape{n, k});
  std::size_t row = 0;
  for (const auto& batch : sequential_batches(data, opts.batch_size)) {
    const auto all = predict_all_heads(model, batch.inputs);
    for (std::size_t h = 0; h < L; ++h) {
      const auto& z = all[h];
      for (std::size_t i = 0; i < batch.labels.size(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, z[i * k + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(z[i * k + j] - mx);
        for (std::size_t j = 0; j < k; ++j) scores[h][(row + i) * k + j] = std::exp(z[i * k + j] - mx) / s;
      }
    }
    row += batch.labels.size();
  }
  std::vector<double> out;
  for (const auto& s : scores) out.push_back(macro_auc(s, data.labels));
  return out;
}

// ---------------------------------------------------------------------------
// Reports

EvalReport evaluate(const DioModel& model, const Dataset& data, const std::vector<AttackSpec>& specs,
                    std::uint64_t seed, const EvalOptions& opts, const DioModel* transfer_source) {
  EvalReport r;
  r.samples = data.size();
  r.seed = seed;
  Rng clean_rng(mix_seed(seed, 0));
  r.clean_random_head = accuracy(model, data, clean_rng, opts, &r.head_counts);
  r.clean_per_head = per_head_accuracy(model, data, opts);
  r.auc_per_head = roc_auc_per_head(model, data, opts);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    AttackResult a;
    a.spec = specs[i];
    // Same evaluation draws as the clean pass, so eps = 0 reproduces it.
    Rng rng(mix_seed(seed, 0));
    a.random_head = robust_accuracy(model, data, specs[i], rng, opts, transfer_source);
    if (specs[i].kind != AttackKind::transfer) a.per_head = per_head_robust_accuracy(model, data, specs[i], opts);
    r.attacks.push_back(std::move(a));
  }
  return r;
}

std::string EvalReport::to_json() const {
  using detail::json;
  json j = {{"clean", {{"random_head", clean_random_head}, {"per_head", clean_per_head}}},
            {"head_counts", head_counts},
            {"auc_per_head", auc_per_head},
            {"samples", samples},
            {"seed", seed}};
  json attacks_j = json::array();
  for (const auto& a : attacks)
    attacks_j.push_back({{"spec", detail::to_json(a.spec)}, {"random_head", a.random_head}, {"per_head", a.per_head}});
  j["attacks"] = attacks_j;
  if (!config_echo.empty()) j["config"] = json::parse(config_echo);
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Experiment tables

std::vector<SweepRow> tau_sweep(const TrainConfig& base, const std::vector<double>& taus,
                                const AttackSpec& attack, const DataPair& data, std::uint64_t eval_seed) {
  if (taus.size() < 2) throw std::invalid_argument("tau_sweep: need at least two tau values");
  std::vector<SweepRow> rows;
  for (double tau : taus) {
    TrainConfig c = base;
    c.weights.tau = tau;
    c.select_best = false;
    const auto res = train(c, data.train, data.test);
    Rng clean_rng(eval_seed), adv_rng(eval_seed);
    rows.push_back({tau, accuracy(res.last, data.test, clean_rng),
                    robust_accuracy(res.last, data.test, attack, adv_rng)});
  }
  return rows;
}

std::string tau_sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "tau,clean,robust\n";
  for (const auto& r : rows) os << r.tau << ',' << r.clean << ',' << r.robust << '\n';
  return os.str();
}

std::vector<TrainConfig> ablation_configs(const TrainConfig& base) {
  std::vector<TrainConfig> out(4, base);
  out[0].name = "baseline";
  out[0].arch.heads = 1;
  out[0].weights.alpha = 0.0;
  out[0].weights.beta = 0.0;

  out[1].name = "DIO w/o L_o";
  out[1].arch.heads = 1;
  out[1].weights.alpha = 0.0;

  out[2].name = "DIO w/o L_d";
  out[2].arch.heads = 10;
  out[2].weights.beta = 0.0;

  out[3].name = "DIO";
  out[3].arch.heads = 10;
  for (auto& c : out) c.select_best = false;
  return out;
}

std::vector<AblationRow> ablation_suite(const TrainConfig& base, const AttackSpec& attack,
                                        const DataPair& data, std::uint64_t eval_seed) {
  std::vector<AblationRow> rows;
  for (const auto& c : ablation_configs(base)) {
    const auto res = train(c, data.train, data.test);
    Rng clean_rng(eval_seed), adv_rng(eval_seed);
    AblationRow row;
    row.setup = c.name;
    row.heads = c.arch.heads;
    row.orthogonality = c.arch.heads > 1 && c.weights.alpha > 0;
    row.margin = c.weights.beta > 0;
    row.clean = accuracy(res.last, data.test, clean_rng);
    row.robust = robust_accuracy(res.last, data.test, attack, adv_rng);
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "setup,heads,L_o,L_d,clean,robust\n";
  for (const auto& r : rows)
    os << r.setup << ',' << r.heads << ',' << (r.orthogonality ? 1 : 0) << ',' << (r.margin ? 1 : 0) << ','
       << r.clean << ',' << r.robust << '\n';
  return os.str();
}

}  // namespace dio
