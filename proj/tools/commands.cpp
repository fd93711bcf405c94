#include "commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "dio/config.hpp"
#include "dio/datasets.hpp"
#include "dio/evaluation.hpp"
#include "dio/ortho_geometry.hpp"
#include "dio/plot.hpp"
#include "dio/serialization.hpp"
#include "dio/trainer.hpp"
#include "json.hpp"

namespace dio::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const GradError& e) {
    err << "error: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const ConfigError& e) {
    err << "error: config field '" << e.field() << "': " << e.what() << '\n';
    return kUsage;
  } catch (const CheckpointError& e) {
    err << "error: checkpoint: " << e.what() << '\n';
    return kUsage;
  } catch (const IdxError& e) {
    err << "error: dataset: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw UsageError("cannot write " + p.string());
  out << text;
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  fs::create_directories(out);
  return fs::path(out);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrainConfig resolve_config(const std::string& config_path, const json& overrides) {
  const std::string doc = config_path.empty() ? "{}" : read_text(config_path);
  return parse_config(doc, overrides.dump());
}

struct Loaded {
  Checkpoint ck;
  TrainConfig config;
  Dataset data;
};

Loaded load_for_eval(const std::string& ckpt, const std::string& split, std::size_t limit) {
  if (ckpt.empty()) throw UsageError("--ckpt is required");
  Loaded l{load_checkpoint(ckpt), {}, {}};
  if (l.ck.meta.config_json.empty())
    throw CheckpointError(ckpt + ": manifest carries no training config; cannot resolve the dataset");
  l.config = parse_config(l.ck.meta.config_json, false);
  const DataPair pair = load_data(l.config.data);
  if (split == "test") l.data = pair.test;
  else if (split == "train") l.data = pair.train;
  else throw UsageError("--dataset must be 'train' or 'test'");
  if (limit > 0 && limit < l.data.size()) {
    std::vector<std::size_t> idx(limit);
    for (std::size_t i = 0; i < limit; ++i) idx[i] = i;
    l.data = l.data.subset(idx);
  }
  return l;
}

AttackSpec make_spec(const std::string& kind, std::optional<double> eps, std::optional<double> step,
                     std::optional<int> iters, std::uint64_t seed) {
  AttackKind k;
  try {
    k = parse_attack_kind(kind);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--attack: ") + e.what());
  }
  AttackSpec s = default_attack(k);
  if (eps) {
    s.eps = *eps;
    if (!step && (k == AttackKind::pgd || k == AttackKind::adapt_a1 || k == AttackKind::adapt_a2))
      s.step = *eps / 4.0;
  }
  if (step) s.step = *step;
  if (iters) {
    s.iters = *iters;
    s.cw.max_inner_iters = *iters;
  }
  s.seed = seed;
  s.validate();
  return s;
}

std::string head_labels_svg(const std::string& title, const std::vector<double>& v) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < v.size(); ++i) labels.push_back("head " + std::to_string(i));
  return svg_bar_chart(title, labels, v, "accuracy (%)");
}

}  // namespace

int cmd_train(const TrainArgs& a, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    json over = json::object();
    if (!a.preset.empty()) over["preset"] = a.preset;
    if (a.seed) over["seed"] = *a.seed;
    if (a.epochs) over["epochs"] = *a.epochs;
    if (a.heads) over["heads"] = *a.heads;
    if (a.alpha) over["alpha"] = *a.alpha;
    if (a.beta) over["beta"] = *a.beta;
    if (a.tau) over["tau"] = *a.tau;
    if (a.lr) over["lr"] = *a.lr;
    if (a.adv_train) over["adv_train"] = *a.adv_train;
    const TrainConfig cfg = resolve_config(a.config, over);
    const fs::path out = prepare_out(a.out);
    const std::string echo = config_to_json(cfg);
    write_file(out / "config-echo.json", echo + "\n");

    const DataPair data = load_data(cfg.data);
    log << "training '" << cfg.name << "': L=" << cfg.arch.heads << " epochs=" << cfg.epochs
        << " adv_train=" << (cfg.adv_train ? "true" : "false") << " seed=" << cfg.seed << '\n';
    const auto res = train(cfg, data.train, data.test, [&](const EpochRecord& e) {
      double mean = 0.0;
      for (double v : e.test_accuracy) mean += v;
      mean /= static_cast<double>(e.test_accuracy.size());
      log << "  epoch " << e.epoch << " lr=" << e.lr << " test(mean head)=" << mean;
      if (e.robust_accuracy >= 0) log << " robust=" << e.robust_accuracy;
      log << " L_o=" << e.orthogonality << '\n';
    });

    auto meta = [&](const std::string& tag, std::size_t epoch) {
      CheckpointMeta cm;
      cm.tag = tag;
      cm.seed = cfg.seed;
      cm.epoch = epoch;
      cm.config_json = echo;
      const auto& rec = res.trace.epochs.at(epoch);
      if (rec.robust_accuracy >= 0) cm.metrics["robust_accuracy"] = rec.robust_accuracy;
      return cm;
    };
    save_checkpoint(out / "best.ckpt", res.best, meta("best", res.best_epoch));
    save_checkpoint(out / "last.ckpt", res.last, meta("last", res.trace.epochs.size() - 1));
    write_file(out / "trace.csv", res.trace.steps_csv());
    write_file(out / "epochs.csv", res.trace.epochs_csv());

    std::vector<Series> curves(4);
    curves[0].name = "L_c";
    curves[1].name = "L_o";
    curves[2].name = "L_d";
    curves[3].name = "total";
    for (const auto& s : res.trace.steps) {
      const double x = static_cast<double>(s.step);
      const double vals[] = {s.loss.classification, s.loss.orthogonality, s.loss.margin, s.loss.total};
      for (int i = 0; i < 4; ++i) {
        curves[static_cast<std::size_t>(i)].x.push_back(x);
        curves[static_cast<std::size_t>(i)].y.push_back(vals[i]);
      }
    }
    write_file(out / "loss.svg", svg_line_chart("training losses", curves, "step", "loss (log10)", true));

    EvalReport rep = evaluate(res.last, data.test,
                              {AttackSpec::fgsm(cfg.best_spec.eps), cfg.best_spec}, cfg.seed);
    rep.config_echo = echo;
    write_file(out / "report.json", rep.to_json() + "\n");
    log << "clean(random head)=" << rep.clean_random_head << " fgsm=" << rep.attacks[0].random_head
        << " pgd=" << rep.attacks[1].random_head << "\nartifacts written to " << out.string() << '\n';
    return kOk;
  });
}

int cmd_attack(const AttackArgs& a, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const AttackSpec spec = make_spec(a.attack, a.eps, a.step, a.iters, a.seed);
    const fs::path out = prepare_out(a.out);
    Loaded l = load_for_eval(a.ckpt, a.dataset, a.limit);
    std::optional<Checkpoint> source;
    if (spec.kind == AttackKind::transfer) {
      if (a.source.empty()) throw UsageError("--source is required for the transfer attack");
      source = load_checkpoint(a.source);
    }
    EvalReport rep = evaluate(l.ck.model, l.data, {spec}, a.seed, {}, source ? &source->model : nullptr);
    rep.config_echo = l.ck.meta.config_json;
    write_file(out / "report.json", rep.to_json() + "\n");
    const auto& r = rep.attacks.front();
    if (spec.kind == AttackKind::adapt_a1 || spec.kind == AttackKind::adapt_a2)
      write_file(out / "per_head.svg", head_labels_svg(to_string(spec.kind) + " per path", r.per_head));
    log << to_string(spec.kind) << " eps=" << spec.eps << ": clean=" << rep.clean_random_head
        << " robust=" << r.random_head;
    if (!r.per_head.empty()) {
      log << " per-head=[";
      for (std::size_t i = 0; i < r.per_head.size(); ++i) log << (i ? ", " : "") << r.per_head[i];
      log << "]";
    }
    log << '\n';
    return kOk;
  });
}

int cmd_eval(const EvalArgs& a, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<AttackSpec> specs;
    for (const auto& k : a.attacks) specs.push_back(make_spec(k, a.eps, std::nullopt, std::nullopt, a.seed));
    const fs::path out = prepare_out(a.out);
    Loaded l = load_for_eval(a.ckpt, a.dataset, a.limit);
    EvalReport rep = evaluate(l.ck.model, l.data, specs, a.seed);
    rep.config_echo = l.ck.meta.config_json;
    write_file(out / "report.json", rep.to_json() + "\n");
    write_file(out / "per_head.svg", head_labels_svg("clean accuracy per head", rep.clean_per_head));
    log << "clean(random head)=" << rep.clean_random_head;
    for (const auto& r : rep.attacks) log << ' ' << to_string(r.spec.kind) << '=' << r.random_head;
    log << " auc=[";
    for (std::size_t i = 0; i < rep.auc_per_head.size(); ++i) log << (i ? ", " : "") << rep.auc_per_head[i];
    log << "]\n";
    return kOk;
  });
}

int cmd_lemma(const LemmaArgs& a, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const LemmaTrial t = lemma1_check(a.d, a.eps, a.trials, a.seed);
    const json j = {{"d", t.dim},       {"eps", t.eps},     {"trials", t.trials}, {"seed", a.seed},
                    {"empirical", t.empirical}, {"bound", t.bound}, {"sigma", t.sigma}, {"passed", t.passed}};
    if (!a.out.empty()) write_file(prepare_out(a.out) / "lemma.json", j.dump(2) + "\n");
    log << j.dump(2) << '\n';
    return kOk;
  });
}

namespace {

AttackSpec suite_attack(const SuiteArgs& a, const TrainConfig& cfg) {
  return make_spec(a.attack, a.eps ? a.eps : std::optional<double>(cfg.best_spec.eps), std::nullopt,
                   std::nullopt, a.eval_seed);
}

}  // namespace

int cmd_ablate(const SuiteArgs& a, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const TrainConfig cfg = resolve_config(a.config, json::object());
    const AttackSpec spec = suite_attack(a, cfg);
    const fs::path out = prepare_out(a.out);
    const auto rows = ablation_suite(cfg, spec, load_data(cfg.data), a.eval_seed);
    write_file(out / "ablation.csv", ablation_csv(rows));
    std::vector<std::string> names;
    std::vector<double> robust;
    for (const auto& r : rows) {
      names.push_back(r.setup);
      robust.push_back(r.robust);
    }
    write_file(out / "ablation.svg", svg_bar_chart("ablation: robust accuracy", names, robust, "accuracy (%)"));
    log << ablation_csv(rows);
    return kOk;
  });
}

int cmd_tau_sweep(const SuiteArgs& a, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const TrainConfig cfg = resolve_config(a.config, json::object());
    const AttackSpec spec = suite_attack(a, cfg);
    const fs::path out = prepare_out(a.out);
    const auto rows = tau_sweep(cfg, a.taus, spec, load_data(cfg.data), a.eval_seed);
    write_file(out / "tau_sweep.csv", tau_sweep_csv(rows));
    Series clean{"clean", {}, {}}, robust{"robust", {}, {}};
    for (const auto& r : rows) {
      clean.x.push_back(r.tau);
      clean.y.push_back(r.clean);
      robust.x.push_back(r.tau);
      robust.y.push_back(r.robust);
    }
    write_file(out / "tau_sweep.svg", svg_line_chart("tau sweep", {clean, robust}, "tau", "accuracy (%)"));
    log << tau_sweep_csv(rows);
    return kOk;
  });
}

int cmd_presets(std::ostream& log) {
  for (const auto& n : preset_names()) log << n << '\n';
  return kOk;
}

}  // namespace dio::cli
