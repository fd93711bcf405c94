#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace dio::cli;
  CLI::App app{"dio: multi-head orthogonal defense lab"};
  app.require_subcommand(1);

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train a model from a config or preset");
  train->add_option("--config", tr.config, "JSON config path");
  train->add_option("--preset", tr.preset, "preset name when no config is given");
  train->add_option("--out", tr.out, "output directory")->required();
  train->add_option("--seed", tr.seed, "run seed (overrides config and DIO_SEED)");
  train->add_option("--epochs", tr.epochs);
  train->add_option("--heads", tr.heads, "number of heads L");
  train->add_option("--alpha", tr.alpha);
  train->add_option("--beta", tr.beta);
  train->add_option("--tau", tr.tau);
  train->add_option("--lr", tr.lr);
  train->add_option("--adv-train", tr.adv_train, "true/false");

  AttackArgs at;
  auto* attack = app.add_subcommand("attack", "attack a checkpoint and report robust accuracy");
  attack->add_option("--ckpt", at.ckpt)->required();
  attack->add_option("--attack", at.attack, "fgsm|pgd|cw_l2|square_l2|transfer|adapt_a1|adapt_a2");
  attack->add_option("--eps", at.eps);
  attack->add_option("--step", at.step);
  attack->add_option("--iters", at.iters);
  attack->add_option("--seed", at.seed);
  attack->add_option("--source", at.source, "source checkpoint for transfer");
  attack->add_option("--dataset", at.dataset, "train|test");
  attack->add_option("--limit", at.limit, "evaluate the first N samples only");
  attack->add_option("--out", at.out)->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "clean, per-head, AUC and attack report");
  eval->add_option("--ckpt", ev.ckpt)->required();
  eval->add_option("--dataset", ev.dataset, "train|test");
  eval->add_option("--attacks", ev.attacks)->delimiter(',');
  eval->add_option("--eps", ev.eps);
  eval->add_option("--seed", ev.seed);
  eval->add_option("--limit", ev.limit);
  eval->add_option("--out", ev.out)->required();

  LemmaArgs le;
  auto* lemma = app.add_subcommand("lemma", "Monte-Carlo check of the inner-product concentration bound");
  lemma->add_option("--d", le.d);
  lemma->add_option("--eps", le.eps);
  lemma->add_option("--trials", le.trials);
  lemma->add_option("--seed", le.seed);
  lemma->add_option("--out", le.out);

  SuiteArgs ab;
  auto* ablate = app.add_subcommand("ablate", "four-row ablation table");
  ablate->add_option("--config", ab.config);
  ablate->add_option("--out", ab.out)->required();
  ablate->add_option("--attack", ab.attack);
  ablate->add_option("--eps", ab.eps);
  ablate->add_option("--seed", ab.eval_seed, "evaluation seed");

  SuiteArgs ts;
  auto* sweep = app.add_subcommand("tau-sweep", "train and evaluate one model per tau");
  sweep->add_option("--config", ts.config);
  sweep->add_option("--taus", ts.taus)->delimiter(',');
  sweep->add_option("--out", ts.out)->required();
  sweep->add_option("--attack", ts.attack);
  sweep->add_option("--eps", ts.eps);
  sweep->add_option("--seed", ts.eval_seed, "evaluation seed");

  auto* presets = app.add_subcommand("presets", "list built-in presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*train) return cmd_train(tr, std::cout, std::cerr);
  if (*attack) return cmd_attack(at, std::cout, std::cerr);
  if (*eval) return cmd_eval(ev, std::cout, std::cerr);
  if (*lemma) return cmd_lemma(le, std::cout, std::cerr);
  if (*ablate) return cmd_ablate(ab, std::cout, std::cerr);
  if (*sweep) return cmd_tau_sweep(ts, std::cout, std::cerr);
  if (*presets) return cmd_presets(std::cout);
  return kUsage;
}
