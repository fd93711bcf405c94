#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dio::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kNumerical = 3;

struct TrainArgs {
  std::string config;  // path, optional
  std::string preset;  // used when no config is given
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<std::size_t> heads;
  std::optional<double> alpha, beta, tau, lr;
  std::optional<bool> adv_train;
};

struct AttackArgs {
  std::string ckpt;
  std::string attack = "pgd";
  std::optional<double> eps, step;
  std::optional<int> iters;
  std::uint64_t seed = 0;
  std::string source;  // transfer source checkpoint
  std::string dataset = "test";
  std::size_t limit = 0;  // 0 = whole split
  std::string out;
};

struct EvalArgs {
  std::string ckpt;
  std::string dataset = "test";
  std::vector<std::string> attacks{"fgsm", "pgd"};
  std::optional<double> eps;
  std::uint64_t seed = 0;
  std::size_t limit = 0;
  std::string out;
};

struct LemmaArgs {
  std::size_t d = 10000;
  double eps = 0.1;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
  std::string out;  // empty: stdout only
};

struct SuiteArgs {
  std::string config;
  std::string out;
  std::string attack = "fgsm";
  std::optional<double> eps;
  std::vector<double> taus{0.5, 1.0, 2.0, 3.0, 4.0};
  std::uint64_t eval_seed = 0;
};

// Each command maps exceptions to exit codes and reports errors on `err`.
int cmd_train(const TrainArgs& a, std::ostream& log, std::ostream& err);
int cmd_attack(const AttackArgs& a, std::ostream& log, std::ostream& err);
int cmd_eval(const EvalArgs& a, std::ostream& log, std::ostream& err);
int cmd_lemma(const LemmaArgs& a, std::ostream& log, std::ostream& err);
int cmd_ablate(const SuiteArgs& a, std::ostream& log, std::ostream& err);
int cmd_tau_sweep(const SuiteArgs& a, std::ostream& log, std::ostream& err);
int cmd_presets(std::ostream& log);

}  // namespace dio::cli
