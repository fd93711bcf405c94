#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"

#include "commands.hpp"
#include "helpers.hpp"

using namespace dio::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_binary(const std::string& args) {
  const std::string cmd = std::string(DIO_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

fs::path tiny_config(const fs::path& dir, const std::string& extra = "") {
  const fs::path p = dir / "tiny.json";
  std::ofstream out(p);
  out << R"({"epochs": 2, "heads": 3, "batch_size": 25, "lr_milestones": [1],
            "best_eval_samples": 40,
            "best_attack": {"kind": "pgd", "eps": 0.05, "step": 0.0125, "iters": 2},
            "arch": {"hidden": 12, "features": 8},
            "data": {"train_per_class": 25, "test_per_class": 25})"
      << extra << "}";
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("train, attack, eval") {
  const fs::path dir = dio::test::tmp_dir("cli_pipeline");
  std::ostringstream log, err;
  TrainArgs t;
  t.config = tiny_config(dir).string();
  t.out = (dir / "run").string();
  REQUIRE(cmd_train(t, log, err) == kOk);
  for (const char* f : {"config-echo.json", "best.ckpt", "last.ckpt", "trace.csv", "epochs.csv", "loss.svg",
                        "report.json"})
    CHECK(fs::exists(dir / "run" / f));
  CHECK(read_json(dir / "run" / "config-echo.json")["heads"] == 3);

  AttackArgs a;
  a.ckpt = (dir / "run" / "last.ckpt").string();
  a.attack = "pgd";
  a.eps = 0.031373;
  a.iters = 20;
  a.out = (dir / "pgd").string();
  REQUIRE(cmd_attack(a, log, err) == kOk);
  json rep = read_json(dir / "pgd" / "report.json");
  CHECK(rep["attacks"][0]["spec"]["iters"] == 20);
  CHECK(rep["attacks"][0]["spec"]["eps"].get<double>() == doctest::Approx(8.0 / 255.0).epsilon(1e-4));

  a.attack = "adapt_a2";
  a.iters = 3;
  a.out = (dir / "a2").string();
  REQUIRE(cmd_attack(a, log, err) == kOk);
  CHECK(read_json(dir / "a2" / "report.json")["attacks"][0]["per_head"].size() == 3);

  a.attack = "fgsm";
  a.eps = 0.0;
  a.out = (dir / "zero").string();
  REQUIRE(cmd_attack(a, log, err) == kOk);
  json z = read_json(dir / "zero" / "report.json");
  CHECK(z["attacks"][0]["random_head"] == z["clean"]["random_head"]);

  EvalArgs e;
  e.ckpt = a.ckpt;
  e.attacks = {"fgsm", "square_l2"};
  e.limit = 20;
  e.out = (dir / "eval").string();
  INFO(err.str());
  REQUIRE(cmd_eval(e, log, err) == kOk);
  json ev = read_json(dir / "eval" / "report.json");
  CHECK(ev["samples"] == 20);
  CHECK(ev["auc_per_head"].size() == 3);

  // Same seed, same numbers.
  e.out = (dir / "eval2").string();
  INFO(err.str());
  REQUIRE(cmd_eval(e, log, err) == kOk);
  CHECK(read_json(dir / "eval2" / "report.json") == ev);
}

TEST_CASE("error exit codes") {
  const fs::path dir = dio::test::tmp_dir("cli_errors");
  std::ostringstream log, err;

  TrainArgs t;
  t.config = tiny_config(dir, R"(, "preset": "baseline-vanilla-synth", "beta": 0.1)").string();
  t.out = (dir / "bad").string();
  CHECK(cmd_train(t, log, err) == kUsage);
  CHECK(err.str().find("'tau'") != std::string::npos);

  t.config = tiny_config(dir, R"(, "lr": 1e12, "weight_decay": 0)").string();
  CHECK(cmd_train(t, log, err) == kNumerical);

  AttackArgs a;
  a.ckpt = (dir / "missing.ckpt").string();
  a.out = (dir / "x").string();
  CHECK(cmd_attack(a, log, err) == kUsage);
  a.attack = "bogus";
  CHECK(cmd_attack(a, log, err) == kUsage);

  LemmaArgs l;
  l.d = 8;
  l.eps = 1.0;
  CHECK(cmd_lemma(l, log, err) == kUsage);
}

TEST_CASE("lemma and tau sweep outputs") {
  const fs::path dir = dio::test::tmp_dir("cli_suite");
  std::ostringstream log, err;
  LemmaArgs l;
  l.d = 1000;
  l.eps = 0.1;
  l.trials = 20000;
  l.out = (dir / "lemma").string();
  REQUIRE(cmd_lemma(l, log, err) == kOk);
  json j = read_json(dir / "lemma" / "lemma.json");
  for (const char* k : {"d", "eps", "trials", "empirical", "bound", "sigma", "passed"}) CHECK(j.contains(k));

  SuiteArgs s;
  s.config = tiny_config(dir).string();
  s.out = (dir / "sweep").string();
  REQUIRE(cmd_tau_sweep(s, log, err) == kOk);
  std::ifstream in(dir / "sweep" / "tau_sweep.csv");
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
}

TEST_CASE("binary exit codes") {
  CHECK(run_binary("") == 2);
  CHECK(run_binary("presets") == 0);
  CHECK(run_binary("--help") == 0);
  CHECK(run_binary("lemma --d 8 --eps 1") == 2);
  CHECK(run_binary("attack --ckpt nowhere.ckpt --attack bogus --out /tmp/dio_cli_x") == 2);
  CHECK(run_binary("train --out") == 2);
  CHECK(run_binary("lemma --d 100 --eps 0.2 --trials 2000") == 0);
}

}
