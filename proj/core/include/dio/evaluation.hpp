#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dio/attacks.hpp"
#include "dio/datasets.hpp"
#include "dio/model.hpp"
#include "dio/rng.hpp"
#include "dio/trainer.hpp"

namespace dio {

struct EvalOptions {
  std::size_t batch_size = 250;
};

/// Percentage of argmax-correct predictions; one random head per batch,
/// drawn from `rng`. head_counts (if given) is resized to L and receives the
/// number of samples routed through each head. Throws on an empty dataset.
double accuracy(const DioModel& model, const Dataset& data, Rng& rng, const EvalOptions& opts = {},
                std::vector<std::size_t>* head_counts = nullptr);
double head_accuracy(const DioModel& model, const Dataset& data, std::size_t head,
                     const EvalOptions& opts = {});
std::vector<double> per_head_accuracy(const DioModel& model, const Dataset& data,
                                      const EvalOptions& opts = {});

/// Accuracy (random head per batch, `rng`) on examples crafted per `spec`
/// batch by batch. White-box attacks see the model with its own random
/// head draws; transfer crafts on `source`, which must then be given.
double robust_accuracy(const DioModel& model, const Dataset& data, const AttackSpec& spec, Rng& rng,
                       const EvalOptions& opts = {}, const DioModel* source = nullptr);

/// Per-path robust accuracy. adapt_a1: one set of head-averaged examples,
/// scored by every head. adapt_a2: path i is attacked and scored through
/// head i. Other kinds: examples crafted against the random-head model,
/// scored by each head.
std::vector<double> per_head_robust_accuracy(const DioModel& model, const Dataset& data,
                                             const AttackSpec& spec, const EvalOptions& opts = {});

/// One-vs-rest ROC per class from softmax scores, TPR averaged across
/// classes on a 101-point FPR grid, trapezoid AUC; one value per head.
/// Throws std::invalid_argument if some class is absent (or is everything).
std::vector<double> roc_auc_per_head(const DioModel& model, const Dataset& data,
                                     const EvalOptions& opts = {});
/// Same computation for a single score matrix (n, K).
double macro_auc(const Tensor& scores, std::span<const int> labels);

struct AttackResult {
  AttackSpec spec;
  double random_head = 0.0;
  std::vector<double> per_head;
};

struct EvalReport {
  double clean_random_head = 0.0;
  std::vector<double> clean_per_head;
  std::vector<std::size_t> head_counts;
  std::vector<AttackResult> attacks;
  std::vector<double> auc_per_head;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::string config_echo;  // JSON text, may be empty

  std::string to_json() const;
};

/// Clean, per-head, AUC and every attack in `specs` (exactly once each).
EvalReport evaluate(const DioModel& model, const Dataset& data, const std::vector<AttackSpec>& specs,
                    std::uint64_t seed, const EvalOptions& opts = {},
                    const DioModel* transfer_source = nullptr);

struct SweepRow {
  double tau = 0.0;
  double clean = 0.0;
  double robust = 0.0;
};

/// Trains one model per tau from the same seed and evaluates it.
/// Throws std::invalid_argument for fewer than two values.
std::vector<SweepRow> tau_sweep(const TrainConfig& base, const std::vector<double>& taus,
                                const AttackSpec& attack, const DataPair& data,
                                std::uint64_t eval_seed = 0);
std::string tau_sweep_csv(const std::vector<SweepRow>& rows);

struct AblationRow {
  std::string setup;
  std::size_t heads = 1;
  bool orthogonality = false;  // L_o active
  bool margin = false;         // L_d active
  double clean = 0.0;
  double robust = 0.0;
};

/// The four configurations: baseline (L=1, no penalties), without L_o
/// (L=1, L_d), without L_d (L=10, L_o), full (L=10, both).
std::vector<TrainConfig> ablation_configs(const TrainConfig& base);
std::vector<AblationRow> ablation_suite(const TrainConfig& base, const AttackSpec& attack,
                                        const DataPair& data, std::uint64_t eval_seed = 0);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace dio
