#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dio/attacks.hpp"
#include "dio/datasets.hpp"
#include "dio/losses.hpp"
#include "dio/model.hpp"

namespace dio {

/// eta_0 * decay^k, k = number of milestones <= epoch.
struct LrSchedule {
  double initial = 0.1;
  double decay = 0.1;
  std::vector<int> milestones;
};

/// Throws std::invalid_argument for epoch < 0.
double lr_at(const LrSchedule& schedule, int epoch);

struct TrainConfig {
  std::string name = "dio";
  ArchSpec arch;  // arch.heads is L
  LossWeights weights;
  int epochs = 30;
  std::size_t batch_size = 50;
  LrSchedule lr;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool adv_train = false;
  AttackSpec adv_spec = AttackSpec::pgd(0.05, 0.0125, 10);
  std::uint64_t seed = 0;
  DataSpec data;

  /// BEST checkpoint selection: robust test accuracy under this attack on
  /// the first best_eval_samples test points. Off -> best is last.
  bool select_best = true;
  AttackSpec best_spec = AttackSpec::pgd(0.05, 0.0125, 20);
  std::size_t best_eval_samples = 500;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossBreakdown loss;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  std::vector<double> train_accuracy;  // per head, %
  std::vector<double> test_accuracy;   // per head, %
  double robust_accuracy = -1.0;       // selection metric, -1 when not measured
  double orthogonality = 0.0;          // L_o at epoch end
};

struct TrainTrace {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  /// Per-step CSV with header epoch,step,L_c,L_o,L_d,total.
  std::string steps_csv() const;
  /// Per-epoch CSV: epoch,lr,robust,L_o,train_h0..,test_h0..
  std::string epochs_csv() const;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  DioModel last;
  DioModel best;
  std::size_t best_epoch = 0;
  double best_metric = -1.0;
  TrainTrace trace;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Runs the full training loop. Each batch optionally replaces the clean
/// inputs with adversarial ones crafted against one uniformly drawn head,
/// then takes one SGD step on the combined objective. Throws
/// DivergenceError when the objective becomes non-finite.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& test_set,
                  const EpochCallback& on_epoch = {});
/// Loads config.data first.
TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace dio
