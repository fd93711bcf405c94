#include "dio/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "dio/evaluation.hpp"
#include "dio/sgd.hpp"

namespace dio {

double lr_at(const LrSchedule& schedule, int epoch) {
  if (epoch < 0) throw std::invalid_argument("lr_at: epoch must be >= 0");
  double lr = schedule.initial;
  for (int m : schedule.milestones)
    if (m <= epoch) lr *= schedule.decay;
  return lr;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (arch.heads < 1) fail("heads", "must be >= 1");
  if (arch.classes < 2) fail("arch.classes", "must be >= 2");
  try {
    weights.validate();
  } catch (const std::invalid_argument& e) {
    fail("weights", e.what());
  }
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(lr.initial > 0) || !std::isfinite(lr.initial)) fail("lr", "must be finite and > 0");
  if (!(lr.decay > 0) || !std::isfinite(lr.decay)) fail("lr_decay", "must be finite and > 0");
  for (std::size_t i = 0; i < lr.milestones.size(); ++i) {
    // Milestones at or past `epochs` never fire; allowed so --epochs can shorten a preset.
    if (lr.milestones[i] < 0) fail("lr_milestones", "must be >= 0");
    if (i > 0 && lr.milestones[i] <= lr.milestones[i - 1]) fail("lr_milestones", "must be strictly increasing");
  }
  if (!(momentum >= 0 && momentum < 1)) fail("momentum", "must be in [0,1)");
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) fail("weight_decay", "must be >= 0");
  if (adv_train) {
    if (adv_spec.kind != AttackKind::pgd && adv_spec.kind != AttackKind::fgsm)
      fail("adv.kind", "adversarial training supports fgsm or pgd");
    try {
      adv_spec.validate();
    } catch (const std::invalid_argument& e) {
      fail("adv", e.what());
    }
  }
  if (select_best) {
    try {
      best_spec.validate();
    } catch (const std::invalid_argument& e) {
      fail("best_spec", e.what());
    }
  }
}

std::string TrainTrace::steps_csv() const {
  std::ostringstream os;
  os << kLossCsvHeader << '\n';
  for (const auto& s : steps) os << to_csv_row(s.epoch, s.step, s.loss) << '\n';
  return os.str();
}

std::string TrainTrace::epochs_csv() const {
  std::ostringstream os;
  os.precision(10);
  const std::size_t L = epochs.empty() ? 0 : epochs.front().train_accuracy.size();
  os << "epoch,lr,robust,L_o";
  for (std::size_t h = 0; h < L; ++h) os << ",train_h" << h;
  for (std::size_t h = 0; h < L; ++h) os << ",test_h" << h;
  os << '\n';
  for (const auto& e : epochs) {
    os << e.epoch << ',' << e.lr << ',' << e.robust_accuracy << ',' << e.orthogonality;
    for (double a : e.train_accuracy) os << ',' << a;
    for (double a : e.test_accuracy) os << ',' << a;
    os << '\n';
  }
  return os.str();
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& test_set,
                  const EpochCallback& on_epoch) {
  config.validate();
  train_set.validate();
  if (train_set.sample_shape() != config.arch.input_shape)
    throw std::invalid_argument("arch.input_shape " + to_string(config.arch.input_shape) +
                                " does not match data " + to_string(train_set.sample_shape()));
  if (train_set.num_classes != config.arch.classes)
    throw std::invalid_argument("arch.classes does not match the dataset");

  DioModel model = make_model(config.arch, mix_seed(config.seed, 1));
  std::vector<Tensor> params = model.parameters();
  Sgd opt(config.lr.initial, config.momentum, config.weight_decay);
  Rng head_rng(mix_seed(config.seed, 2));

  Dataset best_eval = test_set;
  if (config.select_best && test_set.size() > config.best_eval_samples) {
    std::vector<std::size_t> idx(config.best_eval_samples);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    best_eval = test_set.subset(idx);
  }

  TrainResult result;
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    opt.set_lr(lr_at(config.lr, epoch));
    const auto order = batches(train_set, config.batch_size,
                               mix_seed(config.seed, 100 + static_cast<std::uint64_t>(epoch)));
    for (const auto& batch : order) {
      Tensor inputs = batch.inputs;
      if (config.adv_train) {
        const std::size_t head = head_rng.uniform_index(model.num_heads());
        AttackSpec spec = config.adv_spec;
        spec.seed = mix_seed(mix_seed(config.seed, 5), step);
        auto logits = head_logits(model, head);
        inputs = spec.kind == AttackKind::fgsm ? fgsm(logits, inputs, batch.labels, spec.eps).x_adv
                                               : pgd(logits, inputs, batch.labels, spec).x_adv;
      }
      Graph g;
      Objective obj = total_objective(g, model, g.constant(inputs), batch.labels, config.weights);
      if (!std::isfinite(obj.values.total))
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step) + ": total loss is non-finite");
      g.backward(obj.total);
      opt.step(params);
      result.trace.steps.push_back({static_cast<std::size_t>(epoch), step, obj.values});
      ++step;
    }

    EpochRecord rec;
    rec.epoch = static_cast<std::size_t>(epoch);
    rec.lr = opt.lr();
    rec.train_accuracy = per_head_accuracy(model, train_set);
    rec.test_accuracy = per_head_accuracy(model, test_set);
    rec.orthogonality = orthogonality_value(model.heads());
    if (config.select_best) {
      Rng eval_rng(mix_seed(config.seed, 3));
      AttackSpec spec = config.best_spec;
      spec.seed = mix_seed(config.seed, 4);
      rec.robust_accuracy = robust_accuracy(model, best_eval, spec, eval_rng);
      if (rec.robust_accuracy > result.best_metric) {
        result.best_metric = rec.robust_accuracy;
        result.best_epoch = rec.epoch;
        result.best = model.clone();
      }
    }
    result.trace.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.last = model;
  if (!config.select_best) {
    result.best = model.clone();
    result.best_epoch = static_cast<std::size_t>(config.epochs - 1);
  }
  return result;
}

TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch) {
  const DataPair data = load_data(config.data);
  return train(config, data.train, data.test, on_epoch);
}

}  // namespace dio
