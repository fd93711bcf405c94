#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dio/graph.hpp"
#include "dio/model.hpp"
#include "dio/rng.hpp"

namespace dio {

enum class AttackKind { fgsm, pgd, cw_l2, square_l2, transfer, adapt_a1, adapt_a2 };

std::string to_string(AttackKind kind);
/// Throws std::invalid_argument for an unknown name.
AttackKind parse_attack_kind(const std::string& name);

struct CwParams {
  double c = 1.0;      // initial trade-off constant
  double kappa = 0.0;  // confidence
  double lr = 0.01;
  int binary_search_steps = 9;
  int max_inner_iters = 100;
};

struct AttackSpec {
  AttackKind kind = AttackKind::pgd;
  /// L-inf budget for fgsm/pgd/adapt, L2 budget for square_l2 and cw_l2
  /// (infinity leaves C&W unbounded).
  double eps = 8.0 / 255.0;
  double step = 2.0 / 255.0;
  int iters = 10;
  CwParams cw;
  std::uint64_t seed = 0;
  bool random_start = true;
  /// Draws the PGD start from U(0, eps) instead of U(-eps, eps).
  bool literal_uniform_start = false;
  /// Head attacked by adapt_a2.
  std::size_t head = 0;
  /// Generator used on the source model by transfer (fgsm or pgd).
  AttackKind transfer_inner = AttackKind::fgsm;
  /// Square schedule: initial fraction of pixels per window.
  double square_p_init = 0.1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  static AttackSpec fgsm(double eps);
  static AttackSpec pgd(double eps, double step, int iters, std::uint64_t seed = 0);
  /// Constants used in the reference CIFAR-10 experiments.
  static AttackSpec cifar_pgd(int iters);
  static AttackSpec cifar_cw();
  static AttackSpec cifar_square(int queries);
};

/// Default parameters for each kind: fgsm/pgd/adapt at 8/255 (PGD-10, step
/// 2/255), C&W with 100 inner iterations and no L2 bound, square with 1000
/// queries at L2 0.5, transfer via FGSM.
AttackSpec default_attack(AttackKind kind);

/// Output of one attack on one batch.
struct AdversarialBatch {
  Tensor x_adv;
  Tensor x_clean;
  std::vector<int> labels;
  /// Per-sample perturbation norm in the attack's metric (L-inf or L2).
  std::vector<double> norms;
  /// Per-sample: attacked forward misclassifies x_adv.
  std::vector<bool> success;
  /// Per-sample model queries (square_l2 only).
  std::vector<std::size_t> queries;
  std::size_t gradient_evaluations = 0;
};

/// Logits of an attacked model on a graph (may draw a random head).
using LogitsFn = std::function<Var(Graph&, Var)>;
/// Scalar attack objective to ascend.
using AttackLossFn = std::function<Var(Graph&, Var, std::span<const int>)>;
/// Logits only; no graph is exposed, so no gradients can be taken.
using QueryFn = std::function<Tensor(const Tensor&)>;

/// Forward through a freshly drawn head on every call.
LogitsFn random_head_logits(const DioModel& model, Rng& rng);
LogitsFn head_logits(const DioModel& model, std::size_t head);
QueryFn random_head_query(const DioModel& model, Rng& rng);
/// Batch-mean cross-entropy of `logits`.
AttackLossFn cross_entropy_objective(LogitsFn logits);
/// (1/L) * sum_i CE(h_i(g(x)), y).
AttackLossFn head_average_objective(const DioModel& model);

/// Gradient of `loss` with respect to x. Throws GradError on non-finite.
Tensor input_gradient(const AttackLossFn& loss, const Tensor& x, std::span<const int> y);

/// x + eps * sign(grad CE), clamped to [0,1].
AdversarialBatch fgsm(const LogitsFn& model, const Tensor& x, std::span<const int> y, double eps);

/// Signed-gradient ascent with projection onto the L-inf ball and [0,1].
AdversarialBatch pgd(const LogitsFn& model, const Tensor& x, std::span<const int> y,
                     const AttackSpec& spec);
AdversarialBatch pgd_on_objective(const AttackLossFn& loss, const LogitsFn& judge, const Tensor& x,
                                  std::span<const int> y, const AttackSpec& spec);

/// Carlini-Wagner L2 in tanh space with per-sample binary search over c.
AdversarialBatch cw_l2(const LogitsFn& model, const Tensor& x, std::span<const int> y,
                       const AttackSpec& spec);

/// Query-only random search with square windows inside an L2 ball.
AdversarialBatch square_l2(const QueryFn& model, const Tensor& x, std::span<const int> y,
                           const AttackSpec& spec);

/// PGD on the head-averaged loss.
AdversarialBatch adapt_a1(const DioModel& model, const Tensor& x, std::span<const int> y,
                          const AttackSpec& spec);
/// PGD on the single network h_head(g(.)).
AdversarialBatch adapt_a2(const DioModel& model, std::size_t head, const Tensor& x,
                          std::span<const int> y, const AttackSpec& spec);

/// Crafts examples on `source` (random head per forward) with
/// spec.transfer_inner and returns the percentage the target classifies
/// correctly (random head per call). Throws std::invalid_argument on a
/// shape/class mismatch.
double transfer(const DioModel& source, const DioModel& target, const Tensor& x,
                std::span<const int> y, const AttackSpec& spec, Rng& target_rng);

/// Margin Z_y - max_{k != y} Z_k per row.
std::vector<double> logit_margins(const Tensor& logits, std::span<const int> y);

/// Per-sample L-inf and L2 distances.
std::vector<double> linf_distances(const Tensor& a, const Tensor& b);
std::vector<double> l2_distances(const Tensor& a, const Tensor& b);

}  // namespace dio
