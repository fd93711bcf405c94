#pragma once

#include <span>
#include <string>
#include <vector>

#include "dio/graph.hpp"
#include "dio/model.hpp"

namespace dio {

/// Coefficients of the combined objective L_c + alpha*L_o + beta*L_d.
struct LossWeights {
  double alpha = 0.1;  // orthogonality penalty
  double beta = 0.1;   // margin penalty
  double tau = 1.0;    // margin target, > 0

  /// Throws std::invalid_argument on negative, non-finite or tau <= 0.
  void validate() const;
};

struct LossBreakdown {
  double classification = 0.0;  // L_c
  double orthogonality = 0.0;   // L_o
  double margin = 0.0;          // L_d
  double total = 0.0;
};

/// Sum over heads of batch-mean cross-entropy.
Var classification_loss(std::span<const Var> logits_per_head, std::span<const int> labels);

/// Sum over ordered pairs i != j of <vec W_i, vec W_j>^2. Each unordered
/// pair contributes twice. Zero for a single head.
Var orthogonality_loss(Graph& g, const std::vector<Head>& heads);

/// Plain-value L_o, no graph.
double orthogonality_value(const std::vector<Head>& heads);

/// Smallest normalized logit gap min_{j != y} |h_j(z) - h_y(z)| / ||W_j||
/// for one feature vector z (length m). Throws std::invalid_argument if
/// K < 2 or any competitor column has zero norm.
double margin(std::span<const double> z, const Head& head, int y);

/// Hinge term of one head: mean over correctly-classified rows of
/// max(0, tau - D). Rows are filtered by the current forward pass; a head
/// with no correct rows contributes a constant 0. Gradients treat the
/// filter and the argmin as fixed selections (ties -> lowest class), and
/// flow through ||W_j|| (floored by 1e-12).
Var head_margin_loss(Var logits, Var weight, std::span<const int> labels, double tau);

/// Per-head hinge for head `head_index` computed from the model on x.
Var margin_loss(Graph& g, const DioModel& model, std::size_t head_index, Var x,
                std::span<const int> labels, double tau);

struct Objective {
  Var total;
  LossBreakdown values;
};

/// Full objective on one batch. Backbone runs once and feeds all heads.
Objective total_objective(Graph& g, const DioModel& model, Var x, std::span<const int> labels,
                          const LossWeights& weights);

/// One CSV row: epoch,step,L_c,L_o,L_d,total.
std::string to_csv_row(std::size_t epoch, std::size_t step, const LossBreakdown& b);
inline constexpr const char* kLossCsvHeader = "epoch,step,L_c,L_o,L_d,total";

}  // namespace dio
