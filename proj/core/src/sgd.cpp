#include "dio/sgd.hpp"

#include <string>

namespace dio {

void Sgd::step(std::vector<Tensor>& params) {
  for (std::size_t k = 0; k < params.size(); ++k)
    if (!params[k].has_grad())
      throw GradError("sgd_step: parameter " + std::to_string(k) + " has no gradient");

  if (velocity_.size() != params.size()) {
    velocity_.resize(params.size());
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = velocity_[k];
    if (v.size() != params[k].size()) v.assign(params[k].size(), 0.0);
    auto theta = params[k].data();
    auto g = params[k].grad();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = momentum_ * v[i] + (g[i] + weight_decay_ * theta[i]);
      theta[i] -= lr_ * v[i];
    }
    params[k].clear_grad();
  }
}

}  // namespace dio
