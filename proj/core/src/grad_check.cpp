#include "dio/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dio {

namespace {

double eval_scalar(const ScalarFn& fn, const Tensor& at) {
  Graph g;
  return fn(g, g.constant(at.clone())).value().item();
}

void require_finite(double v, std::size_t index, const char* what) {
  if (!std::isfinite(v))
    throw GradError(std::string("grad_check: non-finite ") + what + " at coordinate " +
                    std::to_string(index));
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& fn, const Tensor& point, double fd_step) {
  if (!(fd_step > 0.0)) throw std::invalid_argument("grad_check: fd_step must be > 0");

  GradCheckResult r;
  Tensor x = point.clone();
  x.set_requires_grad(true);
  {
    Graph g;
    Var out = fn(g, g.leaf(x));
    require_finite(out.value().item(), 0, "function value");
    g.backward(out);
  }
  r.autodiff_grad = Tensor(x.shape(), std::vector<double>(x.grad().begin(), x.grad().end()));
  r.numeric_grad = Tensor(x.shape());

  Tensor probe = point.clone();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + fd_step;
    const double fp = eval_scalar(fn, probe);
    probe[i] = orig - fd_step;
    const double fm = eval_scalar(fn, probe);
    probe[i] = orig;
    require_finite(fp, i, "forward value");
    require_finite(fm, i, "forward value");
    const double fd = (fp - fm) / (2.0 * fd_step);
    const double ad = r.autodiff_grad[i];
    require_finite(ad, i, "autodiff gradient");
    r.numeric_grad[i] = fd;
    const double err = std::fabs(ad - fd) / std::max(1.0, std::fabs(fd));
    if (err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = i;
    }
  }
  return r;
}

double grad_check_params(const std::function<Var(Graph&)>& loss, std::vector<Tensor> params,
                         double fd_step) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.clear_grad();
  }
  {
    Graph g;
    Var out = loss(g);
    g.backward(out);
  }
  double worst = 0.0;
  std::size_t flat = 0;
  for (auto& p : params) {
    std::vector<double> ad(p.size(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), ad.begin());
    for (std::size_t i = 0; i < p.size(); ++i, ++flat) {
      const double orig = p[i];
      p[i] = orig + fd_step;
      double fp, fm;
      {
        Graph g;
        fp = loss(g).value().item();
      }
      p[i] = orig - fd_step;
      {
        Graph g;
        fm = loss(g).value().item();
      }
      p[i] = orig;
      require_finite(fp, flat, "forward value");
      require_finite(fm, flat, "forward value");
      require_finite(ad[i], flat, "autodiff gradient");
      const double fd = (fp - fm) / (2.0 * fd_step);
      worst = std::max(worst, std::fabs(ad[i] - fd) / std::max(1.0, std::fabs(fd)));
    }
    p.clear_grad();
  }
  return worst;
}

}  // namespace dio
