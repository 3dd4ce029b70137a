#include "wfm/adam.hpp"

#include <cmath>

namespace wfm {

void AdamOptions::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(clip_norm > 0.0)) throw InvalidArgument("clip norm must be positive");
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw InvalidArgument("betas must lie in [0,1)");
  if (window < 1) throw InvalidArgument("window must be >= 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0))
    throw InvalidArgument("lr_decay must lie in (0,1]");
}

AdamResult adam_minimize(const LossGradFn& f, const Eigen::VectorXd& x0,
                         const AdamOptions& opt,
                         const std::vector<std::pair<int, int>>& clip_blocks,
                         const std::vector<bool>& frozen) {
  opt.validate();
  const int n = static_cast<int>(x0.size());
  if (!frozen.empty() && static_cast<int>(frozen.size()) != n)
    throw SizeMismatch("frozen mask size mismatch");

  std::vector<std::pair<int, int>> blocks = clip_blocks;
  if (blocks.empty()) blocks.push_back({0, n});

  Eigen::VectorXd x = x0;
  Eigen::VectorXd grad(n);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);

  AdamResult result;
  result.best_params = x0;
  result.history.reserve(opt.max_iterations);
  std::vector<double> running_best;  // running_best[i] = min(history[0..i])
  running_best.reserve(opt.max_iterations);

  const double decay_exponent =
      opt.max_iterations > 1 ? 1.0 / static_cast<double>(opt.max_iterations - 1) : 0.0;

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    grad.setZero();
    const double loss = f(x, grad);

    if (!std::isfinite(loss)) {
      if (iter == 0) throw NonFiniteLoss("loss non-finite at the initial iterate");
      result.aborted_non_finite = true;
      break;
    }
    result.history.push_back(loss);
    if (result.history.size() == 1 || loss < result.best_loss) {
      result.best_loss = loss;
      result.best_params = x;
    }
    running_best.push_back(result.best_loss);
    result.iterations = iter + 1;

    // Converged when the best loss stopped improving over the trailing window.
    // A non-positive tolerance disables early stopping.
    if (opt.tolerance > 0.0 && iter >= opt.window) {
      const double window_start = running_best[iter - opt.window];
      const double decrease = window_start - result.best_loss;
      if (decrease <= opt.tolerance * std::max(std::abs(window_start), 1e-12)) break;
    }

    if (!frozen.empty())
      for (int i = 0; i < n; ++i)
        if (frozen[i]) grad[i] = 0.0;

    for (const auto& [begin, len] : blocks) {
      const double norm = grad.segment(begin, len).norm();
      if (norm > opt.clip_norm) grad.segment(begin, len) *= opt.clip_norm / norm;
    }

    const double lr =
        opt.learning_rate * std::pow(opt.lr_decay, iter * decay_exponent);
    const double bc1 = 1.0 - std::pow(opt.beta1, iter + 1);
    const double bc2 = 1.0 - std::pow(opt.beta2, iter + 1);
    m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
    v = opt.beta2 * v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
    for (int i = 0; i < n; ++i) {
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      x[i] -= lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  }
  return result;
}

}  // namespace wfm
