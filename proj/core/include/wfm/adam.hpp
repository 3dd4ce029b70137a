#pragma once

#include <Eigen/Core>

#include <functional>
#include <utility>
#include <vector>

#include "wfm/errors.hpp"

namespace wfm {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;
  int max_iterations = 2000;
  double tolerance = 1e-8;  // relative best-loss decrease over `window` iterations
  int window = 20;
  double lr_decay = 1e-3;  // final lr = learning_rate * lr_decay; 1.0 = constant

  void validate() const;
};

struct AdamResult {
  Eigen::VectorXd best_params;
  double best_loss = 0.0;
  std::vector<double> history;  // raw loss at each visited iterate
  int iterations = 0;
  bool aborted_non_finite = false;
};

/// Objective: fills `gradient` (same size as params) and returns the loss.
using LossGradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Adam with per-block gradient-norm clipping and best-so-far selection.
///
/// clip_blocks lists (begin, length) parameter blocks clipped independently;
/// empty means one block spanning the whole vector. frozen coordinates have
/// their gradients zeroed and never move. A non-finite loss aborts with the
/// last finite best iterate (NonFiniteLoss if the very first evaluation is
/// already non-finite).
AdamResult adam_minimize(const LossGradFn& f, const Eigen::VectorXd& x0,
                         const AdamOptions& opt,
                         const std::vector<std::pair<int, int>>& clip_blocks = {},
                         const std::vector<bool>& frozen = {});

}  // namespace wfm
