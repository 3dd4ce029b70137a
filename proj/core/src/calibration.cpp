#include "wfm/calibration.hpp"

#include <cmath>

namespace wfm {

void OffsetParams::wrap() {
  for (ViewOffset& v : views) v.yaw = wrap_angle(v.yaw);
}

SimilarityTransform initialize_offset(
    const Trajectory& view_trajectory,
    const std::vector<std::pair<int, Pose>>& registered_poses, bool with_scale) {
  if (registered_poses.size() < 2)
    throw TooFewRegistrations("need >= 2 registered frames per view");
  CorrespondenceSet c;
  for (const auto& [frame, pose] : registered_poses) {
    if (frame < 0 || frame >= static_cast<int>(view_trajectory.size()))
      throw InvalidArgument("registered frame index outside the trajectory");
    c.source.push_back(view_trajectory.frames[frame].pose.center());
    c.target.push_back(pose.center());
  }
  return procrustes_yaw(c, with_scale);
}

namespace {

constexpr double kFdStep = 1e-6;
constexpr double kGradCheckTol = 1e-4;

// All loss terms of one view plus the cross-view track term, evaluated over a
// flat parameter vector with one [yaw, tx, ty, tz] block per view.
struct Problem {
  std::optional<TrackLossTerm> track;
  double track_weight = 0.0;
  std::vector<std::optional<ChamferTerm>> chamfer;
  std::vector<std::optional<BaLossTerm>> ba;
  LossWeights weights;
  int view_count = 0;

  static ViewOffset unpack(const Eigen::VectorXd& x, int view) {
    ViewOffset o;
    o.yaw = x[4 * view];
    o.translation = x.segment<3>(4 * view + 1);
    return o;
  }

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    double total = 0.0;
    std::vector<OffsetGradient> g(view_count, OffsetGradient::Zero());

    if (track && track_weight > 0.0) {
      OffsetGradient ga, gb;
      const double value =
          track->evaluate(unpack(x, 0), unpack(x, 1), &ga, &gb);
      total += track_weight * value;
      g[0] += track_weight * ga;
      g[1] += track_weight * gb;
    }
    for (int v = 0; v < view_count; ++v) {
      const ViewOffset o = unpack(x, v);
      if (chamfer[v] && weights.chamfer > 0.0) {
        OffsetGradient gc;
        total += weights.chamfer * chamfer[v]->evaluate(o, &gc);
        g[v] += weights.chamfer * gc;
      }
      if (ba[v] && weights.ba > 0.0) {
        OffsetGradient gb;
        total += weights.ba * ba[v]->evaluate(o, &gb);
        g[v] += weights.ba * gb;
      }
    }
    for (int v = 0; v < view_count; ++v) grad.segment<4>(4 * v) = g[v];
    return total;
  }
};

Problem build_problem(const CalibrationInput& input, const LossWeights& weights,
                      bool with_track) {
  Problem p;
  p.weights = weights;
  p.view_count = static_cast<int>(input.views.size());
  if (p.view_count < 1) throw InvalidArgument("calibration needs at least one view");
  for (const ViewCalibrationInput& view : input.views) view.trajectory.validate();

  if (with_track && p.view_count == 2 && !input.tracks.empty() && weights.track > 0.0) {
    p.track.emplace(input.tracks, input.views[0].trajectory, input.views[1].trajectory);
    p.track_weight = weights.track;
  }
  bool any_term = p.track.has_value();
  for (int v = 0; v < p.view_count; ++v) {
    const ViewCalibrationInput& view = input.views[v];
    if (!view.cloud.points.empty() && !input.global_cloud.points.empty()) {
      p.chamfer.emplace_back(std::in_place, view.cloud, input.global_cloud);
      any_term = true;
    } else {
      p.chamfer.emplace_back(std::nullopt);
    }
    if (!view.landmarks.empty()) {
      p.ba.emplace_back(std::in_place, view.landmarks, input.landmark_points,
                        view.trajectory);
      any_term = true;
    } else {
      p.ba.emplace_back(std::nullopt);
    }
  }
  if (!any_term)
    throw InvalidArgument("calibration has no active loss terms (no tracks, clouds, or landmarks)");
  return p;
}

double finite_difference_check(const Problem& problem, const Eigen::VectorXd& x0) {
  const int n = static_cast<int>(x0.size());
  Eigen::VectorXd analytic(n);
  analytic.setZero();
  problem(x0, analytic);

  Eigen::VectorXd fd(n), scratch(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp[i] += kFdStep;
    xm[i] -= kFdStep;
    scratch.setZero();
    const double fp = problem(xp, scratch);
    scratch.setZero();
    const double fm = problem(xm, scratch);
    fd[i] = (fp - fm) / (2.0 * kFdStep);
  }
  return (analytic - fd).norm() / std::max(fd.norm(), 1e-12);
}

CalibrationResult solve(const Problem& problem, const OffsetParams& init,
                        const OptimizerConfig& config) {
  Eigen::VectorXd x0(4 * problem.view_count);
  for (int v = 0; v < problem.view_count; ++v) {
    x0[4 * v] = init.views[v].yaw;
    x0.segment<3>(4 * v + 1) = init.views[v].translation;
  }
  if (!x0.allFinite()) throw InvalidArgument("non-finite initial offsets");

  CalibrationResult result;
  if (config.check_gradient) {
    result.gradient_check_error = finite_difference_check(problem, x0);
    if (result.gradient_check_error > kGradCheckTol)
      throw GradientCheckFailed("analytic gradient disagrees with finite differences");
  }

  std::vector<std::pair<int, int>> blocks;
  for (int v = 0; v < problem.view_count; ++v) blocks.push_back({4 * v, 4});

  const AdamResult adam = adam_minimize(
      [&problem](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return problem(x, g); },
      x0, config.adam, blocks);

  result.params.views.resize(problem.view_count);
  for (int v = 0; v < problem.view_count; ++v) {
    result.params.views[v].yaw = adam.best_params[4 * v];
    result.params.views[v].translation = adam.best_params.segment<3>(4 * v + 1);
  }
  result.params.wrap();
  result.loss_history = adam.history;
  result.best_loss = adam.best_loss;
  result.iterations = adam.iterations;
  result.aborted_non_finite = adam.aborted_non_finite;
  return result;
}

}  // namespace

CalibrationResult calibrate(const CalibrationInput& input, const OffsetParams& init,
                            const OptimizerConfig& config) {
  config.weights.validate();
  config.adam.validate();
  if (init.views.size() != input.views.size())
    throw SizeMismatch("one initial offset per view required");

  const bool track_active = input.views.size() == 2 && !input.tracks.empty() &&
                            config.weights.track > 0.0;

  if (track_active) {
    const Problem problem = build_problem(input, config.weights, true);
    return solve(problem, init, config);
  }

  // Without the cross-view term the per-view problems are independent; solving
  // them separately makes the decoupling exact.
  CalibrationResult result;
  result.params.views.resize(input.views.size());
  double check_error = -1.0;
  for (size_t v = 0; v < input.views.size(); ++v) {
    CalibrationInput single;
    single.views.push_back(input.views[v]);
    single.landmark_points = input.landmark_points;
    single.global_cloud = input.global_cloud;
    const Problem problem = build_problem(single, config.weights, false);
    OffsetParams single_init;
    single_init.views.push_back(init.views[v]);
    CalibrationResult r = solve(problem, single_init, config);
    result.params.views[v] = r.params.views[0];
    result.view_histories.push_back(std::move(r.loss_history));
    result.iterations = std::max(result.iterations, r.iterations);
    result.best_loss += r.best_loss;
    result.aborted_non_finite = result.aborted_non_finite || r.aborted_non_finite;
    check_error = std::max(check_error, r.gradient_check_error);
  }
  result.gradient_check_error = check_error;

  // Combined history: per-view curves summed, shorter runs padded with their
  // final value.
  size_t longest = 0;
  for (const auto& h : result.view_histories) longest = std::max(longest, h.size());
  result.loss_history.assign(longest, 0.0);
  for (const auto& h : result.view_histories)
    for (size_t i = 0; i < longest; ++i)
      result.loss_history[i] += h[std::min(i, h.size() - 1)];
  return result;
}

}  // namespace wfm
