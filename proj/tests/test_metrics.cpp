#include <doctest.h>

#include "support/oracles.hpp"
#include "support/test_rand.hpp"
#include "wfm/alignment.hpp"
#include "wfm/metrics.hpp"

using namespace wfm;
using namespace wfm::testing;

namespace {

JointSequence random_walk_sequence(Rng& rng, int frames, int joints) {
  JointSequence seq;
  seq.fps = 30.0;
  Vec3 root(0, 0, 1);
  for (int t = 0; t < frames; ++t) {
    root += Vec3(0.02, 0.002 * std::sin(t * 0.1), 0);
    std::vector<Vec3> js;
    Rng shape_rng(17);  // fixed body shape around the moving root
    for (int j = 0; j < joints; ++j) js.push_back(root + rvec3(shape_rng, -0.4, 0.4));
    js[0] = root;
    seq.frames.push_back(js);
  }
  (void)rng;
  return seq;
}

JointSequence remap(const JointSequence& seq, const SimilarityTransform& t) {
  JointSequence out = seq;
  for (auto& frame : out.frames)
    for (Vec3& p : frame) p = apply_similarity(t, p);
  return out;
}

}  // namespace

TEST_CASE("mpjpe metrics vanish on identical sequences") {
  Rng rng(51);
  const JointSequence seq = random_walk_sequence(rng, 50, 8);
  CHECK(w_mpjpe_mm(seq, seq, 20) < 1e-9);
  CHECK(wa_mpjpe_mm(seq, seq, 20) < 1e-9);
}

TEST_CASE("a constant offset is absorbed by the two-frame alignment") {
  Rng rng(52);
  const JointSequence gt = random_walk_sequence(rng, 40, 8);
  JointSequence pred = gt;
  for (auto& frame : pred.frames)
    for (Vec3& p : frame) p += Vec3(0.01, 0.004, -0.002);
  CHECK(w_mpjpe_mm(pred, gt, 20) < 1e-9);
  CHECK(wa_mpjpe_mm(pred, gt, 20) < 1e-9);
}

TEST_CASE("wa-mpjpe never exceeds w-mpjpe") {
  Rng rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    const JointSequence gt = random_walk_sequence(rng, 60, 6);
    JointSequence pred = gt;
    for (auto& frame : pred.frames)
      for (Vec3& p : frame) p += rnorm3(rng, runif(rng, 0.001, 0.05));
    const int chunk = 10 + static_cast<int>(runif(rng, 0, 40));
    CHECK(wa_mpjpe_mm(pred, gt, chunk) <= w_mpjpe_mm(pred, gt, chunk) + 1e-9);
  }
}

TEST_CASE("wa-mpjpe matches an independent alignment oracle") {
  Rng rng(54);
  for (int trial = 0; trial < 10; ++trial) {
    const int frames = 24, joints = 5;
    const JointSequence gt = random_walk_sequence(rng, frames, joints);
    JointSequence pred = gt;
    for (auto& frame : pred.frames)
      for (Vec3& p : frame) p += rnorm3(rng, 0.01);
    // Whole-sequence chunk: align with the quaternion oracle and average.
    std::vector<Vec3> src, dst;
    for (int t = 0; t < frames; ++t)
      for (int j = 0; j < joints; ++j) {
        src.push_back(pred.frames[t][j]);
        dst.push_back(gt.frames[t][j]);
      }
    const SimilarityTransform t = horn_similarity(src, dst, false);
    double err = 0.0;
    for (size_t i = 0; i < src.size(); ++i)
      err += (dst[i] - apply_similarity(t, src[i])).norm();
    const double oracle_mm = 1000.0 * err / static_cast<double>(src.size());
    CHECK(wa_mpjpe_mm(pred, gt, frames) == doctest::Approx(oracle_mm).epsilon(1e-9));
  }
}

TEST_CASE("drift makes w-mpjpe grow with chunk length") {
  Rng rng(55);
  const JointSequence gt = random_walk_sequence(rng, 1200, 6);
  JointSequence pred = gt;
  Vec3 drift = Vec3::Zero();
  for (size_t t = 0; t < pred.frames.size(); ++t) {
    drift += Vec3(2e-4, 1e-4 * std::sin(t * 0.01), 0);
    for (Vec3& p : pred.frames[t]) p += drift;
  }
  const double w100 = w_mpjpe_mm(pred, gt, 100);
  const double w500 = w_mpjpe_mm(pred, gt, 500);
  const double w1000 = w_mpjpe_mm(pred, gt, 1000);
  CHECK(w100 < w500);
  CHECK(w500 < w1000);
}

TEST_CASE("rte follows its definition and stays rigid-invariant") {
  // Straight walk with a 0.1 m lateral error pattern that the rigid alignment
  // cannot absorb: the [+,-,-,+] blocks have zero mean and zero first moment,
  // so they are orthogonal to every translation/rotation degree of freedom.
  const int n = 100;
  const double signs[4] = {1.0, -1.0, -1.0, 1.0};
  std::vector<Vec3> gt_root, pred_root;
  for (int t = 0; t < n; ++t) {
    gt_root.push_back(Vec3(0.1 * t, 0, 1));
    pred_root.push_back(Vec3(0.1 * t, 0.1 * signs[t % 4], 1));
  }
  const double path = 0.1 * (n - 1);
  const double rte = rte_percent(pred_root, gt_root);
  CHECK(rte == doctest::Approx(100.0 * 0.1 / path).epsilon(1e-9));

  CHECK(rte_percent(gt_root, gt_root) == 0.0);

  SUBCASE("invariant under a joint rigid remap") {
    Rng rng(56);
    const SimilarityTransform t = random_similarity(rng, false);
    std::vector<Vec3> gt2 = gt_root, pred2 = pred_root;
    for (Vec3& p : gt2) p = apply_similarity(t, p);
    for (Vec3& p : pred2) p = apply_similarity(t, p);
    CHECK(rte_percent(pred2, gt2) == doctest::Approx(rte).epsilon(1e-9));
  }

  SUBCASE("scale errors are not absorbed") {
    std::vector<Vec3> scaled = gt_root;
    for (Vec3& p : scaled) p *= 1.1;
    CHECK(rte_percent(scaled, gt_root) > 0.1);
  }

  SUBCASE("zero displacement throws") {
    std::vector<Vec3> still(10, Vec3(1, 2, 3));
    CHECK_THROWS_AS(rte_percent(still, still), ZeroDisplacement);
  }
}

TEST_CASE("jitter is contact-gated horizontal foot speed") {
  JointSequence seq;
  seq.fps = 30;
  const int frames = 20;
  for (int t = 0; t < frames; ++t) {
    std::vector<Vec3> joints(4, Vec3(0, 0, 1));
    joints[2] = Vec3(0.01 * t, 0, 0.02);  // grounded foot sliding 1 cm/frame
    joints[3] = Vec3(0, 0, 0.5);          // raised foot
    seq.frames.push_back(joints);
  }
  CHECK(jitter(seq, {2, 3}, 0.05) == doctest::Approx(0.01).epsilon(1e-9));

  SUBCASE("stationary feet give zero") {
    for (auto& f : seq.frames) f[2] = Vec3(0.2, 0.1, 0.01);
    CHECK(jitter(seq, {2, 3}, 0.05) == 0.0);
  }

  SUBCASE("no contacts are flagged") {
    for (auto& f : seq.frames) f[2] = Vec3(0, 0, 0.5);
    bool no_contact = false;
    CHECK(jitter(seq, {2, 3}, 0.05, &no_contact) == 0.0);
    CHECK(no_contact);
  }

  SUBCASE("high-frequency noise strictly increases jitter") {
    Rng rng(57);
    const double base = jitter(seq, {2, 3}, 0.05);
    JointSequence noisy = seq;
    for (auto& f : noisy.frames) {
      f[2].x() += rnorm(rng, 0.004);
      f[2].y() += rnorm(rng, 0.004);
    }
    CHECK(jitter(noisy, {2, 3}, 0.05) > base);
  }
}

TEST_CASE("reprojection error arithmetic") {
  Trajectory traj;
  traj.view_id = "v";
  traj.intrinsics = Intrinsics(600, 600, 320, 240, 640, 480);
  traj.frames.push_back({0.0, Pose::identity()});

  JointSequence pred;
  pred.fps = 30;
  pred.frames.push_back({Vec3(0, 0, 2.0)});

  Keypoint2DFrame kf;
  kf.frame = 0;
  kf.pixels.push_back(project(Vec3(0, 0, 2.0), traj.frames[0].pose, traj.intrinsics) +
                      Vec2(3, 4));
  kf.confidences.push_back(1.0);

  const double err = reproj_error_px(pred, {{kf}}, {traj});
  CHECK(err == doctest::Approx(5.0).epsilon(1e-12));

  kf.confidences[0] = 0.0;
  CHECK_THROWS_AS(reproj_error_px(pred, {{kf}}, {traj}), EmptyObservations);
}

TEST_CASE("depth mse proxy matches naive summation") {
  Rng rng(58);
  Trajectory traj;
  traj.view_id = "v";
  traj.intrinsics = Intrinsics(600, 600, 320, 240, 640, 480);
  for (int t = 0; t < 5; ++t) traj.frames.push_back({t * 0.1, random_pose(rng, 0.5)});

  JointSequence pred;
  pred.fps = 30;
  for (int t = 0; t < 5; ++t) {
    std::vector<Vec3> js;
    for (int j = 0; j < 3; ++j) js.push_back(rvec3(rng, -1, 1) + Vec3(0, 0, 4));
    pred.frames.push_back(js);
  }
  std::vector<DepthSample> samples;
  double expected = 0.0;
  int n = 0;
  for (int t = 0; t < 5; ++t)
    for (int j = 0; j < 3; ++j) {
      DepthSample s;
      s.view = 0;
      s.frame = t;
      s.joint = j;
      s.depth = runif(rng, 1.0, 5.0);
      samples.push_back(s);
      const double z = traj.frames[t].pose.to_camera(pred.frames[t][j]).z();
      expected += (z - s.depth) * (z - s.depth);
      ++n;
    }
  CHECK(depth_mse_proxy(pred, {traj}, samples) ==
        doctest::Approx(expected / n).epsilon(1e-12));
  CHECK_THROWS_AS(depth_mse_proxy(pred, {traj}, {}), EmptyObservations);
}

TEST_CASE("length mismatches are rejected") {
  Rng rng(59);
  const JointSequence a = random_walk_sequence(rng, 10, 4);
  const JointSequence b = random_walk_sequence(rng, 11, 4);
  CHECK_THROWS_AS(w_mpjpe_mm(a, b, 5), LengthMismatch);
}
