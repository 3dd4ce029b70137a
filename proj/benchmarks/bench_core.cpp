#include <benchmark/benchmark.h>

#include <random>

#include "wfm/alignment.hpp"
#include "wfm/kdtree.hpp"
#include "wfm/losses.hpp"
#include "wfm/skeleton.hpp"
#include "wfm/synth.hpp"
#include "wfm/triangulation.hpp"

using namespace wfm;

namespace {

std::vector<Vec3> random_points(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

void BM_ProcrustesSimilarity(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CorrespondenceSet c;
  const SimilarityTransform truth(1.3, yaw_rotation(0.8), Vec3(0.4, -0.2, 0.9));
  for (int i = 0; i < n; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    c.source.push_back(p);
    c.target.push_back(apply_similarity(truth, p));
  }
  for (auto _ : state) benchmark::DoNotOptimize(procrustes_similarity(c, true));
}
BENCHMARK(BM_ProcrustesSimilarity)->Arg(50)->Arg(500)->Arg(5000);

void BM_ChamferKdTree(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  PointCloud a, b;
  a.points = random_points(n, 2);
  b.points = random_points(n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer(a, b));
}
BENCHMARK(BM_ChamferKdTree)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_ChamferBruteForce(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const std::vector<Vec3> a = random_points(n, 2);
  const std::vector<Vec3> b = random_points(n, 3);
  for (auto _ : state) {
    double total = 0.0;
    for (const Vec3& p : a) {
      double best = 1e300;
      for (const Vec3& q : b) best = std::min(best, (p - q).squaredNorm());
      total += best;
    }
    benchmark::DoNotOptimize(total);
  }
}
BENCHMARK(BM_ChamferBruteForce)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_TriangulateJoint(benchmark::State& state) {
  std::vector<ViewRay> rays;
  const Vec3 p(0.1, -0.2, 1.1);
  for (double a : {0.3, 1.8}) {
    ViewRay ray;
    ray.pose = synth::look_at(Vec3(2.8 * std::cos(a), 2.8 * std::sin(a), 1.6),
                              Vec3(0, 0, 1));
    ray.intrinsics = Intrinsics(600, 600, 320, 240, 640, 480);
    ray.pixel = project(p, ray.pose, ray.intrinsics) + Vec2(1.0, -0.6);
    rays.push_back(ray);
  }
  for (auto _ : state) benchmark::DoNotOptimize(triangulate_joint(rays));
}
BENCHMARK(BM_TriangulateJoint);

void BM_ForwardKinematicsJacobian(benchmark::State& state) {
  const SkeletonModel model = SkeletonModel::default_human();
  SkeletonParams params = SkeletonParams::rest(model, 1);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.3);
  for (int i = 0; i < params.frames[0].body_pose.size(); ++i)
    params.frames[0].body_pose[i] = g(rng);
  Eigen::MatrixXd jac;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        forward_kinematics_with_jacobian(model, params.shape, params.frames[0], jac));
  }
}
BENCHMARK(BM_ForwardKinematicsJacobian);

void BM_TsdfIntegrate(benchmark::State& state) {
  synth::Scene scene;
  synth::Primitive box;
  box.kind = synth::Primitive::Kind::kBox;
  box.half_extents = Vec3(0.5, 0.5, 0.5);
  scene.primitives.push_back(box);
  const Intrinsics k(110, 110, 64, 64, 128, 128);
  const DepthFrame frame = synth::render_depth(
      scene, synth::look_at(Vec3(2.2, 0.4, 1.3), Vec3::Zero()), k, SceneClass::kIndoor);
  for (auto _ : state) {
    TsdfVolume vol(Vec3(-0.72, -0.72, -0.72), 0.02, Eigen::Vector3i(72, 72, 72), 0.08);
    vol.integrate(frame);
    benchmark::DoNotOptimize(vol.sdf_at(1, 1, 1));
  }
}
BENCHMARK(BM_TsdfIntegrate)->Unit(benchmark::kMillisecond);

void BM_CalibrationLossEval(benchmark::State& state) {
  synth::BundleSpec spec;
  spec.motion.frame_count = 16;
  spec.track_points_per_frame = 12;
  spec.landmark_count = 30;
  spec.global_cloud_points = 500;
  const synth::Bundle bundle = synth::generate(5, spec);
  const TrackLossTerm track(bundle.tracks, bundle.views[0].trajectory_view,
                            bundle.views[1].trajectory_view);
  const ChamferTerm cham(bundle.views[0].cloud_view, bundle.global_cloud);
  const BaLossTerm ba(bundle.views[0].landmark_obs, bundle.landmark_points,
                      bundle.views[0].trajectory_view);
  OffsetGradient ga, gb;
  for (auto _ : state) {
    double total =
        track.evaluate(bundle.true_offsets[0], bundle.true_offsets[1], &ga, &gb);
    total += cham.evaluate(bundle.true_offsets[0], &ga);
    total += ba.evaluate(bundle.true_offsets[0], &ga);
    benchmark::DoNotOptimize(total);
  }
}
BENCHMARK(BM_CalibrationLossEval)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
