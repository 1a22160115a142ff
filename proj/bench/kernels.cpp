#include <map>

#include <benchmark/benchmark.h>

#include "mcvo/backend/optimizer.hpp"
#include "mcvo/backend/residual.hpp"
#include "mcvo/backend/state.hpp"
#include "mcvo/frontend/admission.hpp"
#include "mcvo/sim/simulator.hpp"

namespace {

using mcvo::Parallelism;

struct Scene {
  mcvo::RigConfig rig = mcvo::sim::default_rig();
  std::vector<mcvo::Pose> trajectory;
  mcvo::sim::LandmarkCloud cloud;
  mcvo::sim::SimOutput sim;
};

const Scene& scene() {
  static const Scene s = [] {
    Scene s;
    mcvo::sim::TrajectorySpec spec;
    spec.duration_frames = 200;
    spec.speed = 5.0;
    s.trajectory = mcvo::sim::generate_trajectory(spec);
    s.cloud = mcvo::sim::sample_landmarks(3000, s.trajectory, 2.0, 30.0, 7);
    s.sim = mcvo::sim::render_observations(s.rig, s.trajectory, s.cloud, {0.5, 0.02, 0.05, 1});
    return s;
  }();
  return s;
}

// Ground-truth window over frames [first, last] with true landmark depths.
mcvo::SlidingWindowState window(int first, int last) {
  const Scene& s = scene();
  mcvo::SlidingWindowState state;
  for (const auto& cam : s.rig.cameras) state.extrinsics.push_back(cam.extrinsic);
  state.scales.assign(s.rig.size(), 1.0);
  state.capacity = last - first + 1;
  for (int f = first; f <= last; ++f) state.frames.push_back({f, f / 10.0, s.trajectory[f]});
  std::map<int, Eigen::Vector3d> positions;
  for (const auto& lm : s.cloud.landmarks) positions[lm.id] = lm.position;
  for (int c = 0; c < s.rig.size(); ++c) {
    for (const auto& [track_id, track] : s.sim.tracks.tracks(c)) {
      const mcvo::LandmarkId id = mcvo::make_landmark_id(c, track_id);
      std::vector<mcvo::ReprojObservation> obs;
      for (const auto& p : track) {
        if (p.frame < first || p.frame > last) continue;
        if (auto o = mcvo::make_observation(s.rig.cameras[c].intrinsic, c, id, p.frame, p.pixel)) {
          obs.push_back(*o);
        }
      }
      if (obs.size() < 2) continue;
      auto lm = mcvo::anchor_landmark(state, id, obs.front().frame,
                                      positions.at(s.sim.track_landmark[c].at(track_id)));
      if (!lm) continue;
      lm->camera = c;
      state.landmarks[id] = *lm;
      state.observations.insert(state.observations.end(), obs.begin(), obs.end());
    }
  }
  return state;
}

Parallelism mode(const benchmark::State& st) {
  return st.range(0) ? Parallelism::kOpenMP : Parallelism::kSerial;
}

void BM_Render(benchmark::State& st) {
  const Scene& s = scene();
  for (auto _ : st) {
    auto out = mcvo::sim::render_observations(s.rig, s.trajectory, s.cloud, {0.5, 0.02, 0.05, 1},
                                              mode(st));
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_Render)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Admission(benchmark::State& st) {
  const Scene& s = scene();
  for (auto _ : st) {
    auto out = mcvo::admit_tracks(s.sim.tracks, s.rig, {}, mode(st));
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_Admission)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Residuals(benchmark::State& st) {
  const auto state = window(50, 60);
  for (auto _ : st) {
    auto r = mcvo::evaluate_residuals(state, mode(st));
    benchmark::DoNotOptimize(r);
  }
  st.counters["observations"] = static_cast<double>(state.observations.size());
}
BENCHMARK(BM_Residuals)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_OptimizeWindow(benchmark::State& st) {
  const auto base = window(50, 60);
  mcvo::OptimizeOptions options;
  options.max_iterations = 3;
  options.parallelism = mode(st);
  for (auto _ : st) {
    st.PauseTiming();
    auto state = base;
    for (auto& [id, lm] : state.landmarks) lm.inverse_depth *= 1.05;
    st.ResumeTiming();
    auto report = mcvo::optimize_window(state, options);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(BM_OptimizeWindow)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
