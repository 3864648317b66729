// Serial reference kernels against the OpenMP kernels. Sizes are image
// side lengths.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "rmf/cache.hpp"
#include "rmf/reference.hpp"
#include "rmf/render.hpp"
#include "scenes.hpp"

namespace {

using namespace rmf;

RenderOptions options(int size, IntersectMode mode) {
  RenderOptions o;
  o.width = size;
  o.height = size;
  o.mode = mode;
  return o;
}

void BM_IntersectExactReference(benchmark::State& state) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::intersect_grid(cam, scene.field, scene.levels, n, n));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}

void BM_IntersectExactParallel(benchmark::State& state) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(intersect_grid(cam, scene.field, scene.levels, n, n));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
  state.counters["threads"] = omp_get_max_threads();
}

void BM_IntersectLowresReference(benchmark::State& state) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        reference::intersect_lowres_upsample(cam, scene.field, scene.levels, n, n, 4));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}

void BM_IntersectLowresParallel(benchmark::State& state) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(intersect_lowres_upsample(cam, scene.field, scene.levels, n, n, 4));
  }
  state.SetItemsProcessed(state.iterations() * n * n);
  state.counters["threads"] = omp_get_max_threads();
}

void BM_RenderReference(benchmark::State& state) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const RenderOptions o = options(static_cast<int>(state.range(0)), IntersectMode::kLowres);
  for (auto _ : state) benchmark::DoNotOptimize(reference::render(scene, cam, o));
  state.SetItemsProcessed(state.iterations() * o.width * o.height);
}

void BM_RenderParallel(benchmark::State& state) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const RenderOptions o = options(static_cast<int>(state.range(0)), IntersectMode::kLowres);
  for (auto _ : state) benchmark::DoNotOptimize(render(scene, cam, o));
  state.SetItemsProcessed(state.iterations() * o.width * o.height);
  state.counters["threads"] = omp_get_max_threads();
}

void BM_RenderCached(benchmark::State& state) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const RenderOptions o = options(static_cast<int>(state.range(0)), IntersectMode::kLowres);
  const ManifoldCache cache = cache_manifolds(scene, cam, o.width, o.height, 4);
  const Camera novel = orbit_about(cam, Vec3::Zero(), 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(render_cached(cache, novel, o));
  state.SetItemsProcessed(state.iterations() * o.width * o.height);
}

BENCHMARK(BM_IntersectExactReference)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IntersectExactParallel)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IntersectLowresReference)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IntersectLowresParallel)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderReference)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderParallel)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderCached)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
