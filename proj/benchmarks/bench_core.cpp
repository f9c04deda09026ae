#include <benchmark/benchmark.h>

#include <random>

#include "jotlas/acquisition.hpp"
#include "jotlas/phantom.hpp"
#include "jotlas/prox.hpp"
#include "jotlas/solvers.hpp"
#include "jotlas/tensor.hpp"

using namespace jotlas;

namespace {

DynamicImage random_image(int h, int w, int t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  DynamicImage img(h, w, t);
  for (Complex& v : img.values()) v = Complex(gauss(rng), gauss(rng));
  return img;
}

IterationParams default_params() {
  IterationParams p;
  p.mu = 1.0;
  p.omega1 = 0.5;
  p.lr_threshold = {ThresholdSpec::Mode::sigma_max_relative, -6.0};
  p.sp_threshold = 0.002;
  p.lr_transform.kind = TransformKind::dft_mode3;
  p.sp_transform.kind = TransformKind::dft_mode3;
  return p;
}

}  // namespace

static void BM_ForwardAdjoint(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  const AcquisitionOperator op(make_vds_mask(128, 128, frames, 4.0, 1));
  const DynamicImage x = random_image(128, 128, frames, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(op.adjoint(op.forward(x)));
  }
}
BENCHMARK(BM_ForwardAdjoint)->Arg(8)->Arg(16);

static void BM_Mode3Dft(benchmark::State& state) {
  const DynamicImage x = random_image(128, 128, static_cast<int>(state.range(0)), 3);
  const TransformSpec spec{TransformKind::dft_mode3};
  for (auto _ : state) {
    benchmark::DoNotOptimize(transform_apply(spec, x));
  }
}
BENCHMARK(BM_Mode3Dft)->Arg(8)->Arg(16);

static void BM_SvtSlice(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = Complex(gauss(rng), gauss(rng));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(svt_matrix(m, 0.5));
  }
}
BENCHMARK(BM_SvtSlice)->Arg(32)->Arg(64)->Arg(128);

static void BM_SoftThresholdTensor(benchmark::State& state) {
  const DynamicImage x = random_image(128, 128, 16, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(soft_threshold(x, 0.1));
  }
}
BENCHMARK(BM_SoftThresholdTensor);

static void BM_CsaIteration(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  PhantomSpec ps;
  ps.height = 128;
  ps.width = 128;
  ps.frames = frames;
  ps.kind = PhantomKind::lowrank_plus_sparse;
  const DynamicImage truth = make_phantom(ps);
  const AcquisitionOperator op(make_vds_mask(128, 128, frames, 4.0, 1));
  const KSpaceData b = op.forward(truth);
  SolverSchedule sched;
  sched.iterations = 1;
  sched.per_iteration = default_params();
  sched.acceleration = Acceleration::none;
  SolveOptions options;
  options.trace_metrics = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(csa_reconstruct(b, op, sched, options));
  }
}
BENCHMARK(BM_CsaIteration)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
