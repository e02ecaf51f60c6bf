#include <benchmark/benchmark.h>

#include "gradmix/continuum.hpp"
#include "gradmix/mixers.hpp"
#include "gradmix/net.hpp"
#include "gradmix/nqp.hpp"
#include "gradmix/rng.hpp"
#include "gradmix/task_stream.hpp"

namespace {

using namespace gradmix;

Vec bench_vec(int n, std::uint64_t seed) {
    Rng rng(seed);
    Vec v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

void BM_LossAndGrad(benchmark::State& state) {
    NetworkSpec spec;
    spec.input_dim = static_cast<int>(state.range(0));
    spec.hidden_dims = {256, 256};
    spec.classes_per_head = 10;
    const Vec w = init_params(spec, 1);
    Rng rng(2);
    Batch b;
    b.labels.assign(10, 0);
    b.inputs = bench_vec(10 * spec.input_dim, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(loss_and_grad(spec, w, b));
    }
    state.SetItemsProcessed(state.iterations() * b.size());
}
BENCHMARK(BM_LossAndGrad)->Arg(64)->Arg(784);

void BM_MixAgem(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const Vec g = bench_vec(d, 4);
    Vec r = bench_vec(d, 5);
    if (dot(g, r) > 0.0) scale(r, -1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mix_agem({g, 1.0, r, 1.0}));
    }
}
BENCHMARK(BM_MixAgem)->Arg(2000)->Arg(269322);

void BM_MixMega2(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const Vec g = bench_vec(d, 6);
    const Vec r = bench_vec(d, 7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mix_mega2({g, 1.2, r, 0.8}));
    }
}
BENCHMARK(BM_MixMega2)->Arg(2000)->Arg(269322);

void BM_SolveNqp(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    Rng rng(8);
    std::vector<double> A(static_cast<std::size_t>(m) * m);
    for (double& a : A) a = rng.normal();
    NqpProblem p;
    p.Q.assign(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int k = 0; k < m; ++k) s += A[k * m + i] * A[k * m + j];
            p.Q[static_cast<std::size_t>(i) * m + j] = s + (i == j ? 0.1 : 0.0);
        }
    }
    p.c.resize(m);
    for (double& c : p.c) c = rng.uniform(-2.0, 2.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_nqp(p));
    }
}
BENCHMARK(BM_SolveNqp)->Arg(4)->Arg(19)->Arg(100);

void BM_ContinuumStep(benchmark::State& state) {
    // amortized per-update cost of the full loop on a small stream
    StreamConfig sc;
    sc.kind = StreamKind::synthetic;
    sc.num_tasks = 3;
    sc.examples_per_task = 200;
    sc.synthetic_dim = 20;
    sc.synthetic_classes = 5;
    sc.synthetic_test_per_task = 50;
    sc.seed = 1;
    const auto stream = make_synthetic_stream(sc);
    NetworkSpec spec;
    spec.input_dim = 20;
    spec.hidden_dims = {32, 32};
    spec.classes_per_head = 5;
    RunConfig cfg;
    cfg.method = Method::mega2;
    cfg.lr = 0.05;
    cfg.batch_size = 10;
    cfg.ref_batch_size = 64;
    cfg.mem_capacity = 50;
    cfg.eval_batches = 0;
    long steps = 0;
    for (auto _ : state) {
        cfg.seed++;
        const RunResult res = run_continuum(spec, stream, cfg);
        steps += static_cast<long>(res.trace.size());
        benchmark::DoNotOptimize(res.report.a_T);
    }
    state.SetItemsProcessed(steps);
}
BENCHMARK(BM_ContinuumStep);

}  // namespace
