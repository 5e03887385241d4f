// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "critstep/analysis.hpp"

using namespace critstep;

namespace {

const Problem& pendulum() {
    static const Problem p = *find_problem("double-pendulum");
    return p;
}

const Vector& pendulum_seed() {
    static const Vector x = [] {
        const Trajectory ref = reference_trajectory({}, default_cache_dir());
        return state_at(ref, pendulum().ode, 0.9);
    }();
    return x;
}

template <bool Parallel>
void BM_SweepPendulum(benchmark::State& state) {
    const auto methods = method_ids();
    const Vector& x = pendulum_seed();
    for (auto _ : state) {
        auto r = Parallel ? critical_sweep(methods, pendulum(), x, {}) : critical_sweep_serial(methods, pendulum(), x, {});
        benchmark::DoNotOptimize(r);
    }
}

template <bool Parallel>
void BM_SweepSpring(benchmark::State& state) {
    const Problem spring = *find_problem("cubic-spring");
    const auto methods = method_ids();
    ContinuationSettings s;
    s.h_max = 3.0;
    const Vector x{1.0, 0.0};
    for (auto _ : state) {
        auto r = Parallel ? critical_sweep(methods, spring, x, s) : critical_sweep_serial(methods, spring, x, s);
        benchmark::DoNotOptimize(r);
    }
}

template <bool Parallel>
void BM_ValidateRun(benchmark::State& state) {
    const ResidualSystem rs = make_residual("vt1", pendulum());
    const auto ic = double_pendulum_initial_state();
    // The first eight steps at h = 0.1225 are all on the principal branch.
    const auto run = integrate_fixed(rs, ic, 0.0, 8 * 0.1225, 0.1225, Initializer::previous);
    if (!run.ok()) {
        state.SkipWithError("integration failed");
        return;
    }
    for (auto _ : state) {
        auto v = Parallel ? validate_trajectory(rs, run.steps, {}) : validate_trajectory_serial(rs, run.steps, {});
        benchmark::DoNotOptimize(v);
    }
}

void BM_BorderedSolve(benchmark::State& state) {
    const ResidualSystem rs = make_residual("gl6", pendulum());
    const Vector& x = pendulum_seed();
    const Vector z = rs.initial_z(x);
    const DenseMatrix gz = rs.d_z(z, x, 0.1);
    const Vector gh = rs.d_h(z, x, 0.1);
    Vector t(z.size() + 1, 0.0), e(z.size() + 1, 0.0), rhs(z.size() + 1, 0.0);
    t.back() = e.back() = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(solve_bordered(gz, gh, t, e, rhs));
}

}  // namespace

BENCHMARK(BM_SweepPendulum<false>)->Name("sweep_pendulum/serial")->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_SweepPendulum<true>)->Name("sweep_pendulum/openmp")->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_SweepSpring<false>)->Name("sweep_spring/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepSpring<true>)->Name("sweep_spring/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ValidateRun<false>)->Name("validate_vt1/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ValidateRun<true>)->Name("validate_vt1/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BorderedSolve)->Name("bordered_solve/gl6_pendulum");
BENCHMARK_MAIN();
