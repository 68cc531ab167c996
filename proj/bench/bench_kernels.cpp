#include <memory>

#include <benchmark/benchmark.h>

#include "gradest/coeff_models.hpp"
#include "gradest/evolve.hpp"
#include "gradest/kernels.hpp"

using namespace gradest;

namespace {

Exec exec_of(const benchmark::State& s) { return s.range(1) ? Exec::Parallel : Exec::Serial; }

GridFunction wave(int n) {
    auto grid = std::make_shared<const Grid>(DomainSpec::periodic(LatticeSpec::unit_cube(2, n)));
    return mollify(make_square_wave(grid, 0, 1.0), 0.05);
}

void BM_ExplicitUpdate(benchmark::State& s) {
    const GridFunction u = wave(static_cast<int>(s.range(0)));
    const McfModel model;
    const Stencil st(u.grid_ptr());
    GridFunction out(u.grid_ptr());
    for (auto _ : s) {
        explicit_update(model, st, u, 1e-6, out, exec_of(s));
        benchmark::DoNotOptimize(out.values().data());
    }
    s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(st.interior().size()));
}

void BM_ScanPairs(benchmark::State& s) {
    const GridFunction u = wave(static_cast<int>(s.range(0)));
    const PairGeometry geom(u.grid());
    std::vector<double> penalty(geom.code_count());
    for (std::size_t c = 0; c < penalty.size(); ++c) penalty[c] = geom.distances()[c];
    std::uint64_t pairs = 0;
    for (auto _ : s) {
        const PairMax m = scan_pairs(u, geom, penalty, exec_of(s));
        pairs = m.pairs;
        benchmark::DoNotOptimize(m.value);
    }
    s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(pairs));
}

void BM_DifferenceByOffset(benchmark::State& s) {
    const GridFunction u = wave(static_cast<int>(s.range(0)));
    const PairGeometry geom(u.grid());
    for (auto _ : s) benchmark::DoNotOptimize(max_difference_by_offset(u, geom, exec_of(s)));
}

}  // namespace

BENCHMARK(BM_ExplicitUpdate)->ArgsProduct({{64, 128, 256}, {0, 1}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ScanPairs)->ArgsProduct({{32, 64}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DifferenceByOffset)->ArgsProduct({{32, 64}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
