// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <omp.h>

#include "oracles.hpp"
#include "rvlm/evaluation.hpp"
#include "rvlm/kernels.hpp"
#include "rvlm/training_artifacts.hpp"

using namespace rvlm;

namespace {

std::vector<BBox> boxes(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<BBox> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_box(rng));
    return out;
}

template <bool Parallel>
void BM_GiouPairs(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = boxes(n, 1);
    const auto b = boxes(n, 2);
    std::vector<double> out(n);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::giou_pairs(a, b, out);
        } else {
            kernels::giou_pairs_serial(a, b, out);
        }
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

SegmentLayout layout(std::size_t m) {
    SegmentLayout l;
    l.prefix_len = 512;
    for (std::size_t j = 0; j <= m; ++j) l.box_spans.push_back({512 + j * 23, 512 + (j + 1) * 23});
    return l;
}

template <bool Parallel>
void BM_DenseMask(benchmark::State& state) {
    const AttentionMask mask(layout(static_cast<std::size_t>(state.range(0))));
    for (auto _ : state) {
        auto d = Parallel ? mask.dense() : mask.dense_serial();
        benchmark::DoNotOptimize(d.bits.data());
    }
}

std::vector<GroundingSample> corpus(std::size_t n) {
    std::mt19937_64 rng(3);
    std::vector<GroundingSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        GroundingSample s;
        s.image_path = "/nonexistent.png";
        s.instruction = "target";
        s.gt = oracle::random_small_box(rng, 0.005, 0.03);
        s.dims = ImageDims{1920, 1080};
        out.push_back(s);
    }
    return out;
}

template <bool Parallel>
void BM_Evaluate(benchmark::State& state) {
    const auto samples = corpus(static_cast<std::size_t>(state.range(0)));
    const BackendFactory factory = [](std::size_t i, const GroundingSample& s) -> std::unique_ptr<Backend> {
        return std::make_unique<SimOracleBackend>(SimOracleConfig{s.gt, 0.05, 0.0, i, 2});
    };
    EvalConfig cfg;
    cfg.jobs = omp_get_max_threads();
    for (auto _ : state) {
        auto recs = Parallel ? evaluate_records(samples, factory, cfg) : evaluate_records_serial(samples, factory, cfg);
        benchmark::DoNotOptimize(recs.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_GiouPairs<false>)->Name("giou_pairs/serial")->Arg(1 << 12)->Arg(1 << 18);
BENCHMARK(BM_GiouPairs<true>)->Name("giou_pairs/parallel")->Arg(1 << 12)->Arg(1 << 18);
BENCHMARK(BM_DenseMask<false>)->Name("dense_mask/serial")->Arg(4)->Arg(8);
BENCHMARK(BM_DenseMask<true>)->Name("dense_mask/parallel")->Arg(4)->Arg(8);
BENCHMARK(BM_Evaluate<false>)->Name("evaluate/serial")->Arg(2000);
BENCHMARK(BM_Evaluate<true>)->Name("evaluate/parallel")->Arg(2000);

BENCHMARK_MAIN();
