#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "swm/geometry.hpp"
#include "swm/losses.hpp"
#include "swm/matrix.hpp"
#include "swm/network.hpp"
#include "swm/pipeline.hpp"
#include "swm/synthdata.hpp"
#include "swm/training.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace {

swm::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    swm::Matrix m(rows, cols);
    for (double& v : m.values()) v = gauss(rng);
    return m;
}

std::vector<swm::ResampledStreamline> atlas_streamlines(std::size_t count, std::size_t points) {
    swm::SyntheticAtlasSpec spec;
    const auto atlas = swm::generate_atlas(spec);
    std::vector<swm::ResampledStreamline> out;
    for (std::size_t i = 0; out.size() < count; i = (i + 1) % atlas.d1.size()) {
        out.push_back(swm::resample(atlas.d1.streamlines[i], points));
    }
    return out;
}

// Square-ish shapes from the encoder's last layer: (batch * n) x 128 by 128 x 1024.
void BM_Matmul(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto k = static_cast<std::size_t>(state.range(1));
    const auto n = static_cast<std::size_t>(state.range(2));
    const auto a = random_matrix(m, k, 1);
    const auto b = random_matrix(k, n, 2);
    swm::Matrix c(m, n);
    for (auto _ : state) {
        swm::matmul(m, n, k, a.data(), b.data(), c.data());
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["GFLOPS"] = benchmark::Counter(2.0 * static_cast<double>(m * n * k),
                                                  benchmark::Counter::kIsIterationInvariantRate,
                                                  benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Matmul)->Args({1920, 128, 1024})->Args({3840, 64, 128})->Args({128, 1024, 512});

void BM_MatmulTransposedA(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto k = static_cast<std::size_t>(state.range(1));
    const auto n = static_cast<std::size_t>(state.range(2));
    const auto a = random_matrix(k, m, 1);
    const auto b = random_matrix(k, n, 2);
    swm::Matrix c(m, n);
    for (auto _ : state) {
        swm::matmul_at(m, n, k, a.data(), b.data(), c.data());
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["GFLOPS"] = benchmark::Counter(2.0 * static_cast<double>(m * n * k),
                                                  benchmark::Counter::kIsIterationInvariantRate,
                                                  benchmark::Counter::kIs1000);
}
BENCHMARK(BM_MatmulTransposedA)->Args({128, 1024, 3840});

void BM_EncodeEval(benchmark::State& state) {
    const auto count = static_cast<std::size_t>(state.range(0));
    swm::Architecture arch;
    const auto model = swm::init_model(arch, swm::Stage::one, 3);
    const auto batch = swm::make_batch(atlas_streamlines(count, arch.points));
    for (auto _ : state) {
        auto g = swm::encode(model.encoder, batch);
        benchmark::DoNotOptimize(g.values.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(count));
}
BENCHMARK(BM_EncodeEval)->Arg(256)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_TrainStepCrossEntropy(benchmark::State& state) {
    const auto count = static_cast<std::size_t>(state.range(0));
    swm::Architecture arch;
    arch.classes = 16;
    const auto model = swm::init_model(arch, swm::Stage::two, 4);
    const auto batch = swm::make_batch(atlas_streamlines(count, arch.points));
    std::vector<std::uint32_t> labels(count);
    for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<std::uint32_t>(i % arch.classes);
    for (auto _ : state) {
        auto grads = swm::backprop_cross_entropy(model.encoder, model.classifier, batch, labels);
        benchmark::DoNotOptimize(grads.loss);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(count));
}
BENCHMARK(BM_TrainStepCrossEntropy)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Parcellate(benchmark::State& state) {
    const auto count = static_cast<std::size_t>(state.range(0));
    swm::Architecture arch;
    const auto m1 = swm::init_model(arch, swm::Stage::one, 5);
    arch.classes = 16;
    const auto m2 = swm::init_model(arch, swm::Stage::two, 6);
    const auto atlas = swm::generate_atlas(swm::SyntheticAtlasSpec{});
    std::vector<swm::Streamline> tractogram;
    for (std::size_t i = 0; tractogram.size() < count; i = (i + 1) % atlas.d1.size()) {
        tractogram.push_back(atlas.d1.streamlines[i]);
    }
    for (auto _ : state) {
        auto r = swm::parcellate(m1, m2, tractogram);
        benchmark::DoNotOptimize(r.final_label.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(count));
}
BENCHMARK(BM_Parcellate)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Mdf(benchmark::State& state) {
    const auto points = static_cast<std::size_t>(state.range(0));
    const auto s = atlas_streamlines(2, points);
    for (auto _ : state) benchmark::DoNotOptimize(swm::mdf_distance(s[0], s[1]));
}
BENCHMARK(BM_Mdf)->Arg(15)->Arg(100);

void BM_SupCon(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    auto z = random_matrix(rows, 128, 7);
    for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (double v : z.row(r)) sq += v * v;
        for (double& v : z.row(r)) v /= std::sqrt(sq);
    }
    std::vector<std::uint32_t> labels(rows);
    for (std::size_t i = 0; i < rows; ++i) labels[i] = static_cast<std::uint32_t>(i % 16);
    for (auto _ : state) {
        auto r = swm::supcon_loss(z, labels, 0.1);
        benchmark::DoNotOptimize(r.loss);
    }
}
BENCHMARK(BM_SupCon)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, -1);
#endif
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
