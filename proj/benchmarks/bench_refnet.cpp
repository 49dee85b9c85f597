#include <benchmark/benchmark.h>

#include "refnet/critic.hpp"
#include "refnet/losses.hpp"
#include "refnet/morphology.hpp"
#include "refnet/scene_gen.hpp"
#include "refnet/segmenter.hpp"

using namespace refnet;
using nn::Tensor;

namespace {

Tensor random_tensor(Rng& rng, const nn::Shape& s) {
    std::vector<double> v(nn::shape_numel(s));
    for (auto& x : v) x = rng.uniform();
    return Tensor::from_data(s, std::move(v));
}

void BM_DiskDilate(benchmark::State& state) {
    Rng rng(1);
    BinaryMask m(64, 64);
    for (auto& v : m.grid) v = rng.bernoulli(0.4) ? 1 : 0;
    const int r = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(dilate(m, r));
}
BENCHMARK(BM_DiskDilate)->Arg(2)->Arg(6)->Arg(14);

void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(2);
    const Tensor x = random_tensor(rng, {6, 16, 64, 64});
    const Tensor w = random_tensor(rng, {16, 16, 3, 3});
    nn::GradMode off(false);
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, w, 1, 1));
}
BENCHMARK(BM_Conv2dForward);

void BM_SegmenterForward(benchmark::State& state) {
    Rng rng(3);
    ArchConfig arch;
    const Segmenter model(arch, 1);
    const Tensor t = random_tensor(rng, {4, 3, 64, 64});
    const Tensor r = random_tensor(rng, {4, 3, 64, 64});
    nn::GradMode off(false);
    for (auto _ : state) benchmark::DoNotOptimize(model.segment(t, r));
}
BENCHMARK(BM_SegmenterForward);

void BM_SegmenterBackward(benchmark::State& state) {
    Rng rng(4);
    ArchConfig arch;
    const Segmenter model(arch, 1);
    const Tensor t = random_tensor(rng, {4, 3, 64, 64});
    const Tensor r = random_tensor(rng, {4, 3, 64, 64});
    for (auto _ : state) {
        const Tensor loss = nn::mean(model.segment(t, r));
        benchmark::DoNotOptimize(nn::backward(loss));
    }
}
BENCHMARK(BM_SegmenterBackward);

void BM_CriticScore(benchmark::State& state) {
    Rng rng(5);
    const Critic critic(CriticConfig{}, 1);
    const Tensor trip = random_tensor(rng, {4, 7, 64, 64});
    nn::GradMode off(false);
    for (auto _ : state) benchmark::DoNotOptimize(critic.score(trip));
}
BENCHMARK(BM_CriticScore);

void BM_GradientPenalty(benchmark::State& state) {
    Rng rng(6);
    const Critic critic(CriticConfig{}, 1);
    const Triplet fake =
        make_fake_triplet(random_tensor(rng, {4, 3, 64, 64}), random_tensor(rng, {4, 1, 64, 64}),
                          Side::Outer);
    const Triplet real = make_real_triplet(random_tensor(rng, {4, 3, 64, 64}),
                                           Tensor::zeros({4, 1, 64, 64}), Side::Outer);
    const std::vector<double> eps(4, 0.5);
    for (auto _ : state) {
        const Tensor gp = gradient_penalty(
            [&](const Tensor& t) { return critic.score(t); }, real, fake, eps, 10.0);
        benchmark::DoNotOptimize(nn::backward(gp));
    }
}
BENCHMARK(BM_GradientPenalty);

void BM_SceneGeneration(benchmark::State& state) {
    ShapeSceneSpec spec;
    Rng rng(7);
    for (auto _ : state) benchmark::DoNotOptimize(generate_scene(spec, rng));
}
BENCHMARK(BM_SceneGeneration);

void BM_MmdLoss(benchmark::State& state) {
    Rng rng(8);
    const Tensor a = random_tensor(rng, {16, 128});
    const Tensor b = random_tensor(rng, {16, 128});
    const MmdKernelConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(mmd_loss(a, b, cfg));
}
BENCHMARK(BM_MmdLoss);

} // namespace

BENCHMARK_MAIN();
