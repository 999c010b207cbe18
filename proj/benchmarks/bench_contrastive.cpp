#include <benchmark/benchmark.h>

#include "seqcl/augment.hpp"
#include "seqcl/synthesizer.hpp"

using namespace seqcl;

static void BM_inter_user_loss(benchmark::State& state) {
    DetRng rng(5);
    int n = static_cast<int>(state.range(0));
    nn::Mat<float> anchors(n, 64), positives(n, 64);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 64; ++j) {
            anchors(i, j) = static_cast<float>(rng.gaussian());
            positives(i, j) = static_cast<float>(rng.gaussian());
        }
    for (auto _ : state) {
        nn::Tape<float> tape;
        int loss = cl::inter_user_loss_node(tape, tape.input(anchors),
                                            tape.input(positives), 1.0f);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.scalar(loss));
    }
}
BENCHMARK(BM_inter_user_loss)->Arg(64)->Arg(256);

static void BM_intra_user_loss(benchmark::State& state) {
    DetRng rng(6);
    int n = static_cast<int>(state.range(0));
    nn::Mat<float> h1(n, 64), h2(n, 64);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 64; ++j) {
            h1(i, j) = static_cast<float>(rng.gaussian());
            h2(i, j) = static_cast<float>(rng.gaussian());
        }
    for (auto _ : state) {
        nn::Tape<float> tape;
        int loss = cl::intra_user_loss_node(tape, tape.input(h1), tape.input(h2), 1.0f);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.scalar(loss));
    }
}
BENCHMARK(BM_intra_user_loss)->Arg(64)->Arg(256);

static void BM_augment_pair(benchmark::State& state) {
    retrieval::PoolMap pools;
    for (ItemId v = 1; v <= 200; ++v) {
        retrieval::CandidatePool pool;
        pool.anchor_id = v;
        for (int j = 1; j <= 10; ++j)
            pool.neighbors.push_back({(v + j - 1) % 200 + 1, 1.0 - 0.01 * j});
        pools.emplace(v, std::move(pool));
    }
    std::vector<ItemId> seq;
    for (int t = 0; t < 20; ++t) seq.push_back(static_cast<ItemId>(t % 200 + 1));
    DetRng rng(7);
    for (auto _ : state) {
        auto pair = cl::make_pair(seq, pools, 0.2, rng);
        benchmark::DoNotOptimize(pair);
    }
}
BENCHMARK(BM_augment_pair);

BENCHMARK_MAIN();
