#include <benchmark/benchmark.h>

#include "seqcl/retrieval.hpp"
#include "seqcl/rng.hpp"

using namespace seqcl;

namespace {

sem::EmbeddingCache make_cache(int count, int dim) {
    sem::EmbeddingCache cache(sem::OwnerKind::user, dim);
    DetRng rng(3);
    std::vector<int32_t> ids;
    for (int i = 1; i <= count; ++i) {
        std::vector<float> v(static_cast<size_t>(dim));
        for (auto& x : v) x = static_cast<float>(rng.gaussian());
        cache.put(i, v);
        ids.push_back(i);
    }
    cache.freeze(ids);
    return cache;
}

}  // namespace

static void BM_topk_query(benchmark::State& state) {
    auto cache = make_cache(static_cast<int>(state.range(0)), 64);
    retrieval::Index index(cache);
    int32_t anchor = 1;
    for (auto _ : state) {
        auto pool = index.topk(anchor, 10);
        benchmark::DoNotOptimize(pool);
        anchor = anchor % static_cast<int32_t>(state.range(0)) + 1;
    }
}
BENCHMARK(BM_topk_query)->Arg(1000)->Arg(10000);

static void BM_materialize_pools(benchmark::State& state) {
    auto cache = make_cache(static_cast<int>(state.range(0)), 64);
    retrieval::Index index(cache);
    for (auto _ : state) {
        auto pools = retrieval::materialize_pools(index, 10);
        benchmark::DoNotOptimize(pools);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_materialize_pools)->Arg(500)->Arg(2000);
