#include <benchmark/benchmark.h>

#include "seqcl/backbone.hpp"

using namespace seqcl;

namespace {

struct Fixture {
    model::BackboneConfig cfg;
    model::ModelParams<float> params;
    std::vector<ItemId> flat;
    nn::SeqBatch sb;
    std::vector<int> labels;

    Fixture(int batch, int n, int d, int num_items) {
        cfg.num_items = num_items;
        cfg.d = d;
        cfg.n = n;
        cfg.layers = 2;
        cfg.heads = 2;
        cfg.dropout = 0.5;
        params = model::init_params<float>(cfg, 1);
        DetRng rng(2);
        flat.assign(static_cast<size_t>(batch) * n, kPaddingId);
        labels.assign(flat.size(), -1);
        for (int i = 0; i < batch; ++i) {
            int len = 2 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - 1)));
            for (int t = n - len; t < n; ++t) {
                flat[static_cast<size_t>(i * n + t)] =
                    static_cast<ItemId>(1 + rng.uniform_int(static_cast<uint64_t>(num_items)));
                labels[static_cast<size_t>(i * n + t)] =
                    static_cast<int>(rng.uniform_int(static_cast<uint64_t>(num_items)));
            }
        }
        sb = model::seq_batch_from_ids(flat, batch, n);
    }
};

}  // namespace

static void BM_encode_eval(benchmark::State& state) {
    Fixture fx(static_cast<int>(state.range(0)), 20, 64, 2000);
    for (auto _ : state) {
        nn::Tape<float> tape;
        model::ParamNodes nodes = model::make_param_nodes(tape, fx.params);
        auto enc = model::encode(tape, nodes, fx.cfg, fx.flat, fx.sb, false, nullptr);
        benchmark::DoNotOptimize(tape.value(enc.last_h));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_encode_eval)->Arg(32)->Arg(128);

static void BM_train_step_forward_backward(benchmark::State& state) {
    Fixture fx(static_cast<int>(state.range(0)), 20, 64, 2000);
    uint64_t step = 0;
    for (auto _ : state) {
        DetRng dropout_rng = make_stream(7, "dropout", {step++});
        nn::Tape<float> tape;
        model::ParamNodes nodes = model::make_param_nodes(tape, fx.params);
        auto enc = model::encode(tape, nodes, fx.cfg, fx.flat, fx.sb, true, &dropout_rng);
        int logits = model::score_items(tape, nodes, enc.states, fx.cfg.num_items);
        int loss = tape.softmax_xent(logits, fx.labels);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.grad_of(nodes.item_emb));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_train_step_forward_backward)->Arg(32)->Arg(128);
