#include "seqcl/evaluator.hpp"

#include <algorithm>
#include <limits>

#include "seqcl/checkpoint.hpp"
#include "seqcl/embedding_cache.hpp"
#include "seqcl/kv_config.hpp"

namespace seqcl::eval {

std::vector<int> rank_targets(const model::ModelParams<float>& params,
                              const std::vector<std::vector<ItemId>>& inputs,
                              const std::vector<ItemId>& targets, int batch_size,
                              const std::vector<std::vector<ItemId>>* seen) {
    require(inputs.size() == targets.size(), "rank_targets: inputs/targets size mismatch");
    if (seen) require(seen->size() == inputs.size(), "rank_targets: seen list size mismatch");
    const model::BackboneConfig& bc = params.config;
    std::vector<int> ranks(inputs.size());

    size_t pos = 0;
    while (pos < inputs.size()) {
        size_t count = std::min(static_cast<size_t>(batch_size), inputs.size() - pos);
        std::vector<std::vector<ItemId>> batch_inputs(inputs.begin() + static_cast<ptrdiff_t>(pos),
                                                      inputs.begin() + static_cast<ptrdiff_t>(pos + count));
        std::vector<ItemId> batch_targets(targets.begin() + static_cast<ptrdiff_t>(pos),
                                          targets.begin() + static_cast<ptrdiff_t>(pos + count));
        data::PaddedBatch batch = data::make_eval_batch(batch_inputs, batch_targets, bc.n);
        nn::SeqBatch sb = model::seq_batch_from_ids(batch.item_ids, batch.size, bc.n);
        nn::Tape<float> tape;
        model::ParamNodes nodes = model::make_param_nodes(tape, params);
        model::EncodeResult enc =
            model::encode(tape, nodes, bc, batch.item_ids, sb, /*training=*/false, nullptr);
        int logits = model::score_items(tape, nodes, enc.last_h, bc.num_items);
        const nn::Mat<float>& lv = tape.value(logits);

        std::vector<float> scores(static_cast<size_t>(bc.num_items));
        for (size_t i = 0; i < count; ++i) {
            for (int v = 0; v < bc.num_items; ++v)
                scores[static_cast<size_t>(v)] = lv(static_cast<Eigen::Index>(i), v);
            ItemId target = batch.targets[i];
            if (seen) {
                for (ItemId s : (*seen)[pos + i]) {
                    if (s == target || s < 1 || s > bc.num_items) continue;
                    scores[static_cast<size_t>(s - 1)] = -std::numeric_limits<float>::infinity();
                }
            }
            ranks[pos + i] = rank_of_target(scores, target);
        }
        pos += count;
    }
    return ranks;
}

MetricReport evaluate_params(const model::ModelParams<float>& params, const data::Dataset& ds,
                             const EvalOptions& opts) {
    // inference must not touch semantic artifacts
    sem::SemanticArtifactGuard guard;

    std::vector<std::vector<ItemId>> inputs;
    std::vector<ItemId> targets;
    std::vector<int> lengths;
    std::vector<std::vector<ItemId>> seen;
    for (const auto& split : ds.splits) {
        if (!split.has_eval) continue;
        std::vector<ItemId> input = split.train;
        ItemId target;
        if (opts.use_test) {
            input.push_back(split.valid);
            target = split.test;
        } else {
            target = split.valid;
        }
        inputs.push_back(std::move(input));
        targets.push_back(target);
        lengths.push_back(split.full_length);
        if (opts.filter_seen) seen.push_back(inputs.back());
    }
    require(!inputs.empty(), "evaluate: no evaluable users");
    std::vector<int> ranks = rank_targets(params, inputs, targets, opts.batch_size,
                                          opts.filter_seen ? &seen : nullptr);
    return make_report(ranks, lengths, opts.ks, opts.buckets);
}

LoadedCheckpoint load_model_checkpoint(const std::filesystem::path& path) {
    std::string echo = model::read_checkpoint_config(path);
    KvConfig kv = KvConfig::parse(echo);

    model::BackboneConfig bc;
    bc.num_items = static_cast<int>(kv.get_i64("num_items", 0));
    bc.d = static_cast<int>(kv.get_i64("d", 64));
    bc.n = static_cast<int>(kv.get_i64("max_len", 20));
    bc.layers = static_cast<int>(kv.get_i64("layers", 2));
    bc.heads = static_cast<int>(kv.get_i64("heads", 2));
    bc.dropout = kv.get_f64("dropout", 0.5);
    require(bc.num_items >= 1, "checkpoint config echo lacks num_items");
    int sem_dim = static_cast<int>(kv.get_i64("sem_dim", bc.d));

    LoadedCheckpoint out;
    out.params = model::init_params<float>(bc, 0);
    cl::SynthesizerConfig sc;
    sc.d = bc.d;
    sc.sem_dim = sem_dim;
    out.synth = cl::init_synthesizer<float>(sc, 0);

    model::NamedTensorsMut tensors = out.params.named();
    for (auto& [name, mat] : out.synth.named()) tensors.emplace_back(name, mat);
    out.config_echo = model::load_checkpoint(path, tensors);
    return out;
}

MetricReport evaluate_checkpoint(const std::filesystem::path& path, const data::Dataset& ds,
                                 const EvalOptions& opts) {
    LoadedCheckpoint loaded = load_model_checkpoint(path);
    require(loaded.params.config.num_items == ds.num_items(),
            "checkpoint was trained on a different item vocabulary (",
            loaded.params.config.num_items, " items vs ", ds.num_items(), ")");
    return evaluate_params(loaded.params, ds, opts);
}

}  // namespace seqcl::eval
