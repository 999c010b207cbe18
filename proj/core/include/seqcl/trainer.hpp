#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "seqcl/backbone.hpp"
#include "seqcl/data.hpp"
#include "seqcl/embedding_cache.hpp"
#include "seqcl/kv_config.hpp"
#include "seqcl/retrieval.hpp"
#include "seqcl/synthesizer.hpp"

namespace seqcl::train {

struct TrainConfig {
    // backbone
    int d = 64;
    int n = 20;  // maximum sequence length
    int layers = 2;
    int heads = 2;
    double dropout = 0.5;
    bool per_position_targets = true;

    // optimization
    int batch = 256;
    double lr = 0.001;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 5.0;  // 0 disables
    int max_epochs = 200;
    int patience = 10;
    uint64_t seed = 42;

    // contrastive objectives
    double alpha = 0.1;
    double beta = 0.1;
    int k = 10;
    double substitution_ratio = 0.2;
    double leaky_slope = 0.01;
    double cl_temperature = 1.0;  // 1.0 = the losses as written
    bool detach_candidates = false;

    // ablation switches
    bool no_cs = false;
    bool no_is = false;
    bool no_learnable = false;
    bool no_semantic = false;
    bool no_llm = false;

    std::string dump_augmentations;  // NDJSON path, empty = off

    double effective_alpha() const { return no_cs ? 0.0 : alpha; }
    double effective_beta() const { return no_is ? 0.0 : beta; }
    void validate() const;
};

TrainConfig train_config_from_kv(const KvConfig& kv);
void train_config_to_kv(const TrainConfig& cfg, KvConfig& kv);

// L = L_Rec + alpha * L_CS + beta * L_IS. Non-finite components abort.
double total_loss(double l_rec, double l_cs, double l_is, double alpha, double beta);

struct EpochStats {
    int epoch = 0;
    double l_rec = 0.0;
    double l_cs = 0.0;
    double l_is = 0.0;
    double total = 0.0;
    double val_hr20 = 0.0;
    double val_ndcg20 = 0.0;
    double wall_seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;
    double best_val_ndcg20 = 0.0;
    int cs_batches_skipped = 0;    // anchors with empty pools / undersized batches
    int degenerate_augments = 0;   // views that came back identical to the source
    std::string checkpoint_path;

    std::string to_csv() const;
};

// Frozen inputs for the contrastive objectives. The trainer asserts the
// caches are frozen; the no_semantic ablation supplies none and derives
// pools from the model's own embeddings each epoch.
struct ContrastiveResources {
    const sem::EmbeddingCache* user_sem = nullptr;
    const retrieval::PoolMap* user_pools = nullptr;
    const retrieval::PoolMap* item_pools = nullptr;
};

struct FitResult {
    model::ModelParams<float> params;
    cl::SynthesizerParams<float> synth;
    TrainReport report;
};

// Test hook: maps the computed validation metric to the value used for
// early stopping.
using ValMetricHook = std::function<double(int epoch, double computed)>;

// Joint optimization of L = L_Rec + alpha * L_CS + beta * L_IS with Adam,
// per-epoch full-catalog validation, early stopping on validation NDCG@20,
// and best-checkpoint restore. When out_dir is non-empty, writes best.ckpt,
// report.csv and config.echo there.
FitResult fit(const TrainConfig& cfg, const data::Dataset& ds,
              const ContrastiveResources* res, const std::filesystem::path& out_dir = {},
              const ValMetricHook& val_hook = {});

// Config echo stored in checkpoints: the train config plus the
// data-dependent keys (num_items, sem_dim) needed to rebuild shapes.
KvConfig checkpoint_config(const TrainConfig& cfg, int num_items, int sem_dim);

}  // namespace seqcl::train
