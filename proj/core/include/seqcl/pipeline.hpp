#pragma once

#include <filesystem>

#include "seqcl/evaluator.hpp"
#include "seqcl/kv_config.hpp"
#include "seqcl/trainer.hpp"

namespace seqcl {

// Union of every stage's configuration plus the paths between them.
// Defaults follow the reference hyperparameters (d=64, n=20, two 2-head
// layers, batch 256, lr 0.001, dropout 0.5, alpha=beta=0.1, k=10, 20%
// substitution, patience 10).
struct PipelineConfig {
    // inputs
    std::string interactions;
    std::string catalog;
    std::string out_dir;

    // preprocess
    int min_core = 5;

    // semantic provider
    std::string client = "stub";    // stub | replay | remote
    std::string backend = "stub";   // stub | external
    int sem_dim = 64;               // stub default; large external models use 1024
    std::string fixture_dir;
    std::string llm_endpoint;
    std::string llm_model;
    std::string embed_endpoint;
    int prompt_max_desc_chars = 256;
    int item_prompt_max_seqs = 10;

    // retrieval (0 = inherit train.k)
    int k_user = 0;
    int k_item = 0;

    train::TrainConfig train;

    // evaluation
    std::vector<int> eval_ks{10, 20};
    std::vector<int> group_edges{7, 10};
    bool filter_seen = false;

    static PipelineConfig from_kv(const KvConfig& kv);
    static PipelineConfig from_file(const std::filesystem::path& path);
    KvConfig to_kv() const;
    std::string echo() const { return to_kv().echo(); }

    int effective_k_user() const { return k_user > 0 ? k_user : train.k; }
    int effective_k_item() const { return k_item > 0 ? k_item : train.k; }
};

// Stage entry points (the CLI subcommands call these).
data::Dataset stage_preprocess(const PipelineConfig& cfg,
                               const std::filesystem::path& out_dir);
void stage_embed(const PipelineConfig& cfg, const data::Dataset& ds, sem::OwnerKind kind,
                 const std::filesystem::path& cache_path);
void stage_index(const PipelineConfig& cfg, const std::filesystem::path& cache_path, int k,
                 const std::filesystem::path& pools_path);
train::FitResult stage_train(const PipelineConfig& cfg, const data::Dataset& ds,
                             const std::filesystem::path& caches_dir,
                             const std::filesystem::path& pools_dir,
                             const std::filesystem::path& out_dir);
eval::MetricReport stage_eval(const PipelineConfig& cfg, const std::filesystem::path& ckpt,
                              const data::Dataset& ds,
                              const std::filesystem::path& report_path);

// All stages in order under cfg.out_dir; the final metric report lands at
// <out_dir>/report.csv. Returns the report.
eval::MetricReport run_pipeline(const PipelineConfig& cfg);

// Validates the config and the presence of its inputs without computing.
void dry_run(const PipelineConfig& cfg);

}  // namespace seqcl
