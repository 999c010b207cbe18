#pragma once

#include "seqcl/trainer.hpp"

namespace seqcl::train {

struct AblationRow {
    std::string variant;
    double hr10 = 0.0, ndcg10 = 0.0;
    double hr20 = 0.0, ndcg20 = 0.0;
    int best_epoch = 0;
};

struct AblationInputs {
    const data::Dataset* ds = nullptr;
    ContrastiveResources resources;  // full-variant resources
    int sem_dim = 64;                // stub backend dimension for the no_llm rebuild
    uint64_t sem_seed = 0;
};

// Known variant names: base, no_cs, no_is, no_cl, no_learnable, no_semantic,
// no_llm. The base row is always trained and reported first.
std::vector<AblationRow> run_ablation(const TrainConfig& base, const AblationInputs& inputs,
                                      const std::vector<std::string>& variants);

TrainConfig apply_variant(const TrainConfig& base, const std::string& variant);

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_markdown(const std::vector<AblationRow>& rows);

}  // namespace seqcl::train
