#pragma once

#include <filesystem>

#include "seqcl/backbone.hpp"
#include "seqcl/data.hpp"
#include "seqcl/metrics.hpp"
#include "seqcl/synthesizer.hpp"

namespace seqcl::eval {

// Eval-mode forward + full-catalog rank for each (input, target) pair.
// `seen` (optional, one list per user) masks previously seen items out of
// the ranking; the target itself is never masked.
std::vector<int> rank_targets(const model::ModelParams<float>& params,
                              const std::vector<std::vector<ItemId>>& inputs,
                              const std::vector<ItemId>& targets, int batch_size = 256,
                              const std::vector<std::vector<ItemId>>* seen = nullptr);

struct EvalOptions {
    std::vector<int> ks{10, 20};
    LengthBuckets buckets;
    bool filter_seen = false;
    bool use_test = true;  // false evaluates the validation pairs
    int batch_size = 256;
};

// Inference per the deployment contract: only the backbone runs, and a
// guard asserts that no semantic cache or pool file is touched.
MetricReport evaluate_params(const model::ModelParams<float>& params, const data::Dataset& ds,
                             const EvalOptions& opts = {});

// Loads a checkpoint (backbone + synthesizer tensors, shapes derived from
// the stored config echo) and evaluates it.
struct LoadedCheckpoint {
    model::ModelParams<float> params;
    cl::SynthesizerParams<float> synth;
    std::string config_echo;
};

LoadedCheckpoint load_model_checkpoint(const std::filesystem::path& path);

MetricReport evaluate_checkpoint(const std::filesystem::path& path, const data::Dataset& ds,
                                 const EvalOptions& opts = {});

}  // namespace seqcl::eval
