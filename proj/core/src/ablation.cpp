#include "seqcl/ablation.hpp"

#include <cstdio>

#include "seqcl/embed_backend.hpp"
#include "seqcl/evaluator.hpp"
#include "seqcl/log.hpp"
#include "seqcl/semantic_pipeline.hpp"

namespace seqcl::train {

TrainConfig apply_variant(const TrainConfig& base, const std::string& variant) {
    TrainConfig cfg = base;
    if (variant == "base") {
        return cfg;
    } else if (variant == "no_cs") {
        cfg.no_cs = true;
    } else if (variant == "no_is") {
        cfg.no_is = true;
    } else if (variant == "no_cl") {
        cfg.no_cs = true;
        cfg.no_is = true;
    } else if (variant == "no_learnable") {
        cfg.no_learnable = true;
    } else if (variant == "no_semantic") {
        cfg.no_semantic = true;
    } else if (variant == "no_llm") {
        cfg.no_llm = true;
    } else {
        fail("unknown ablation variant: ", variant);
    }
    return cfg;
}

namespace {

AblationRow train_and_eval(const std::string& variant, const TrainConfig& cfg,
                           const data::Dataset& ds, const ContrastiveResources* res) {
    FitResult fitres = fit(cfg, ds, res);
    eval::EvalOptions opts;
    opts.ks = {10, 20};
    eval::MetricReport report = eval::evaluate_params(fitres.params, ds, opts);
    AblationRow row;
    row.variant = variant;
    row.hr10 = report.get("overall", "HR", 10);
    row.ndcg10 = report.get("overall", "NDCG", 10);
    row.hr20 = report.get("overall", "HR", 20);
    row.ndcg20 = report.get("overall", "NDCG", 20);
    row.best_epoch = fitres.report.best_epoch;
    return row;
}

}  // namespace

std::vector<AblationRow> run_ablation(const TrainConfig& base, const AblationInputs& inputs,
                                      const std::vector<std::string>& variants) {
    require(inputs.ds != nullptr, "run_ablation: dataset required");
    const data::Dataset& ds = *inputs.ds;

    std::vector<AblationRow> rows;
    log_json("ablate", "variant_start", {{"variant", "base"}});
    rows.push_back(train_and_eval("base", base, ds, &inputs.resources));

    // the no_llm variant swaps in caches built from raw attribute text
    sem::EmbeddingCache raw_user(sem::OwnerKind::user, 1), raw_item(sem::OwnerKind::item, 1);
    retrieval::PoolMap raw_user_pools, raw_item_pools;
    ContrastiveResources raw_res;
    bool raw_built = false;

    for (const std::string& variant : variants) {
        if (variant == "base") continue;
        log_json("ablate", "variant_start", {{"variant", variant}});
        TrainConfig cfg = apply_variant(base, variant);
        const ContrastiveResources* res = &inputs.resources;
        if (variant == "no_llm") {
            if (!raw_built) {
                sem::HashStubBackend backend(inputs.sem_dim, inputs.sem_seed);
                raw_user = sem::build_user_cache_raw(ds, backend);
                raw_item = sem::build_item_cache_raw(ds, backend);
                retrieval::Index user_index(raw_user);
                retrieval::Index item_index(raw_item);
                raw_user_pools = retrieval::materialize_pools(user_index, base.k);
                raw_item_pools = retrieval::materialize_pools(item_index, base.k);
                raw_res.user_sem = &raw_user;
                raw_res.user_pools = &raw_user_pools;
                raw_res.item_pools = &raw_item_pools;
                raw_built = true;
            }
            res = &raw_res;
        } else if (variant == "no_semantic") {
            res = nullptr;  // pools come from the model's own embeddings
        }
        rows.push_back(train_and_eval(variant, cfg, ds, res));
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "variant,HR@10,NDCG@10,HR@20,NDCG@20,best_epoch\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%d\n", r.variant.c_str(),
                      r.hr10, r.ndcg10, r.hr20, r.ndcg20, r.best_epoch);
        out += buf;
    }
    return out;
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
    std::string out = "| variant | HR@10 | NDCG@10 | HR@20 | NDCG@20 |\n";
    out += "|---|---|---|---|---|\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "| %s | %.4f | %.4f | %.4f | %.4f |\n",
                      r.variant.c_str(), r.hr10, r.ndcg10, r.hr20, r.ndcg20);
        out += buf;
    }
    return out;
}

}  // namespace seqcl::train
