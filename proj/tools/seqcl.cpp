// seqcl command line: preprocess | embed | index | train | eval | ablate |
// pipeline | synth. Every subcommand takes an optional key=value config file;
// explicit flags override it, and --seed threads through all stages.

#include <iostream>

#include <CLI11.hpp>

#include "seqcl/ablation.hpp"
#include "seqcl/io_util.hpp"
#include "seqcl/log.hpp"
#include "seqcl/pipeline.hpp"
#include "seqcl/synthetic.hpp"

namespace {

using seqcl::PipelineConfig;

struct CommonOpts {
    std::string config_path;
    int64_t seed = -1;  // -1 = keep config value
};

PipelineConfig load_config(const CommonOpts& opts) {
    PipelineConfig cfg;
    if (!opts.config_path.empty()) cfg = PipelineConfig::from_file(opts.config_path);
    if (opts.seed >= 0) cfg.train.seed = static_cast<uint64_t>(opts.seed);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value config file");
    cmd->add_option("--seed", opts.seed, "override the global seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequential recommender with semantic-retrieval contrastive learning"};
    app.require_subcommand(1);

    // ---- preprocess ----
    CommonOpts pre_common;
    std::string pre_interactions, pre_catalog, pre_out;
    int pre_min_core = 5, pre_max_len = 20;
    auto* pre = app.add_subcommand("preprocess",
                                   "filter interactions, build vocab and splits");
    add_common(pre, pre_common);
    pre->add_option("--interactions", pre_interactions)->required();
    pre->add_option("--catalog", pre_catalog)->required();
    pre->add_option("--out", pre_out)->required();
    pre->add_option("--min-core", pre_min_core, "minimum interactions per user/item");
    pre->add_option("--max-len", pre_max_len, "maximum sequence length");

    // ---- embed ----
    CommonOpts emb_common;
    std::string emb_kind, emb_client, emb_backend, emb_data, emb_out, emb_fixtures;
    int emb_dim = 0;
    auto* emb = app.add_subcommand("embed", "build a frozen semantic embedding cache");
    add_common(emb, emb_common);
    emb->add_option("--kind", emb_kind, "user|item")->required();
    emb->add_option("--client", emb_client, "stub|replay|remote");
    emb->add_option("--backend", emb_backend, "stub|external");
    emb->add_option("--data", emb_data, "prepared data directory")->required();
    emb->add_option("--out", emb_out, "cache file path")->required();
    emb->add_option("--fixtures", emb_fixtures, "fixture directory for record/replay");
    emb->add_option("--sem-dim", emb_dim, "embedding dimension");

    // ---- index ----
    CommonOpts idx_common;
    std::string idx_cache, idx_out;
    int idx_k = 10;
    auto* idx = app.add_subcommand("index", "materialize top-k candidate pools");
    add_common(idx, idx_common);
    idx->add_option("--cache", idx_cache)->required();
    idx->add_option("--k", idx_k);
    idx->add_option("--out", idx_out)->required();

    // ---- train ----
    CommonOpts tr_common;
    std::string tr_data, tr_caches, tr_pools, tr_out, tr_dump;
    auto* tr = app.add_subcommand("train", "fit the model with the joint objective");
    add_common(tr, tr_common);
    tr->add_option("--data", tr_data)->required();
    tr->add_option("--caches", tr_caches, "directory holding user.cache");
    tr->add_option("--pools", tr_pools, "directory holding user.pools/item.pools");
    tr->add_option("--out", tr_out)->required();
    tr->add_option("--dump-augmentations", tr_dump, "NDJSON augmentation log path");

    // ---- eval ----
    CommonOpts ev_common;
    std::string ev_ckpt, ev_data, ev_out, ev_ks = "10,20", ev_groups = "7,10";
    bool ev_filter_seen = false, ev_valid = false;
    auto* ev = app.add_subcommand("eval", "full-catalog ranking metrics from a checkpoint");
    add_common(ev, ev_common);
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--k", ev_ks, "comma-separated cutoffs");
    ev->add_option("--groups", ev_groups, "comma-separated length bucket edges");
    ev->add_option("--out", ev_out)->required();
    ev->add_flag("--filter-seen", ev_filter_seen, "mask items from the user's history");
    ev->add_flag("--valid", ev_valid, "evaluate the validation pairs instead of test");

    // ---- ablate ----
    CommonOpts ab_common;
    std::string ab_data, ab_caches, ab_pools, ab_out;
    std::string ab_variants = "no_cs,no_is,no_cl,no_learnable,no_semantic,no_llm";
    auto* ab = app.add_subcommand("ablate", "train and compare ablation variants");
    add_common(ab, ab_common);
    ab->add_option("--data", ab_data)->required();
    ab->add_option("--caches", ab_caches)->required();
    ab->add_option("--pools", ab_pools)->required();
    ab->add_option("--out", ab_out)->required();
    ab->add_option("--variants", ab_variants, "comma-separated variant names");

    // ---- pipeline ----
    CommonOpts pl_common;
    std::string pl_out;
    bool pl_dry = false;
    auto* pl = app.add_subcommand("pipeline", "all stages in order");
    add_common(pl, pl_common);
    pl->add_option("--out", pl_out, "override out_dir from the config");
    pl->add_flag("--dry-run", pl_dry, "validate config and inputs, compute nothing");

    // ---- synth ----
    CommonOpts sy_common;
    std::string sy_out;
    int sy_users = 60, sy_items = 30;
    auto* sy = app.add_subcommand("synth", "generate a seeded toy dataset");
    add_common(sy, sy_common);
    sy->add_option("--out", sy_out)->required();
    sy->add_option("--users", sy_users);
    sy->add_option("--items", sy_items);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints usage/help
        return e.get_name() == "CallForHelp" ? 0 : 2;
    }

    try {
        if (*pre) {
            PipelineConfig cfg = load_config(pre_common);
            cfg.interactions = pre_interactions;
            cfg.catalog = pre_catalog;
            cfg.min_core = pre_min_core;
            cfg.train.n = pre_max_len;
            seqcl::stage_preprocess(cfg, pre_out);
        } else if (*emb) {
            PipelineConfig cfg = load_config(emb_common);
            if (!emb_client.empty()) cfg.client = emb_client;
            if (!emb_backend.empty()) cfg.backend = emb_backend;
            if (!emb_fixtures.empty()) cfg.fixture_dir = emb_fixtures;
            if (emb_dim > 0) cfg.sem_dim = emb_dim;
            seqcl::data::Dataset ds = seqcl::data::load_prepared(emb_data);
            seqcl::stage_embed(cfg, ds, seqcl::sem::owner_kind_from_string(emb_kind), emb_out);
        } else if (*idx) {
            PipelineConfig cfg = load_config(idx_common);
            seqcl::stage_index(cfg, idx_cache, idx_k, idx_out);
        } else if (*tr) {
            PipelineConfig cfg = load_config(tr_common);
            if (!tr_dump.empty()) cfg.train.dump_augmentations = tr_dump;
            seqcl::data::Dataset ds = seqcl::data::load_prepared(tr_data);
            std::filesystem::path caches = tr_caches.empty() ? tr_pools : tr_caches;
            std::filesystem::path pools = tr_pools.empty() ? tr_caches : tr_pools;
            seqcl::stage_train(cfg, ds, caches, pools, tr_out);
        } else if (*ev) {
            PipelineConfig cfg = load_config(ev_common);
            cfg.filter_seen = ev_filter_seen;
            {
                seqcl::KvConfig kv;
                kv.set("eval_ks", ev_ks);
                kv.set("group_edges", ev_groups);
                cfg.eval_ks.clear();
                cfg.group_edges.clear();
                PipelineConfig parsed = PipelineConfig::from_kv(kv);
                cfg.eval_ks = parsed.eval_ks;
                cfg.group_edges = parsed.group_edges;
            }
            seqcl::data::Dataset ds = seqcl::data::load_prepared(ev_data);
            seqcl::eval::EvalOptions opts;
            opts.ks = cfg.eval_ks;
            opts.buckets.edges = cfg.group_edges;
            opts.filter_seen = cfg.filter_seen;
            opts.use_test = !ev_valid;
            seqcl::eval::MetricReport report =
                seqcl::eval::evaluate_checkpoint(ev_ckpt, ds, opts);
            seqcl::write_file(ev_out, report.to_csv());
            seqcl::write_provenance(ev_out, cfg.echo());
            std::cout << report.to_csv();
        } else if (*ab) {
            PipelineConfig cfg = load_config(ab_common);
            seqcl::data::Dataset ds = seqcl::data::load_prepared(ab_data);
            auto user_sem = seqcl::sem::EmbeddingCache::load(
                std::filesystem::path(ab_caches) / "user.cache");
            auto user_pools = seqcl::retrieval::load_pools(
                std::filesystem::path(ab_pools) / "user.pools");
            auto item_pools = seqcl::retrieval::load_pools(
                std::filesystem::path(ab_pools) / "item.pools");
            seqcl::train::AblationInputs inputs;
            inputs.ds = &ds;
            inputs.resources.user_sem = &user_sem;
            inputs.resources.user_pools = &user_pools;
            inputs.resources.item_pools = &item_pools;
            inputs.sem_dim = cfg.sem_dim;
            inputs.sem_seed = cfg.train.seed;
            std::vector<std::string> variants;
            size_t pos = 0;
            while (pos < ab_variants.size()) {
                size_t comma = ab_variants.find(',', pos);
                if (comma == std::string::npos) comma = ab_variants.size();
                variants.push_back(ab_variants.substr(pos, comma - pos));
                pos = comma + 1;
            }
            auto rows = seqcl::train::run_ablation(cfg.train, inputs, variants);
            std::filesystem::path out(ab_out);
            seqcl::write_file(out / "ablation.csv", seqcl::train::ablation_csv(rows));
            seqcl::write_file(out / "ablation.md", seqcl::train::ablation_markdown(rows));
            seqcl::write_provenance(out / "ablation.csv", cfg.echo());
            std::cout << seqcl::train::ablation_markdown(rows);
        } else if (*pl) {
            PipelineConfig cfg = load_config(pl_common);
            if (!pl_out.empty()) cfg.out_dir = pl_out;
            if (pl_dry) {
                seqcl::dry_run(cfg);
            } else {
                seqcl::run_pipeline(cfg);
            }
        } else if (*sy) {
            seqcl::synth::ToySpec spec;
            spec.users = sy_users;
            spec.items = sy_items;
            if (sy_common.seed >= 0) spec.seed = static_cast<uint64_t>(sy_common.seed);
            seqcl::synth::write_toy_files(spec, sy_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
