#include "seqcl/pipeline.hpp"

#include <cstdlib>

#include "seqcl/embed_backend.hpp"
#include "seqcl/evaluator.hpp"
#include "seqcl/io_util.hpp"
#include "seqcl/llm_client.hpp"
#include "seqcl/log.hpp"
#include "seqcl/retrieval.hpp"
#include "seqcl/semantic_pipeline.hpp"

namespace seqcl {

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    size_t pos = 0;
    while (pos < s.size()) {
        size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        std::string part = s.substr(pos, comma - pos);
        require(!part.empty(), "bad integer list: ", s);
        out.push_back(std::stoi(part));
        pos = comma + 1;
    }
    return out;
}

std::string join_int_list(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? v : "";
}

}  // namespace

PipelineConfig PipelineConfig::from_kv(const KvConfig& kv) {
    PipelineConfig c;
    c.interactions = kv.get_str("interactions", c.interactions);
    c.catalog = kv.get_str("catalog", c.catalog);
    c.out_dir = kv.get_str("out_dir", c.out_dir);
    c.min_core = static_cast<int>(kv.get_i64("min_core", c.min_core));
    c.client = kv.get_str("client", c.client);
    c.backend = kv.get_str("backend", c.backend);
    c.sem_dim = static_cast<int>(
        kv.get_i64("sem_dim", c.backend == "external" ? 1024 : c.sem_dim));
    c.fixture_dir = kv.get_str("fixture_dir", c.fixture_dir);
    c.llm_endpoint = kv.get_str("llm_endpoint", c.llm_endpoint);
    c.llm_model = kv.get_str("llm_model", c.llm_model);
    c.embed_endpoint = kv.get_str("embed_endpoint", c.embed_endpoint);
    c.prompt_max_desc_chars =
        static_cast<int>(kv.get_i64("prompt_max_desc_chars", c.prompt_max_desc_chars));
    c.item_prompt_max_seqs =
        static_cast<int>(kv.get_i64("item_prompt_max_seqs", c.item_prompt_max_seqs));
    c.k_user = static_cast<int>(kv.get_i64("k_user", c.k_user));
    c.k_item = static_cast<int>(kv.get_i64("k_item", c.k_item));
    c.train = train::train_config_from_kv(kv);
    c.eval_ks = parse_int_list(kv.get_str("eval_ks", join_int_list(c.eval_ks)));
    c.group_edges = parse_int_list(kv.get_str("group_edges", join_int_list(c.group_edges)));
    c.filter_seen = kv.get_bool("filter_seen", c.filter_seen);
    return c;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    return from_kv(KvConfig::parse(read_file(path)));
}

KvConfig PipelineConfig::to_kv() const {
    KvConfig kv;
    kv.set("interactions", interactions);
    kv.set("catalog", catalog);
    kv.set("out_dir", out_dir);
    kv.set_i64("min_core", min_core);
    kv.set("client", client);
    kv.set("backend", backend);
    kv.set_i64("sem_dim", sem_dim);
    kv.set("fixture_dir", fixture_dir);
    kv.set("llm_endpoint", llm_endpoint);
    kv.set("llm_model", llm_model);
    kv.set("embed_endpoint", embed_endpoint);
    kv.set_i64("prompt_max_desc_chars", prompt_max_desc_chars);
    kv.set_i64("item_prompt_max_seqs", item_prompt_max_seqs);
    kv.set_i64("k_user", k_user);
    kv.set_i64("k_item", k_item);
    train::train_config_to_kv(train, kv);
    kv.set("eval_ks", join_int_list(eval_ks));
    kv.set("group_edges", join_int_list(group_edges));
    kv.set_i64("filter_seen", filter_seen ? 1 : 0);
    return kv;
}

data::Dataset stage_preprocess(const PipelineConfig& cfg,
                               const std::filesystem::path& out_dir) {
    log_json("preprocess", "start", {{"interactions", cfg.interactions}});
    data::LoadReport load_report;
    auto records = data::load_interactions(cfg.interactions, &load_report);
    size_t raw = records.size();
    records = data::five_core_filter(std::move(records), cfg.min_core);
    data::SequenceData sd = data::build_sequences(records);
    auto raw_catalog = data::load_catalog(cfg.catalog);
    data::ItemCatalog catalog = data::normalize_catalog(raw_catalog, sd.vocab);
    data::Dataset ds = data::make_dataset(std::move(sd), std::move(catalog));
    data::PreprocessStats stats = data::write_prepared(ds, load_report, raw, out_dir);
    for (const char* artifact :
         {"sequences.jsonl", "vocab.json", "catalog.norm.jsonl", "stats.json"}) {
        write_provenance(out_dir / artifact, cfg.echo());
    }
    log_json("preprocess", "done",
             {{"users", stats.users}, {"items", stats.items},
              {"records", stats.filtered_records}});
    return ds;
}

void stage_embed(const PipelineConfig& cfg, const data::Dataset& ds, sem::OwnerKind kind,
                 const std::filesystem::path& cache_path) {
    log_json("embed", "start", {{"kind", sem::to_string(kind)}});
    sem::RemoteConfig remote;
    remote.endpoint = cfg.llm_endpoint;
    remote.model = cfg.llm_model;
    remote.api_key = env_or_empty("SEQCL_API_KEY");
    std::filesystem::path fixtures =
        cfg.fixture_dir.empty() ? cache_path.parent_path() / "fixtures"
                                : std::filesystem::path(cfg.fixture_dir);
    auto client = sem::make_client(cfg.client, fixtures, remote);
    auto backend = sem::make_backend(cfg.backend, cfg.sem_dim, cfg.train.seed,
                                     cfg.embed_endpoint, env_or_empty("SEQCL_EMBED_API_KEY"));
    sem::PromptOptions opts;
    opts.max_desc_chars = cfg.prompt_max_desc_chars;
    opts.max_item_seqs = cfg.item_prompt_max_seqs;

    sem::EmbeddingCache cache =
        kind == sem::OwnerKind::user
            ? sem::build_user_cache(ds, *client, *backend, opts, cache_path)
            : sem::build_item_cache(ds, *client, *backend, opts, cache_path);
    write_provenance(cache_path, cfg.echo());
    log_json("embed", "done",
             {{"kind", sem::to_string(kind)}, {"entries", cache.size()}});
}

void stage_index(const PipelineConfig& cfg, const std::filesystem::path& cache_path, int k,
                 const std::filesystem::path& pools_path) {
    sem::EmbeddingCache cache = sem::EmbeddingCache::load(cache_path);
    retrieval::Index index(cache);
    retrieval::PoolMap pools = retrieval::materialize_pools(index, k);
    retrieval::save_pools(pools, pools_path);
    write_provenance(pools_path, cfg.echo());
    log_json("index", "done", {{"anchors", pools.size()}, {"k", k}});
}

train::FitResult stage_train(const PipelineConfig& cfg, const data::Dataset& ds,
                             const std::filesystem::path& caches_dir,
                             const std::filesystem::path& pools_dir,
                             const std::filesystem::path& out_dir) {
    const double alpha = cfg.train.effective_alpha();
    const double beta = cfg.train.effective_beta();

    std::optional<sem::EmbeddingCache> user_sem;
    retrieval::PoolMap user_pools, item_pools;
    train::ContrastiveResources res;
    const train::ContrastiveResources* res_ptr = nullptr;
    if ((alpha > 0.0 || beta > 0.0) && !cfg.train.no_semantic) {
        if (alpha > 0.0) {
            user_sem = sem::EmbeddingCache::load(caches_dir / "user.cache");
            user_pools = retrieval::load_pools(pools_dir / "user.pools");
            res.user_sem = &*user_sem;
            res.user_pools = &user_pools;
        }
        if (beta > 0.0) {
            item_pools = retrieval::load_pools(pools_dir / "item.pools");
            res.item_pools = &item_pools;
        }
        res_ptr = &res;
    }
    return train::fit(cfg.train, ds, res_ptr, out_dir);
}

eval::MetricReport stage_eval(const PipelineConfig& cfg, const std::filesystem::path& ckpt,
                              const data::Dataset& ds,
                              const std::filesystem::path& report_path) {
    eval::EvalOptions opts;
    opts.ks = cfg.eval_ks;
    opts.buckets.edges = cfg.group_edges;
    opts.filter_seen = cfg.filter_seen;
    eval::MetricReport report = eval::evaluate_checkpoint(ckpt, ds, opts);
    if (!report_path.empty()) {
        write_file(report_path, report.to_csv());
        write_provenance(report_path, cfg.echo());
    }
    return report;
}

eval::MetricReport run_pipeline(const PipelineConfig& cfg) {
    require(!cfg.out_dir.empty(), "pipeline: out_dir is required");
    std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);

    data::Dataset ds = stage_preprocess(cfg, out / "prepared");

    const double alpha = cfg.train.effective_alpha();
    const double beta = cfg.train.effective_beta();
    std::filesystem::path resources = out / "semantic";
    if ((alpha > 0.0 || beta > 0.0) && !cfg.train.no_semantic) {
        if (alpha > 0.0) {
            stage_embed(cfg, ds, sem::OwnerKind::user, resources / "user.cache");
            stage_index(cfg, resources / "user.cache", cfg.effective_k_user(),
                        resources / "user.pools");
        }
        if (beta > 0.0) {
            stage_embed(cfg, ds, sem::OwnerKind::item, resources / "item.cache");
            stage_index(cfg, resources / "item.cache", cfg.effective_k_item(),
                        resources / "item.pools");
        }
    }

    train::FitResult fitres = stage_train(cfg, ds, resources, resources, out / "train");
    eval::MetricReport report =
        stage_eval(cfg, out / "train" / "best.ckpt", ds, out / "report.csv");
    log_json("pipeline", "done", {{"report", (out / "report.csv").string()}});
    return report;
}

void dry_run(const PipelineConfig& cfg) {
    cfg.train.validate();
    require(!cfg.interactions.empty(), "dry-run: interactions path not set");
    require(std::filesystem::exists(cfg.interactions), "dry-run: interactions file missing: ",
            cfg.interactions);
    require(!cfg.catalog.empty(), "dry-run: catalog path not set");
    require(std::filesystem::exists(cfg.catalog), "dry-run: catalog file missing: ",
            cfg.catalog);
    require(cfg.client == "stub" || cfg.client == "replay" || cfg.client == "remote",
            "dry-run: unknown client: ", cfg.client);
    require(cfg.backend == "stub" || cfg.backend == "external", "dry-run: unknown backend: ",
            cfg.backend);
    if (cfg.client == "replay") {
        require(!cfg.fixture_dir.empty() && std::filesystem::exists(cfg.fixture_dir),
                "dry-run: replay client needs an existing fixture_dir");
    }
    if (cfg.client == "remote") {
        require(!cfg.llm_endpoint.empty(), "dry-run: remote client needs llm_endpoint");
        require(!cfg.llm_model.empty(), "dry-run: remote client needs llm_model");
    }
    if (cfg.backend == "external") {
        require(!cfg.embed_endpoint.empty(), "dry-run: external backend needs embed_endpoint");
    }
    require(cfg.sem_dim >= 1, "dry-run: sem_dim must be >= 1");
    require(!cfg.eval_ks.empty(), "dry-run: eval_ks must not be empty");
    log_json("dry_run", "ok", {{"out_dir", cfg.out_dir}});
}

}  // namespace seqcl
