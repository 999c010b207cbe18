#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "seqcl/ablation.hpp"
#include "seqcl/backbone.hpp"
#include "seqcl/synthesizer.hpp"
#include "seqcl/evaluator.hpp"
#include "seqcl/io_util.hpp"
#include "seqcl/retrieval.hpp"
#include "seqcl/synthetic.hpp"
#include "seqcl/trainer.hpp"

#include <json.hpp>

using namespace seqcl;
using namespace seqcl::train;

namespace {

struct PlantedFixture {
    synth::PlantedBundle bundle;
    retrieval::PoolMap user_pools;
    retrieval::PoolMap item_pools;
    ContrastiveResources res;

    explicit PlantedFixture(int users = 40, int items = 24, int k = 3, uint64_t seed = 5)
        : bundle(make_bundle(users, items, seed)) {
        retrieval::Index user_index(bundle.user_sem);
        retrieval::Index item_index(bundle.item_sem);
        user_pools = retrieval::materialize_pools(user_index, k);
        item_pools = retrieval::materialize_pools(item_index, k);
        res.user_sem = &bundle.user_sem;
        res.user_pools = &user_pools;
        res.item_pools = &item_pools;
    }

    static synth::PlantedBundle make_bundle(int users, int items, uint64_t seed) {
        synth::PlantedSpec spec;
        spec.users = users;
        spec.items = items;
        spec.clusters = 2;
        spec.sem_dim = 8;
        spec.min_len = 5;
        spec.max_len = 12;
        spec.seed = seed;
        return synth::make_planted(spec);
    }
};

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.d = 8;
    cfg.n = 8;
    cfg.layers = 1;
    cfg.heads = 1;
    cfg.dropout = 0.2;
    cfg.batch = 16;
    cfg.max_epochs = 3;
    cfg.patience = 10;
    cfg.alpha = 0.1;
    cfg.beta = 0.1;
    cfg.k = 3;
    cfg.seed = 77;
    return cfg;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("total_loss weighted sum and ablation identity") {
    CHECK(total_loss(2.0, 3.0, 4.0, 0.0, 0.0) == 2.0);
    CHECK(total_loss(2.0, 3.0, 4.0, 0.1, 0.05) == doctest::Approx(2.5).epsilon(1e-15));
    double composed = total_loss(1.25, 0.5, 0.75, 0.1, 0.1);
    CHECK(composed == doctest::Approx(1.25 + 0.1 * 0.5 + 0.1 * 0.75).epsilon(1e-12));
    CHECK_THROWS_AS(total_loss(std::nan(""), 0.0, 0.0, 0.1, 0.1), Error);
    CHECK_THROWS_AS(total_loss(1.0, INFINITY, 0.0, 0.1, 0.1), Error);
}

TEST_CASE("train config round-trips through kv") {
    TrainConfig cfg = small_config();
    cfg.no_learnable = true;
    cfg.cl_temperature = 0.5;
    KvConfig kv;
    train_config_to_kv(cfg, kv);
    TrainConfig back = train_config_from_kv(kv);
    CHECK(back.d == cfg.d);
    CHECK(back.n == cfg.n);
    CHECK(back.alpha == cfg.alpha);
    CHECK(back.no_learnable == cfg.no_learnable);
    CHECK(back.cl_temperature == cfg.cl_temperature);
    CHECK(back.seed == cfg.seed);
    // canonical echo is stable
    KvConfig kv2;
    train_config_to_kv(back, kv2);
    CHECK(kv.echo() == kv2.echo());
}

TEST_CASE("config validation rejects bad shapes") {
    TrainConfig cfg = small_config();
    cfg.alpha = -0.1;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = small_config();
    cfg.batch = 1;  // contrastive losses need N >= 2
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = small_config();
    cfg.batch = 1;
    cfg.alpha = 0.0;
    cfg.beta = 0.0;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("fit is deterministic: same seed and config give identical reports") {
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    FitResult a = fit(cfg, fx.bundle.ds, &fx.res);
    FitResult b = fit(cfg, fx.bundle.ds, &fx.res);
    REQUIRE(a.report.epochs.size() == b.report.epochs.size());
    for (size_t e = 0; e < a.report.epochs.size(); ++e) {
        CHECK(a.report.epochs[e].l_rec == b.report.epochs[e].l_rec);
        CHECK(a.report.epochs[e].l_cs == b.report.epochs[e].l_cs);
        CHECK(a.report.epochs[e].l_is == b.report.epochs[e].l_is);
        CHECK(a.report.epochs[e].val_ndcg20 == b.report.epochs[e].val_ndcg20);
    }
    CHECK(test_helpers::bits_equal(a.params.item_emb, b.params.item_emb));
    CHECK(test_helpers::bits_equal(a.synth.w, b.synth.w));
}

TEST_CASE("flat validation metric stops after exactly patience+1 epochs") {
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    cfg.alpha = 0.0;
    cfg.beta = 0.0;
    cfg.max_epochs = 50;
    cfg.patience = 4;
    FitResult res = fit(cfg, fx.bundle.ds, nullptr, {},
                        [](int, double) { return 0.5; });
    CHECK(res.report.epochs.size() == 5);  // 1 improvement + 4 flat
    CHECK(res.report.best_epoch == 1);
}

TEST_CASE("alpha=beta=0 training is step-identical to a plain-backbone run") {
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    cfg.alpha = 0.0;
    cfg.beta = 0.0;
    cfg.max_epochs = 4;
    // resources present vs entirely absent
    FitResult with_res = fit(cfg, fx.bundle.ds, &fx.res);
    FitResult without_res = fit(cfg, fx.bundle.ds, nullptr);
    REQUIRE(with_res.report.epochs.size() == without_res.report.epochs.size());
    for (size_t e = 0; e < with_res.report.epochs.size(); ++e) {
        CHECK(std::abs(with_res.report.epochs[e].total -
                       without_res.report.epochs[e].total) <= 1e-12);
        CHECK(with_res.report.epochs[e].l_cs == 0.0);
        CHECK(with_res.report.epochs[e].l_is == 0.0);
    }
    CHECK(test_helpers::bits_equal(with_res.params.item_emb, without_res.params.item_emb));

    // sanity: a nonzero alpha produces a different trajectory
    TrainConfig cl_cfg = cfg;
    cl_cfg.alpha = 0.1;
    FitResult with_cl = fit(cl_cfg, fx.bundle.ds, &fx.res);
    CHECK_FALSE(test_helpers::bits_equal(with_cl.params.item_emb, with_res.params.item_emb));
}

TEST_CASE("checkpoint round trip preserves evaluation metrics") {
    test_helpers::TempDir dir("ckpt");
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    cfg.max_epochs = 2;
    FitResult res = fit(cfg, fx.bundle.ds, &fx.res, dir.path());
    REQUIRE(std::filesystem::exists(dir.path() / "best.ckpt"));
    REQUIRE(std::filesystem::exists(dir.path() / "report.csv"));
    REQUIRE(std::filesystem::exists(dir.path() / "config.echo"));

    eval::EvalOptions opts;
    eval::MetricReport direct = eval::evaluate_params(res.params, fx.bundle.ds, opts);
    eval::MetricReport loaded =
        eval::evaluate_checkpoint(dir.path() / "best.ckpt", fx.bundle.ds, opts);
    REQUIRE(direct.rows.size() == loaded.rows.size());
    for (size_t i = 0; i < direct.rows.size(); ++i) {
        CHECK(std::abs(direct.rows[i].value - loaded.rows[i].value) < 1e-7);
    }
}

TEST_CASE("fit refuses an unfrozen user cache") {
    PlantedFixture fx;
    sem::EmbeddingCache unfrozen(sem::OwnerKind::user, 8);
    for (UserId u = 1; u <= fx.bundle.ds.num_users(); ++u)
        unfrozen.put(u, std::vector<float>(8, 0.5f));
    ContrastiveResources res = fx.res;
    res.user_sem = &unfrozen;
    TrainConfig cfg = small_config();
    CHECK_THROWS_WITH_AS(fit(cfg, fx.bundle.ds, &res), doctest::Contains("frozen"), Error);
}

TEST_CASE("semantic caches are never mutated by training") {
    PlantedFixture fx;
    std::string before_user = fx.bundle.user_sem.checksum();
    std::string before_item = fx.bundle.item_sem.checksum();
    TrainConfig cfg = small_config();
    fit(cfg, fx.bundle.ds, &fx.res);
    CHECK(fx.bundle.user_sem.checksum() == before_user);
    CHECK(fx.bundle.item_sem.checksum() == before_item);
}

TEST_CASE("users with empty pools are skipped, not fatal") {
    PlantedFixture fx;
    // keep pools for only one user: every batch has < 2 anchors
    retrieval::PoolMap sparse;
    sparse.emplace(1, fx.user_pools.at(1));
    ContrastiveResources res = fx.res;
    res.user_pools = &sparse;
    TrainConfig cfg = small_config();
    cfg.max_epochs = 2;
    FitResult out = fit(cfg, fx.bundle.ds, &res);
    CHECK(out.report.cs_batches_skipped > 0);
    for (const auto& e : out.report.epochs) CHECK(e.l_cs == 0.0);
}

TEST_CASE("augmentation dump lists substitutions from the item pools") {
    test_helpers::TempDir dir("augdump");
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    cfg.max_epochs = 1;
    cfg.dump_augmentations = (dir.path() / "aug.ndjson").string();
    fit(cfg, fx.bundle.ds, &fx.res);
    auto lines = read_lines(dir.path() / "aug.ndjson");
    REQUIRE(!lines.empty());
    for (const auto& line : lines) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        ItemId old_id = j.at("old").get<ItemId>();
        ItemId new_id = j.at("new").get<ItemId>();
        bool in_pool = false;
        for (const auto& nb : fx.item_pools.at(old_id).neighbors)
            if (nb.id == new_id) in_pool = true;
        CHECK(in_pool);
    }
}

TEST_CASE("no_semantic variant trains with model-derived pools") {
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    cfg.no_semantic = true;
    cfg.max_epochs = 2;
    FitResult out = fit(cfg, fx.bundle.ds, nullptr);
    REQUIRE(out.report.epochs.size() == 2);
    for (const auto& e : out.report.epochs) {
        CHECK(std::isfinite(e.total));
        CHECK(e.l_cs > 0.0);
        CHECK(e.l_is > 0.0);
    }
}

TEST_CASE("training loss decreases over the first epochs on planted data") {
    PlantedFixture fx(60, 24, 3, 9);
    TrainConfig cfg = small_config();
    cfg.max_epochs = 10;
    cfg.patience = 10;
    FitResult out = fit(cfg, fx.bundle.ds, &fx.res);
    REQUIRE(out.report.epochs.size() == 10);
    CHECK(out.report.epochs.back().total < out.report.epochs.front().total);
    CHECK(out.report.epochs.back().l_rec < out.report.epochs.front().l_rec);
}

TEST_CASE("ablation: single-variant run yields base plus variant rows") {
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    cfg.max_epochs = 2;
    AblationInputs inputs;
    inputs.ds = &fx.bundle.ds;
    inputs.resources = fx.res;
    inputs.sem_dim = 8;
    inputs.sem_seed = cfg.seed;
    auto rows = run_ablation(cfg, inputs, {"no_cs"});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].variant == "base");
    CHECK(rows[1].variant == "no_cs");
    std::string csv = ablation_csv(rows);
    CHECK(csv.find("base,") != std::string::npos);
    CHECK(ablation_markdown(rows).find("| no_cs |") != std::string::npos);
}

TEST_CASE("ablation: no_cl variant equals a direct alpha=beta=0 fit") {
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    cfg.max_epochs = 2;
    TrainConfig plain = apply_variant(cfg, "no_cl");
    CHECK(plain.effective_alpha() == 0.0);
    CHECK(plain.effective_beta() == 0.0);
    FitResult via_variant = fit(plain, fx.bundle.ds, &fx.res);
    TrainConfig zeroed = cfg;
    zeroed.alpha = 0.0;
    zeroed.beta = 0.0;
    FitResult direct = fit(zeroed, fx.bundle.ds, nullptr);
    for (size_t e = 0; e < via_variant.report.epochs.size(); ++e) {
        CHECK(via_variant.report.epochs[e].total == direct.report.epochs[e].total);
    }
}

TEST_CASE("ablation: no_llm rebuilds caches from raw text and trains") {
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    cfg.max_epochs = 1;
    AblationInputs inputs;
    inputs.ds = &fx.bundle.ds;
    inputs.resources = fx.res;
    inputs.sem_dim = 8;
    inputs.sem_seed = cfg.seed;
    auto rows = run_ablation(cfg, inputs, {"no_llm", "no_semantic"});
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
        CHECK(row.hr20 >= 0.0);
        CHECK(row.ndcg20 <= row.hr20);
    }
}

TEST_CASE("no_learnable keeps the synthesizer untouched; learnable trains it") {
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    cfg.max_epochs = 2;
    cfg.no_learnable = true;
    FitResult frozen = fit(cfg, fx.bundle.ds, &fx.res);
    cl::SynthesizerConfig sc;
    sc.d = cfg.d;
    sc.sem_dim = fx.bundle.user_sem.dim();
    auto init = cl::init_synthesizer<float>(sc, cfg.seed);
    CHECK(test_helpers::bits_equal(frozen.synth.w, init.w));
    CHECK(test_helpers::bits_equal(frozen.synth.a, init.a));

    cfg.no_learnable = false;
    FitResult learned = fit(cfg, fx.bundle.ds, &fx.res);
    CHECK_FALSE(test_helpers::bits_equal(learned.synth.w, init.w));
}

TEST_CASE("detach_candidates changes the training trajectory") {
    PlantedFixture fx;
    TrainConfig cfg = small_config();
    cfg.max_epochs = 2;
    FitResult flowing = fit(cfg, fx.bundle.ds, &fx.res);
    cfg.detach_candidates = true;
    FitResult detached = fit(cfg, fx.bundle.ds, &fx.res);
    CHECK_FALSE(
        test_helpers::bits_equal(flowing.params.item_emb, detached.params.item_emb));
    // the loss values at step one share the same forward, so epoch-1 CS
    // losses agree while the updates diverge afterwards
    CHECK(std::isfinite(detached.report.epochs.back().total));
}

TEST_CASE("total-loss gradient is the weighted sum of component gradients") {
    // frozen toy instance: build each loss on its own tape, combine the
    // analytic gradients with (1, alpha, beta), and compare against the
    // gradient of the composed objective
    model::BackboneConfig bc;
    bc.num_items = 8;
    bc.d = 4;
    bc.n = 6;
    bc.layers = 1;
    bc.heads = 2;
    bc.dropout = 0.0;
    auto params = model::init_params<double>(bc, 51);
    for (auto& [name, mat] : params.named()) {
        if (name.find("ln") == std::string::npos) *mat *= 10.0;
    }
    params.item_emb.row(0).setZero();
    cl::SynthesizerConfig sc{4, 6, 0.01};
    auto synth = cl::init_synthesizer<double>(sc, 52);
    synth.w *= 10.0;
    synth.a *= 10.0;

    std::vector<ItemId> flat{0, 0, 1, 5, 2, 7, 0, 3, 4, 4, 6, 8, 1, 2, 3, 4, 5, 6};
    std::vector<int> labels(flat.size(), -1);
    labels[4] = 6;
    labels[5] = 2;
    labels[9] = 3;
    labels[17] = 7;
    std::vector<ItemId> aug_a = flat, aug_b = flat;
    aug_a[4] = 6;
    aug_b[10] = 2;
    DetRng rng(53);
    nn::Mat<double> sems(3, 6);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 6; ++j) sems(i, j) = rng.gaussian();
    std::vector<std::vector<int>> pools{{1, 2}, {0, 2}, {0, 1}};
    const double alpha = 0.07, beta = 0.13;

    // which: 0 = rec, 1 = cs, 2 = is, 3 = composed total
    auto build = [&](int which, std::vector<nn::Mat<double>>* grads) {
        nn::Tape<double> tape;
        auto pn = model::make_param_nodes(tape, params);
        auto sn = cl::make_synth_nodes(tape, synth);
        auto sb = model::seq_batch_from_ids(flat, 3, bc.n);
        auto enc = model::encode(tape, pn, bc, flat, sb, true, nullptr);
        int l_rec = tape.softmax_xent(model::score_items(tape, pn, enc.states, 8), labels);
        int p = cl::synth_scores_node(tape, sn, tape.input(sems), tape.input(sems), pools,
                                      0.01);
        int h_plus = cl::synthesize_positive_node(tape, p, enc.last_h, pools);
        int l_cs = cl::inter_user_loss_node(tape, enc.last_h, h_plus, 1.0);
        auto sa = model::seq_batch_from_ids(aug_a, 3, bc.n);
        auto sbb = model::seq_batch_from_ids(aug_b, 3, bc.n);
        auto ea = model::encode(tape, pn, bc, aug_a, sa, true, nullptr);
        auto eb = model::encode(tape, pn, bc, aug_b, sbb, true, nullptr);
        int l_is = cl::intra_user_loss_node(tape, ea.last_h, eb.last_h, 1.0);
        int node = which == 0   ? l_rec
                   : which == 1 ? l_cs
                   : which == 2 ? l_is
                                : tape.add_scaled(tape.add_scaled(l_rec, l_cs, alpha), l_is,
                                                  beta);
        if (grads) {
            tape.backward(node);
            grads->clear();
            for (int id : pn.all()) grads->push_back(tape.grad_of(id));
            grads->push_back(tape.grad_of(sn.w));
            grads->push_back(tape.grad_of(sn.a));
        }
        return tape.scalar(node);
    };

    std::vector<nn::Mat<double>> g_rec, g_cs, g_is, g_total;
    double v_rec = build(0, &g_rec);
    double v_cs = build(1, &g_cs);
    double v_is = build(2, &g_is);
    double v_total = build(3, &g_total);
    CHECK(v_total ==
          doctest::Approx(total_loss(v_rec, v_cs, v_is, alpha, beta)).epsilon(1e-12));
    for (size_t p = 0; p < g_total.size(); ++p) {
        nn::Mat<double> combined = g_rec[p] + alpha * g_cs[p] + beta * g_is[p];
        double diff = (g_total[p] - combined).cwiseAbs().maxCoeff();
        CHECK(diff < 1e-12);
    }

    // and the composed gradient matches finite differences
    std::vector<std::pair<std::string, nn::Mat<double>*>> named;
    for (auto& [name, mat] : params.named()) named.emplace_back(name, mat);
    for (auto& [name, mat] : synth.named()) named.emplace_back(name, mat);
    auto value = [&]() { return build(3, nullptr); };
    auto result = test_helpers::finite_diff_check(named, g_total, value, 1e-5);
    INFO("worst: " << result.worst);
    CHECK(result.max_rel_err < 1e-4);
}

}  // TEST_SUITE
