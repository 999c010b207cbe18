#include "seqcl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "seqcl/adam.hpp"
#include "seqcl/augment.hpp"
#include "seqcl/checkpoint.hpp"
#include "seqcl/evaluator.hpp"
#include "seqcl/io_util.hpp"
#include "seqcl/log.hpp"
#include "seqcl/metrics.hpp"

namespace seqcl::train {

void TrainConfig::validate() const {
    require(d >= 1 && n >= 1 && layers >= 1 && heads >= 1, "train config: bad model shape");
    require(d % heads == 0, "train config: d must be divisible by heads");
    require(dropout >= 0.0 && dropout < 1.0, "train config: dropout must be in [0, 1)");
    require(alpha >= 0.0 && beta >= 0.0, "train config: alpha and beta must be >= 0");
    require(batch >= 1, "train config: batch must be >= 1");
    if (effective_alpha() > 0.0 || effective_beta() > 0.0) {
        require(batch >= 2, "train config: contrastive losses need batch >= 2");
    }
    require(substitution_ratio > 0.0 && substitution_ratio <= 1.0,
            "train config: substitution ratio must be in (0, 1]");
    require(k >= 1, "train config: k must be >= 1");
    require(max_epochs >= 1 && patience >= 1, "train config: bad epoch limits");
    require(cl_temperature > 0.0, "train config: cl_temperature must be > 0");
}

TrainConfig train_config_from_kv(const KvConfig& kv) {
    TrainConfig c;
    c.d = static_cast<int>(kv.get_i64("d", c.d));
    c.n = static_cast<int>(kv.get_i64("max_len", c.n));
    c.layers = static_cast<int>(kv.get_i64("layers", c.layers));
    c.heads = static_cast<int>(kv.get_i64("heads", c.heads));
    c.dropout = kv.get_f64("dropout", c.dropout);
    std::string targets = kv.get_str("targets", "per_position");
    if (targets == "per_position") {
        c.per_position_targets = true;
    } else if (targets == "final") {
        c.per_position_targets = false;
    } else {
        fail("train config: targets must be per_position|final, got ", targets);
    }
    c.batch = static_cast<int>(kv.get_i64("batch", c.batch));
    c.lr = kv.get_f64("lr", c.lr);
    c.grad_clip = kv.get_f64("grad_clip", c.grad_clip);
    c.max_epochs = static_cast<int>(kv.get_i64("max_epochs", c.max_epochs));
    c.patience = static_cast<int>(kv.get_i64("patience", c.patience));
    c.seed = static_cast<uint64_t>(kv.get_i64("seed", static_cast<int64_t>(c.seed)));
    c.alpha = kv.get_f64("alpha", c.alpha);
    c.beta = kv.get_f64("beta", c.beta);
    c.k = static_cast<int>(kv.get_i64("k", c.k));
    c.substitution_ratio = kv.get_f64("substitution_ratio", c.substitution_ratio);
    c.leaky_slope = kv.get_f64("leaky_slope", c.leaky_slope);
    c.cl_temperature = kv.get_f64("cl_temperature", c.cl_temperature);
    c.detach_candidates = kv.get_bool("detach_candidates", c.detach_candidates);
    c.no_cs = kv.get_bool("no_cs", c.no_cs);
    c.no_is = kv.get_bool("no_is", c.no_is);
    c.no_learnable = kv.get_bool("no_learnable", c.no_learnable);
    c.no_semantic = kv.get_bool("no_semantic", c.no_semantic);
    c.no_llm = kv.get_bool("no_llm", c.no_llm);
    c.dump_augmentations = kv.get_str("dump_augmentations", c.dump_augmentations);
    return c;
}

void train_config_to_kv(const TrainConfig& c, KvConfig& kv) {
    kv.set_i64("d", c.d);
    kv.set_i64("max_len", c.n);
    kv.set_i64("layers", c.layers);
    kv.set_i64("heads", c.heads);
    kv.set_f64("dropout", c.dropout);
    kv.set("targets", c.per_position_targets ? "per_position" : "final");
    kv.set_i64("batch", c.batch);
    kv.set_f64("lr", c.lr);
    kv.set_f64("grad_clip", c.grad_clip);
    kv.set_i64("max_epochs", c.max_epochs);
    kv.set_i64("patience", c.patience);
    kv.set_i64("seed", static_cast<int64_t>(c.seed));
    kv.set_f64("alpha", c.alpha);
    kv.set_f64("beta", c.beta);
    kv.set_i64("k", c.k);
    kv.set_f64("substitution_ratio", c.substitution_ratio);
    kv.set_f64("leaky_slope", c.leaky_slope);
    kv.set_f64("cl_temperature", c.cl_temperature);
    kv.set_i64("detach_candidates", c.detach_candidates ? 1 : 0);
    kv.set_i64("no_cs", c.no_cs ? 1 : 0);
    kv.set_i64("no_is", c.no_is ? 1 : 0);
    kv.set_i64("no_learnable", c.no_learnable ? 1 : 0);
    kv.set_i64("no_semantic", c.no_semantic ? 1 : 0);
    kv.set_i64("no_llm", c.no_llm ? 1 : 0);
    if (!c.dump_augmentations.empty()) kv.set("dump_augmentations", c.dump_augmentations);
}

double total_loss(double l_rec, double l_cs, double l_is, double alpha, double beta) {
    require(std::isfinite(l_rec) && std::isfinite(l_cs) && std::isfinite(l_is),
            "total_loss: non-finite component (l_rec=", l_rec, ", l_cs=", l_cs,
            ", l_is=", l_is, ")");
    return l_rec + alpha * l_cs + beta * l_is;
}

KvConfig checkpoint_config(const TrainConfig& cfg, int num_items, int sem_dim) {
    KvConfig kv;
    train_config_to_kv(cfg, kv);
    kv.set_i64("num_items", num_items);
    kv.set_i64("sem_dim", sem_dim);
    return kv;
}

std::string TrainReport::to_csv() const {
    std::string out = "epoch,l_rec,l_cs,l_is,total,val_hr20,val_ndcg20,wall_seconds\n";
    char buf[256];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.3f\n", e.epoch,
                      e.l_rec, e.l_cs, e.l_is, e.total, e.val_hr20, e.val_ndcg20,
                      e.wall_seconds);
        out += buf;
    }
    return out;
}

namespace {

struct UserRow {
    size_t split_index = 0;
    UserId user = 0;
    std::vector<ItemId> input_items;  // unpadded forward input
    data::TrainRow row;               // padded input + next-item labels
};

// eval-mode representations for a set of inputs, one row per input
nn::Mat<float> collect_reps(const model::ModelParams<float>& params,
                            const std::vector<std::vector<ItemId>>& inputs, int batch_size) {
    const model::BackboneConfig& bc = params.config;
    nn::Mat<float> reps(static_cast<Eigen::Index>(inputs.size()), bc.d);
    size_t pos = 0;
    while (pos < inputs.size()) {
        size_t count = std::min(static_cast<size_t>(batch_size), inputs.size() - pos);
        std::vector<ItemId> flat;
        flat.reserve(count * static_cast<size_t>(bc.n));
        for (size_t i = 0; i < count; ++i) {
            data::PaddedRow padded = data::truncate_pad(inputs[pos + i], bc.n);
            flat.insert(flat.end(), padded.ids.begin(), padded.ids.end());
        }
        nn::SeqBatch sb = model::seq_batch_from_ids(flat, static_cast<int>(count), bc.n);
        nn::Tape<float> tape;
        model::ParamNodes nodes = model::make_param_nodes(tape, params);
        model::EncodeResult enc = model::encode(tape, nodes, bc, flat, sb, false, nullptr);
        reps.middleRows(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(count)) =
            tape.value(enc.last_h);
        pos += count;
    }
    return reps;
}

retrieval::PoolMap pools_from_matrix(const nn::Mat<float>& vectors,
                                     const std::vector<int32_t>& ids, sem::OwnerKind kind,
                                     int k) {
    sem::EmbeddingCache cache(kind, static_cast<int>(vectors.cols()));
    std::vector<float> vec(static_cast<size_t>(vectors.cols()));
    for (size_t i = 0; i < ids.size(); ++i) {
        for (Eigen::Index j = 0; j < vectors.cols(); ++j)
            vec[static_cast<size_t>(j)] = vectors(static_cast<Eigen::Index>(i), j);
        cache.put(ids[i], vec);
    }
    cache.freeze(ids);
    retrieval::Index index(cache);
    return retrieval::materialize_pools(index, k);
}

}  // namespace

FitResult fit(const TrainConfig& cfg, const data::Dataset& ds,
              const ContrastiveResources* res, const std::filesystem::path& out_dir,
              const ValMetricHook& val_hook) {
    cfg.validate();
    require(ds.num_items() >= 1 && ds.num_users() >= 1, "fit: empty dataset");

    const double alpha = cfg.effective_alpha();
    const double beta = cfg.effective_beta();
    const bool use_cs = alpha > 0.0;
    const bool use_is = beta > 0.0;

    const sem::EmbeddingCache* user_sem = nullptr;
    const retrieval::PoolMap* static_user_pools = nullptr;
    const retrieval::PoolMap* static_item_pools = nullptr;
    if ((use_cs || use_is) && !cfg.no_semantic) {
        require(res != nullptr, "fit: contrastive losses need resources");
        if (use_cs) {
            user_sem = res->user_sem;
            static_user_pools = res->user_pools;
            require(user_sem != nullptr && static_user_pools != nullptr,
                    "fit: inter-user loss needs the user semantic cache and user pools");
            require(user_sem->frozen(),
                    "fit: user semantic cache must be frozen before training");
            require(static_cast<int>(user_sem->size()) == ds.num_users(),
                    "fit: user semantic cache covers ", user_sem->size(), " of ",
                    ds.num_users(), " users");
        }
        if (use_is) {
            static_item_pools = res->item_pools;
            require(static_item_pools != nullptr, "fit: intra-user loss needs item pools");
        }
    }

    model::BackboneConfig bc;
    bc.num_items = ds.num_items();
    bc.d = cfg.d;
    bc.n = cfg.n;
    bc.layers = cfg.layers;
    bc.heads = cfg.heads;
    bc.dropout = cfg.dropout;

    const int sem_dim = cfg.no_semantic ? cfg.d : (user_sem ? user_sem->dim() : cfg.d);
    cl::SynthesizerConfig sc;
    sc.d = cfg.d;
    sc.sem_dim = sem_dim;
    sc.leaky_slope = cfg.leaky_slope;

    model::ModelParams<float> params = model::init_params<float>(bc, cfg.seed);
    cl::SynthesizerParams<float> synth = cl::init_synthesizer<float>(sc, cfg.seed);

    // parameter registry; optimizer state is index-aligned with it
    std::vector<nn::Mat<float>*> param_ptrs;
    for (auto& [name, mat] : params.named()) param_ptrs.push_back(mat);
    for (auto& [name, mat] : synth.named()) param_ptrs.push_back(mat);
    Adam<float> adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    // per-user training rows
    std::vector<UserRow> rows;
    for (size_t s = 0; s < ds.splits.size(); ++s) {
        const auto& split = ds.splits[s];
        if (split.train.size() < 2) continue;
        UserRow ur;
        ur.split_index = s;
        ur.user = split.user;
        ur.input_items = data::train_input_items(split.train, cfg.n);
        ur.row = data::make_train_row(split.train, cfg.n, cfg.per_position_targets);
        rows.push_back(std::move(ur));
    }
    require(!rows.empty(), "fit: no trainable users (need train prefixes of length >= 2)");

    // validation pairs
    std::vector<std::vector<ItemId>> val_inputs;
    std::vector<ItemId> val_targets;
    for (const auto& split : ds.splits) {
        if (!split.has_eval) continue;
        val_inputs.push_back(split.train);
        val_targets.push_back(split.valid);
    }
    if (val_inputs.empty()) {
        log_warn("train", "no evaluable users; early stopping will see a flat metric");
    }

    std::ofstream aug_dump;
    if (!cfg.dump_augmentations.empty()) {
        std::filesystem::path p(cfg.dump_augmentations);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        aug_dump.open(p, std::ios::binary | std::ios::trunc);
        require(aug_dump.good(), "cannot open augmentation dump: ", cfg.dump_augmentations);
    }

    TrainReport report;
    model::ModelParams<float> best_params = params;
    cl::SynthesizerParams<float> best_synth = synth;
    double best_metric = -1.0;
    int best_epoch = 0;
    int epochs_since_best = 0;

    // epoch-rebuilt state for the no_semantic ablation
    retrieval::PoolMap dyn_user_pools, dyn_item_pools;
    std::vector<nn::Mat<float>> dyn_user_sem_rows;  // indexed by user id
    auto sem_vector_of = [&](UserId u) -> Eigen::RowVectorXf {
        if (cfg.no_semantic) {
            const nn::Mat<float>& row = dyn_user_sem_rows[static_cast<size_t>(u)];
            require(row.size() > 0, "fit: no collaborative vector for user ", u);
            return row.row(0);
        }
        const std::vector<float>& v = user_sem->get(u);
        Eigen::RowVectorXf out(static_cast<Eigen::Index>(v.size()));
        for (size_t j = 0; j < v.size(); ++j) out(static_cast<Eigen::Index>(j)) = v[j];
        return out;
    };

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        auto epoch_start = std::chrono::steady_clock::now();

        const retrieval::PoolMap* user_pools = static_user_pools;
        const retrieval::PoolMap* item_pools = static_item_pools;
        if (cfg.no_semantic && (use_cs || use_is)) {
            if (use_is) {
                nn::Mat<float> item_vecs = params.item_emb.middleRows(1, bc.num_items);
                std::vector<int32_t> item_ids(static_cast<size_t>(bc.num_items));
                for (int v = 0; v < bc.num_items; ++v) item_ids[static_cast<size_t>(v)] = v + 1;
                dyn_item_pools =
                    pools_from_matrix(item_vecs, item_ids, sem::OwnerKind::item, cfg.k);
                item_pools = &dyn_item_pools;
            }
            if (use_cs) {
                std::vector<std::vector<ItemId>> inputs;
                std::vector<int32_t> user_ids;
                for (const auto& ur : rows) {
                    inputs.push_back(ur.input_items);
                    user_ids.push_back(ur.user);
                }
                nn::Mat<float> reps = collect_reps(params, inputs, cfg.batch);
                dyn_user_pools = pools_from_matrix(reps, user_ids, sem::OwnerKind::user, cfg.k);
                user_pools = &dyn_user_pools;
                dyn_user_sem_rows.assign(static_cast<size_t>(ds.num_users()) + 1,
                                         nn::Mat<float>());
                for (size_t i = 0; i < user_ids.size(); ++i) {
                    dyn_user_sem_rows[static_cast<size_t>(user_ids[i])] =
                        reps.row(static_cast<Eigen::Index>(i));
                }
            }
        }

        std::vector<size_t> order(rows.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        DetRng shuffle_rng = make_stream(cfg.seed, "shuffle", {static_cast<uint64_t>(epoch)});
        shuffle_rng.shuffle(order);

        double sum_rec = 0.0, sum_cs = 0.0, sum_is = 0.0, sum_total = 0.0;
        int steps = 0;

        for (size_t batch_start = 0; batch_start < order.size();
             batch_start += static_cast<size_t>(cfg.batch)) {
            size_t batch_count =
                std::min(static_cast<size_t>(cfg.batch), order.size() - batch_start);
            std::vector<const UserRow*> batch;
            batch.reserve(batch_count);
            for (size_t i = 0; i < batch_count; ++i)
                batch.push_back(&rows[order[batch_start + i]]);
            int nb = static_cast<int>(batch.size());

            DetRng dropout_rng = make_stream(
                cfg.seed, "dropout", {static_cast<uint64_t>(epoch), batch_start});

            nn::Tape<float> tape;
            model::ParamNodes pn = model::make_param_nodes(tape, params);
            cl::SynthNodes sn = cl::make_synth_nodes(tape, synth);

            // main forward
            std::vector<ItemId> flat(static_cast<size_t>(nb) * static_cast<size_t>(cfg.n));
            std::vector<int> labels;
            for (int i = 0; i < nb; ++i) {
                const data::TrainRow& tr = batch[static_cast<size_t>(i)]->row;
                std::copy(tr.input.begin(), tr.input.end(),
                          flat.begin() + static_cast<ptrdiff_t>(i) * cfg.n);
            }
            nn::SeqBatch sb = model::seq_batch_from_ids(flat, nb, cfg.n);
            model::EncodeResult enc =
                model::encode(tape, pn, bc, flat, sb, true, &dropout_rng);

            int l_rec;
            if (cfg.per_position_targets) {
                labels.resize(flat.size());
                for (int i = 0; i < nb; ++i) {
                    const data::TrainRow& tr = batch[static_cast<size_t>(i)]->row;
                    for (int t = 0; t < cfg.n; ++t) {
                        ItemId lbl = tr.labels[static_cast<size_t>(t)];
                        labels[static_cast<size_t>(i) * cfg.n + static_cast<size_t>(t)] =
                            lbl == kPaddingId ? -1 : lbl - 1;
                    }
                }
                int logits = model::score_items(tape, pn, enc.states, bc.num_items);
                l_rec = tape.softmax_xent(logits, std::move(labels));
            } else {
                labels.resize(static_cast<size_t>(nb));
                for (int i = 0; i < nb; ++i) {
                    const data::TrainRow& tr = batch[static_cast<size_t>(i)]->row;
                    labels[static_cast<size_t>(i)] = tr.labels.back() - 1;
                }
                int logits = model::score_items(tape, pn, enc.last_h, bc.num_items);
                l_rec = tape.softmax_xent(logits, std::move(labels));
            }

            int total = l_rec;
            double step_cs = 0.0, step_is = 0.0;

            if (use_cs) {
                // anchors: batch members with a non-empty candidate pool
                std::vector<int> anchor_rows_in_batch;
                std::vector<const retrieval::CandidatePool*> anchor_pools;
                for (int i = 0; i < nb; ++i) {
                    auto it = user_pools->find(batch[static_cast<size_t>(i)]->user);
                    if (it == user_pools->end() || it->second.empty()) continue;
                    anchor_rows_in_batch.push_back(i);
                    anchor_pools.push_back(&it->second);
                }
                if (anchor_rows_in_batch.size() >= 2) {
                    // candidate rows: batch users reuse their main forward
                    // representation; off-batch candidates are encoded once
                    std::map<UserId, int> row_of_user;
                    for (int i = 0; i < nb; ++i)
                        row_of_user[batch[static_cast<size_t>(i)]->user] = i;
                    std::set<UserId> extra_set;
                    for (const auto* pool : anchor_pools) {
                        for (const auto& nbr : pool->neighbors) {
                            if (!row_of_user.count(nbr.id)) extra_set.insert(nbr.id);
                        }
                    }
                    std::vector<UserId> extras(extra_set.begin(), extra_set.end());
                    int h_all;
                    if (!extras.empty()) {
                        std::vector<ItemId> flat2(extras.size() * static_cast<size_t>(cfg.n));
                        for (size_t e = 0; e < extras.size(); ++e) {
                            const auto& split =
                                ds.splits[static_cast<size_t>(extras[e] - 1)];
                            std::vector<ItemId> in = data::train_input_items(split.train, cfg.n);
                            data::PaddedRow padded = data::truncate_pad(in, cfg.n);
                            std::copy(padded.ids.begin(), padded.ids.end(),
                                      flat2.begin() + static_cast<ptrdiff_t>(e) * cfg.n);
                        }
                        nn::SeqBatch sb2 = model::seq_batch_from_ids(
                            flat2, static_cast<int>(extras.size()), cfg.n);
                        model::EncodeResult enc2 =
                            model::encode(tape, pn, bc, flat2, sb2, true, &dropout_rng);
                        h_all = tape.vstack(enc.last_h, enc2.last_h);
                        for (size_t e = 0; e < extras.size(); ++e)
                            row_of_user[extras[e]] = nb + static_cast<int>(e);
                    } else {
                        h_all = enc.last_h;
                    }
                    int h_cand = cfg.detach_candidates ? tape.stop_grad(h_all) : h_all;

                    int n_anchor = static_cast<int>(anchor_rows_in_batch.size());
                    int n_cand = static_cast<int>(tape.value(h_all).rows());
                    std::vector<std::vector<int>> pool_rows(
                        static_cast<size_t>(n_anchor));
                    for (int a = 0; a < n_anchor; ++a) {
                        for (const auto& nbr :
                             anchor_pools[static_cast<size_t>(a)]->neighbors) {
                            pool_rows[static_cast<size_t>(a)].push_back(
                                row_of_user.at(nbr.id));
                        }
                    }

                    int probs;
                    if (cfg.no_learnable) {
                        size_t kmax = 0;
                        for (const auto& pr : pool_rows) kmax = std::max(kmax, pr.size());
                        nn::Mat<float> one_hot = nn::Mat<float>::Zero(
                            n_anchor, static_cast<Eigen::Index>(kmax));
                        for (int a = 0; a < n_anchor; ++a) {
                            UserId u =
                                batch[static_cast<size_t>(
                                          anchor_rows_in_batch[static_cast<size_t>(a)])]
                                    ->user;
                            DetRng draw = make_stream(
                                cfg.seed, "uniform_positive",
                                {static_cast<uint64_t>(u), static_cast<uint64_t>(epoch)});
                            size_t pick = static_cast<size_t>(draw.uniform_int(
                                pool_rows[static_cast<size_t>(a)].size()));
                            one_hot(a, static_cast<Eigen::Index>(pick)) = 1.0f;
                        }
                        probs = tape.input(std::move(one_hot));
                    } else {
                        nn::Mat<float> sem_anchor(n_anchor, sem_dim);
                        nn::Mat<float> sem_cand(n_cand, sem_dim);
                        for (int a = 0; a < n_anchor; ++a) {
                            UserId u =
                                batch[static_cast<size_t>(
                                          anchor_rows_in_batch[static_cast<size_t>(a)])]
                                    ->user;
                            sem_anchor.row(a) = sem_vector_of(u);
                        }
                        for (const auto& [u, row] : row_of_user)
                            sem_cand.row(row) = sem_vector_of(u);
                        probs = cl::synth_scores_node(
                            tape, sn, tape.input(std::move(sem_anchor)),
                            tape.input(std::move(sem_cand)), pool_rows,
                            static_cast<float>(cfg.leaky_slope));
                    }
                    int h_plus = cl::synthesize_positive_node(tape, probs, h_cand, pool_rows);
                    int h_anchor = tape.rows(enc.last_h, anchor_rows_in_batch);
                    int l_cs = cl::inter_user_loss_node(
                        tape, h_anchor, h_plus, static_cast<float>(cfg.cl_temperature));
                    step_cs = tape.scalar(l_cs);
                    total = tape.add_scaled(total, l_cs, static_cast<float>(alpha));
                } else {
                    ++report.cs_batches_skipped;
                }
            }

            if (use_is && nb >= 2) {
                std::vector<ItemId> flat_a(flat.size(), kPaddingId);
                std::vector<ItemId> flat_b(flat.size(), kPaddingId);
                for (int i = 0; i < nb; ++i) {
                    const UserRow& ur = *batch[static_cast<size_t>(i)];
                    DetRng aug_rng = make_stream(cfg.seed, "augment",
                                                 {static_cast<uint64_t>(ur.user),
                                                  static_cast<uint64_t>(epoch)});
                    cl::AugmentedPair pair =
                        cl::make_pair(ur.input_items, *item_pools, cfg.substitution_ratio,
                                      aug_rng);
                    if (pair.first.log.empty() && pair.second.log.empty())
                        ++report.degenerate_augments;
                    if (aug_dump.is_open()) {
                        for (int view = 0; view < 2; ++view) {
                            const auto& logs =
                                view == 0 ? pair.first.log : pair.second.log;
                            for (const auto& entry : logs) {
                                nlohmann::json j;
                                j["epoch"] = epoch;
                                j["user"] = ur.user;
                                j["view"] = view + 1;
                                j["position"] = entry.position;
                                j["old"] = entry.old_id;
                                j["new"] = entry.new_id;
                                aug_dump << j.dump() << "\n";
                            }
                        }
                    }
                    data::PaddedRow pa = data::truncate_pad(pair.first.items, cfg.n);
                    data::PaddedRow pb = data::truncate_pad(pair.second.items, cfg.n);
                    std::copy(pa.ids.begin(), pa.ids.end(),
                              flat_a.begin() + static_cast<ptrdiff_t>(i) * cfg.n);
                    std::copy(pb.ids.begin(), pb.ids.end(),
                              flat_b.begin() + static_cast<ptrdiff_t>(i) * cfg.n);
                }
                model::EncodeResult enc_a =
                    model::encode(tape, pn, bc, flat_a, sb, true, &dropout_rng);
                model::EncodeResult enc_b =
                    model::encode(tape, pn, bc, flat_b, sb, true, &dropout_rng);
                int l_is = cl::intra_user_loss_node(
                    tape, enc_a.last_h, enc_b.last_h,
                    static_cast<float>(cfg.cl_temperature));
                step_is = tape.scalar(l_is);
                total = tape.add_scaled(total, l_is, static_cast<float>(beta));
            }

            double step_rec = tape.scalar(l_rec);
            double step_total = tape.scalar(total);
            if (!std::isfinite(step_total)) {
                if (!out_dir.empty()) {
                    std::filesystem::create_directories(out_dir);
                    model::NamedTensorsConst tensors;
                    for (auto& [name, mat] : best_params.named())
                        tensors.emplace_back(name, mat);
                    for (auto& [name, mat] : best_synth.named())
                        tensors.emplace_back(name, mat);
                    model::save_checkpoint(out_dir / "last_good.ckpt", tensors,
                                           checkpoint_config(cfg, bc.num_items, sem_dim).echo());
                }
                fail("training diverged at epoch ", epoch, " (loss=", step_total,
                     "); last good parameters saved",
                     out_dir.empty() ? "" : (" to " + (out_dir / "last_good.ckpt").string()));
            }

            tape.backward(total);
            std::vector<nn::Mat<float>> grads;
            grads.reserve(param_ptrs.size());
            for (int id : pn.all()) grads.push_back(tape.grad_of(id));
            grads.push_back(tape.grad_of(sn.w));
            grads.push_back(tape.grad_of(sn.a));
            require(grads.size() == param_ptrs.size(), "fit: gradient registry mismatch");
            adam.step(param_ptrs, grads, cfg.grad_clip);

            sum_rec += step_rec;
            sum_cs += step_cs;
            sum_is += step_is;
            sum_total += step_total;
            ++steps;
        }

        // full-catalog validation
        double hr20 = 0.0, ndcg20 = 0.0;
        if (!val_inputs.empty()) {
            std::vector<int> ranks =
                eval::rank_targets(params, val_inputs, val_targets, cfg.batch);
            hr20 = eval::hr_at_k(ranks, 20);
            ndcg20 = eval::ndcg_at_k(ranks, 20);
        }
        double metric = val_hook ? val_hook(epoch, ndcg20) : ndcg20;

        EpochStats stats;
        stats.epoch = epoch;
        stats.l_rec = steps > 0 ? sum_rec / steps : 0.0;
        stats.l_cs = steps > 0 ? sum_cs / steps : 0.0;
        stats.l_is = steps > 0 ? sum_is / steps : 0.0;
        stats.total = steps > 0 ? sum_total / steps : 0.0;
        stats.val_hr20 = hr20;
        stats.val_ndcg20 = ndcg20;
        stats.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
                .count();
        report.epochs.push_back(stats);
        log_json("train", "epoch",
                 {{"epoch", epoch},
                  {"l_rec", stats.l_rec},
                  {"l_cs", stats.l_cs},
                  {"l_is", stats.l_is},
                  {"val_ndcg20", ndcg20}});

        if (metric > best_metric) {
            best_metric = metric;
            best_epoch = epoch;
            best_params = params;
            best_synth = synth;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= cfg.patience) break;
        }
    }

    FitResult result;
    result.params = std::move(best_params);
    result.synth = std::move(best_synth);
    result.report = std::move(report);
    result.report.best_epoch = best_epoch;
    result.report.best_val_ndcg20 = best_metric < 0.0 ? 0.0 : best_metric;

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::string echo = checkpoint_config(cfg, bc.num_items, sem_dim).echo();
        model::NamedTensorsConst tensors;
        for (auto& [name, mat] : result.params.named()) tensors.emplace_back(name, mat);
        for (auto& [name, mat] : result.synth.named()) tensors.emplace_back(name, mat);
        std::filesystem::path ckpt = out_dir / "best.ckpt";
        model::save_checkpoint(ckpt, tensors, echo);
        result.report.checkpoint_path = ckpt.string();
        write_file(out_dir / "report.csv", result.report.to_csv());
        write_file(out_dir / "config.echo", echo);
        write_provenance(out_dir / "report.csv", echo);
        write_provenance(ckpt, echo);
    }
    return result;
}

}  // namespace seqcl::train
