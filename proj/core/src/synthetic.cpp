#include "seqcl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Dense>
#include <json.hpp>

#include "seqcl/io_util.hpp"
#include "seqcl/rng.hpp"

namespace seqcl::synth {

namespace {

std::string key_of(const char* prefix, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%04d", prefix, index);
    return buf;
}

// One cycle over [0, n): item i is followed by succ[i], no fixed points.
std::vector<int> successor_cycle(int n, DetRng& rng) {
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    rng.shuffle(order);
    std::vector<int> succ(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        succ[static_cast<size_t>(order[static_cast<size_t>(i)])] =
            order[static_cast<size_t>((i + 1) % n)];
    }
    return succ;
}

struct WalkSpec {
    int users, items, clusters, min_len, max_len;
    double follow_successor, stay_personal, stay_in_cluster;
    int personal_items;
    uint64_t seed;
};

// Cluster-structured interaction walks. Returns per-user item index lists
// (0-based raw indices) plus the cluster assignment per item and user.
struct Walks {
    std::vector<std::vector<int>> user_items;
    std::vector<int> item_cluster;  // 0-based item index -> cluster
    std::vector<int> user_cluster;
};

Walks generate_walks(const WalkSpec& ws) {
    Walks walks;
    walks.item_cluster.resize(static_cast<size_t>(ws.items));
    std::vector<std::vector<int>> cluster_items(static_cast<size_t>(ws.clusters));
    for (int i = 0; i < ws.items; ++i) {
        int c = i % ws.clusters;
        walks.item_cluster[static_cast<size_t>(i)] = c;
        cluster_items[static_cast<size_t>(c)].push_back(i);
    }
    // a planted next-item structure per cluster gives the backbone a
    // learnable sequential signal
    std::vector<std::vector<int>> succ_within(static_cast<size_t>(ws.clusters));
    for (int c = 0; c < ws.clusters; ++c) {
        DetRng rng = make_stream(ws.seed, "succ", {static_cast<uint64_t>(c)});
        const auto& members = cluster_items[static_cast<size_t>(c)];
        std::vector<int> cyc = successor_cycle(static_cast<int>(members.size()), rng);
        auto& succ = succ_within[static_cast<size_t>(c)];
        succ.resize(members.size());
        for (size_t i = 0; i < members.size(); ++i) succ[i] = members[static_cast<size_t>(cyc[i])];
    }
    auto index_in_cluster = [&](int item) {
        const auto& members = cluster_items[static_cast<size_t>(
            walks.item_cluster[static_cast<size_t>(item)])];
        return static_cast<size_t>(
            std::find(members.begin(), members.end(), item) - members.begin());
    };

    walks.user_items.resize(static_cast<size_t>(ws.users));
    walks.user_cluster.resize(static_cast<size_t>(ws.users));
    for (int u = 0; u < ws.users; ++u) {
        int c = u % ws.clusters;
        walks.user_cluster[static_cast<size_t>(u)] = c;
        DetRng rng = make_stream(ws.seed, "walk", {static_cast<uint64_t>(u)});
        const auto& own = cluster_items[static_cast<size_t>(c)];
        // the user's personal slice of the cluster
        std::vector<int> personal = own;
        if (ws.personal_items > 0 &&
            ws.personal_items < static_cast<int>(own.size())) {
            rng.shuffle(personal);
            personal.resize(static_cast<size_t>(ws.personal_items));
        }
        int len = ws.min_len + static_cast<int>(rng.uniform_int(
                                   static_cast<uint64_t>(ws.max_len - ws.min_len + 1)));
        std::vector<int>& seq = walks.user_items[static_cast<size_t>(u)];
        int cur = personal[rng.uniform_int(personal.size())];
        seq.push_back(cur);
        for (int t = 1; t < len; ++t) {
            double roll = rng.uniform();
            if (roll < ws.follow_successor &&
                walks.item_cluster[static_cast<size_t>(cur)] == c) {
                cur = succ_within[static_cast<size_t>(c)][index_in_cluster(cur)];
            } else if (roll < ws.follow_successor + ws.stay_personal) {
                cur = personal[rng.uniform_int(personal.size())];
            } else if (roll < ws.follow_successor + ws.stay_personal + ws.stay_in_cluster) {
                cur = own[rng.uniform_int(own.size())];
            } else {
                cur = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(ws.items)));
            }
            seq.push_back(cur);
        }
    }
    return walks;
}

data::CatalogEntry catalog_entry(int item_index, int cluster) {
    data::CatalogEntry e;
    e.title = "Signal Box " + std::to_string(item_index);
    e.category = "series-" + std::to_string(cluster);
    e.brand = "atelier-" + std::to_string(cluster % 2);
    e.description = "A series-" + std::to_string(cluster) +
                    " piece, typically picked up together with its neighbours in the set.";
    return e;
}

}  // namespace

void write_toy_files(const ToySpec& spec, const std::filesystem::path& dir) {
    WalkSpec ws{spec.users,   spec.items,   spec.clusters,
                spec.min_len, spec.max_len, spec.follow_successor,
                0.0,          spec.stay_in_cluster, 0, spec.seed};
    Walks walks = generate_walks(ws);

    std::string tsv;
    for (int u = 0; u < spec.users; ++u) {
        const auto& seq = walks.user_items[static_cast<size_t>(u)];
        for (size_t t = 0; t < seq.size(); ++t) {
            tsv += key_of("u", u);
            tsv += '\t';
            tsv += key_of("i", seq[t]);
            tsv += '\t';
            tsv += std::to_string(1000000 + t);
            tsv += '\n';
        }
    }
    write_file(dir / "interactions.tsv", tsv);

    std::string cat;
    for (int i = 0; i < spec.items; ++i) {
        data::CatalogEntry e = catalog_entry(i, walks.item_cluster[static_cast<size_t>(i)]);
        nlohmann::json j;
        j["item"] = key_of("i", i);
        j["title"] = e.title;
        j["category"] = e.category;
        j["brand"] = e.brand;
        j["description"] = e.description;
        cat += j.dump();
        cat += '\n';
    }
    write_file(dir / "catalog.jsonl", cat);
}

data::Dataset make_overfit_dataset(const OverfitSpec& spec) {
    DetRng rng = make_stream(spec.seed, "overfit");
    std::vector<int> succ = successor_cycle(spec.items, rng);

    std::vector<data::InteractionRecord> records;
    for (int u = 0; u < spec.users; ++u) {
        int cur = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(spec.items)));
        for (int t = 0; t < spec.len; ++t) {
            records.push_back({key_of("u", u), key_of("i", cur), t});
            cur = succ[static_cast<size_t>(cur)];
        }
    }
    data::SequenceData sd = data::build_sequences(records);
    data::ItemCatalog cat;
    cat.entries.resize(static_cast<size_t>(sd.vocab.num_items()) + 1);
    for (ItemId v = 1; v <= sd.vocab.num_items(); ++v)
        cat.entries[static_cast<size_t>(v)].title = sd.vocab.item_keys[static_cast<size_t>(v)];
    return data::make_dataset(std::move(sd), std::move(cat));
}

PlantedBundle make_planted(const PlantedSpec& spec) {
    require(spec.personal_items >= 1, "make_planted: personal_items must be >= 1");
    // 1) item clusters, planted successor cycles, and item semantic vectors
    //    (cluster centroid + the item's own noise, unit-normalized)
    std::vector<int> item_cluster_raw(static_cast<size_t>(spec.items));
    std::vector<std::vector<int>> cluster_items(static_cast<size_t>(spec.clusters));
    for (int i = 0; i < spec.items; ++i) {
        int c = i % spec.clusters;
        item_cluster_raw[static_cast<size_t>(i)] = c;
        cluster_items[static_cast<size_t>(c)].push_back(i);
    }
    auto centroid = [&](int c) {
        DetRng rng = make_stream(spec.seed, "centroid", {static_cast<uint64_t>(c)});
        Eigen::VectorXd v(spec.sem_dim);
        for (int j = 0; j < spec.sem_dim; ++j) v(j) = rng.gaussian();
        return Eigen::VectorXd(v / v.norm());
    };
    std::vector<Eigen::VectorXd> centroids;
    for (int c = 0; c < spec.clusters; ++c) centroids.push_back(centroid(c));
    std::vector<Eigen::VectorXd> item_vec_raw(static_cast<size_t>(spec.items));
    for (int i = 0; i < spec.items; ++i) {
        DetRng rng = make_stream(spec.seed, "item_sem", {static_cast<uint64_t>(i)});
        Eigen::VectorXd v = centroids[static_cast<size_t>(item_cluster_raw[static_cast<size_t>(i)])];
        for (int j = 0; j < spec.sem_dim; ++j) v(j) += spec.sem_noise * rng.gaussian();
        item_vec_raw[static_cast<size_t>(i)] = v / v.norm();
    }

    std::vector<int> succ(static_cast<size_t>(spec.items));
    for (int c = 0; c < spec.clusters; ++c) {
        DetRng rng = make_stream(spec.seed, "succ", {static_cast<uint64_t>(c)});
        const auto& members = cluster_items[static_cast<size_t>(c)];
        std::vector<int> cyc = successor_cycle(static_cast<int>(members.size()), rng);
        for (size_t i = 0; i < members.size(); ++i)
            succ[static_cast<size_t>(members[i])] = members[static_cast<size_t>(cyc[i])];
    }

    // 2) each user gets a taste point near their cluster centroid; their
    //    personal pool is the semantically nearest slice of the catalog, so
    //    the semantic space genuinely predicts preferences
    std::vector<int> user_cluster_raw(static_cast<size_t>(spec.users));
    std::vector<data::InteractionRecord> records;
    for (int u = 0; u < spec.users; ++u) {
        int c = u % spec.clusters;
        user_cluster_raw[static_cast<size_t>(u)] = c;
        DetRng rng = make_stream(spec.seed, "walk", {static_cast<uint64_t>(u)});
        const auto& own = cluster_items[static_cast<size_t>(c)];
        std::vector<int> personal = own;
        if (spec.personal_items > 0 && spec.personal_items < static_cast<int>(own.size())) {
            rng.shuffle(personal);
            personal.resize(static_cast<size_t>(spec.personal_items));
        }
        int len = spec.min_len + static_cast<int>(rng.uniform_int(
                                     static_cast<uint64_t>(spec.max_len - spec.min_len + 1)));
        int cur = personal[rng.uniform_int(personal.size())];
        for (int t = 0; t < len; ++t) {
            records.push_back({key_of("u", u), key_of("i", cur), t});
            double roll = rng.uniform();
            if (roll < spec.follow_successor) {
                cur = succ[static_cast<size_t>(cur)];
            } else if (roll < spec.follow_successor + spec.stay_personal) {
                cur = personal[rng.uniform_int(personal.size())];
            } else if (roll < spec.follow_successor + spec.stay_personal + spec.stay_in_cluster) {
                cur = own[rng.uniform_int(own.size())];
            } else {
                cur = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(spec.items)));
            }
        }
    }

    // 3) the standard preparation path
    records = data::five_core_filter(records, 5);
    data::SequenceData sd = data::build_sequences(records);
    std::unordered_map<std::string, data::CatalogEntry> raw_catalog;
    for (int i = 0; i < spec.items; ++i)
        raw_catalog[key_of("i", i)] = catalog_entry(i, item_cluster_raw[static_cast<size_t>(i)]);
    data::ItemCatalog catalog = data::normalize_catalog(raw_catalog, sd.vocab);

    PlantedBundle bundle{data::make_dataset(std::move(sd), std::move(catalog)),
                         sem::EmbeddingCache(sem::OwnerKind::user, spec.sem_dim),
                         sem::EmbeddingCache(sem::OwnerKind::item, spec.sem_dim),
                         {},
                         {}};
    const data::Vocab& vocab = bundle.ds.vocab;
    bundle.user_cluster.assign(static_cast<size_t>(vocab.num_users()) + 1, -1);
    bundle.item_cluster.assign(static_cast<size_t>(vocab.num_items()) + 1, -1);

    // 4) caches keyed by dense ids; user vectors summarize train-prefix items
    std::vector<int32_t> user_ids, item_ids;
    std::vector<Eigen::VectorXd> item_vecs(static_cast<size_t>(vocab.num_items()) + 1);
    for (ItemId v = 1; v <= vocab.num_items(); ++v) {
        int raw = std::stoi(vocab.item_keys[static_cast<size_t>(v)].substr(1));
        bundle.item_cluster[static_cast<size_t>(v)] = item_cluster_raw[static_cast<size_t>(raw)];
        item_vecs[static_cast<size_t>(v)] = item_vec_raw[static_cast<size_t>(raw)];
        std::vector<float> out(static_cast<size_t>(spec.sem_dim));
        for (int j = 0; j < spec.sem_dim; ++j)
            out[static_cast<size_t>(j)] = static_cast<float>(item_vec_raw[static_cast<size_t>(raw)](j));
        bundle.item_sem.put(v, out);
        item_ids.push_back(v);
    }
    for (UserId u = 1; u <= vocab.num_users(); ++u) {
        int raw = std::stoi(vocab.user_keys[static_cast<size_t>(u)].substr(1));
        bundle.user_cluster[static_cast<size_t>(u)] = user_cluster_raw[static_cast<size_t>(raw)];
        const auto& split = bundle.ds.splits[static_cast<size_t>(u - 1)];
        Eigen::VectorXd vec = Eigen::VectorXd::Zero(spec.sem_dim);
        for (ItemId v : split.train) vec += item_vecs[static_cast<size_t>(v)];
        DetRng rng = make_stream(spec.seed, "user_sem", {static_cast<uint64_t>(raw)});
        for (int j = 0; j < spec.sem_dim; ++j) vec(j) += 0.1 * rng.gaussian();
        vec /= vec.norm();
        std::vector<float> out(static_cast<size_t>(spec.sem_dim));
        for (int j = 0; j < spec.sem_dim; ++j) out[static_cast<size_t>(j)] = static_cast<float>(vec(j));
        bundle.user_sem.put(u, out);
        user_ids.push_back(u);
    }
    bundle.user_sem.freeze(user_ids);
    bundle.item_sem.freeze(item_ids);
    return bundle;
}

}  // namespace seqcl::synth
