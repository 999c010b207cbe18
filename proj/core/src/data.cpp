#include "seqcl/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "seqcl/io_util.hpp"
#include "seqcl/log.hpp"

namespace seqcl::data {

using nlohmann::json;

std::vector<InteractionRecord> load_interactions(const std::filesystem::path& path,
                                                 LoadReport* report) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "interactions file unreadable: ", path.string());

    std::vector<InteractionRecord> records;
    LoadReport local;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++local.total_lines;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        bool ok = t1 != std::string::npos && t2 != std::string::npos && t1 > 0 && t2 > t1 + 1;
        int64_t ts = 0;
        if (ok) {
            std::string ts_str = line.substr(t2 + 1);
            try {
                size_t pos = 0;
                ts = std::stoll(ts_str, &pos);
                ok = pos == ts_str.size() && !ts_str.empty();
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok) {
            ++local.malformed;
            if (local.malformed_line_numbers.size() < 50)
                local.malformed_line_numbers.push_back(lineno);
            continue;
        }
        records.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), ts});
    }

    if (local.total_lines == 0) {
        log_warn("preprocess", "interactions file is empty: " + path.string());
    }
    if (local.malformed > 0) {
        if (local.total_lines > 0 &&
            static_cast<double>(local.malformed) > 0.01 * static_cast<double>(local.total_lines)) {
            std::string lines_str;
            for (size_t ln : local.malformed_line_numbers) {
                if (!lines_str.empty()) lines_str += ",";
                lines_str += std::to_string(ln);
            }
            fail("interactions file ", path.string(), ": ", local.malformed, " of ",
                 local.total_lines, " lines malformed (>1%); first line numbers: ", lines_str);
        }
        log_warn("preprocess", "skipped malformed interaction lines",
                 {{"count", local.malformed}});
    }
    if (report) *report = local;
    return records;
}

std::vector<InteractionRecord> five_core_filter(std::vector<InteractionRecord> records,
                                                int min_core) {
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::string, int> user_count, item_count;
        for (const auto& r : records) {
            ++user_count[r.user_key];
            ++item_count[r.item_key];
        }
        std::vector<InteractionRecord> kept;
        kept.reserve(records.size());
        for (auto& r : records) {
            if (user_count[r.user_key] >= min_core && item_count[r.item_key] >= min_core) {
                kept.push_back(std::move(r));
            } else {
                changed = true;
            }
        }
        records = std::move(kept);
    }
    return records;
}

SequenceData build_sequences(const std::vector<InteractionRecord>& records) {
    SequenceData out;
    std::set<std::string> user_set, item_set;
    for (const auto& r : records) {
        user_set.insert(r.user_key);
        item_set.insert(r.item_key);
    }

    out.vocab.user_keys.push_back("");  // padding sentinel
    out.vocab.item_keys.push_back("");
    for (const auto& k : user_set) {
        out.vocab.user_id_of[k] = static_cast<UserId>(out.vocab.user_keys.size());
        out.vocab.user_keys.push_back(k);
    }
    for (const auto& k : item_set) {
        out.vocab.item_id_of[k] = static_cast<ItemId>(out.vocab.item_keys.size());
        out.vocab.item_keys.push_back(k);
    }

    // (user, timestamp, file order) stable ordering
    struct Indexed {
        UserId user;
        int64_t ts;
        size_t order;
        ItemId item;
    };
    std::vector<Indexed> idx;
    idx.reserve(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        idx.push_back({out.vocab.user_id_of.at(records[i].user_key), records[i].timestamp, i,
                       out.vocab.item_id_of.at(records[i].item_key)});
    }
    std::sort(idx.begin(), idx.end(), [](const Indexed& a, const Indexed& b) {
        if (a.user != b.user) return a.user < b.user;
        if (a.ts != b.ts) return a.ts < b.ts;
        return a.order < b.order;
    });

    out.sequences.resize(static_cast<size_t>(out.vocab.num_users()));
    for (int u = 1; u <= out.vocab.num_users(); ++u) {
        out.sequences[static_cast<size_t>(u - 1)].user_id = u;
    }
    for (const auto& e : idx) {
        out.sequences[static_cast<size_t>(e.user - 1)].items.push_back(e.item);
    }
    return out;
}

std::unordered_map<std::string, CatalogEntry> load_catalog(const std::filesystem::path& path) {
    std::unordered_map<std::string, CatalogEntry> out;
    for (const std::string& line : read_lines(path)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail("catalog line not valid JSON: ", e.what());
        }
        require(j.contains("item"), "catalog entry missing 'item' key: ", line);
        CatalogEntry e;
        e.title = j.value("title", "");
        e.category = j.value("category", "");
        e.brand = j.value("brand", "");
        e.description = j.value("description", "");
        out[j.at("item").get<std::string>()] = std::move(e);
    }
    return out;
}

ItemCatalog normalize_catalog(const std::unordered_map<std::string, CatalogEntry>& raw,
                              const Vocab& vocab) {
    ItemCatalog cat;
    cat.entries.resize(static_cast<size_t>(vocab.num_items()) + 1);
    for (ItemId v = 1; v <= vocab.num_items(); ++v) {
        auto it = raw.find(vocab.item_keys[static_cast<size_t>(v)]);
        if (it == raw.end()) {
            ++cat.missing;
        } else {
            cat.entries[static_cast<size_t>(v)] = it->second;
        }
    }
    if (cat.missing > 0) {
        log_warn("preprocess", "items without catalog entries", {{"count", cat.missing}});
    }
    return cat;
}

LeaveOneOut leave_one_out(const InteractionSequence& seq) {
    LeaveOneOut out;
    if (seq.length() < 3) {
        out.train = seq.items;
        return out;
    }
    out.train.assign(seq.items.begin(), seq.items.end() - 2);
    out.valid = seq.items[seq.items.size() - 2];
    out.test = seq.items.back();
    out.has_eval = true;
    return out;
}

PaddedRow truncate_pad(const std::vector<ItemId>& items, int n) {
    require(n >= 1, "truncate_pad: n must be >= 1");
    PaddedRow row;
    row.ids.assign(static_cast<size_t>(n), kPaddingId);
    row.mask.assign(static_cast<size_t>(n), 0);
    size_t keep = std::min(items.size(), static_cast<size_t>(n));
    size_t src = items.size() - keep;   // most recent `keep` items
    size_t dst = static_cast<size_t>(n) - keep;
    for (size_t i = 0; i < keep; ++i) {
        row.ids[dst + i] = items[src + i];
        row.mask[dst + i] = 1;
    }
    return row;
}

PaddedBatch make_eval_batch(const std::vector<std::vector<ItemId>>& inputs,
                            const std::vector<ItemId>& targets, int n) {
    require(inputs.size() == targets.size(), "make_eval_batch: inputs/targets size mismatch");
    PaddedBatch batch;
    batch.n = n;
    batch.size = static_cast<int>(inputs.size());
    batch.item_ids.reserve(inputs.size() * static_cast<size_t>(n));
    batch.attn_mask.reserve(inputs.size() * static_cast<size_t>(n));
    for (size_t i = 0; i < inputs.size(); ++i) {
        require(targets[i] != kPaddingId, "make_eval_batch: target must not be padding");
        PaddedRow row = truncate_pad(inputs[i], n);
        batch.item_ids.insert(batch.item_ids.end(), row.ids.begin(), row.ids.end());
        batch.attn_mask.insert(batch.attn_mask.end(), row.mask.begin(), row.mask.end());
    }
    batch.targets = targets;
    return batch;
}

TrainRow make_train_row(const std::vector<ItemId>& train_items, int n, bool per_position) {
    require(train_items.size() >= 2, "make_train_row: need at least 2 items");
    size_t window = std::min(train_items.size(), static_cast<size_t>(n) + 1);
    size_t start = train_items.size() - window;

    TrainRow row;
    row.input.assign(static_cast<size_t>(n), kPaddingId);
    row.labels.assign(static_cast<size_t>(n), kPaddingId);
    size_t len = window - 1;  // input positions
    size_t dst = static_cast<size_t>(n) - len;
    for (size_t i = 0; i < len; ++i) {
        row.input[dst + i] = train_items[start + i];
        row.labels[dst + i] = train_items[start + i + 1];
    }
    if (!per_position) {
        for (size_t i = 0; i + 1 < len; ++i) row.labels[dst + i] = kPaddingId;
    }
    return row;
}

std::vector<ItemId> train_input_items(const std::vector<ItemId>& train_items, int n) {
    require(!train_items.empty(), "train_input_items: empty training sequence");
    if (train_items.size() == 1) return train_items;
    size_t window = std::min(train_items.size(), static_cast<size_t>(n) + 1);
    size_t start = train_items.size() - window;
    return std::vector<ItemId>(train_items.begin() + static_cast<ptrdiff_t>(start),
                               train_items.end() - 1);
}

Dataset make_dataset(SequenceData seq_data, ItemCatalog catalog) {
    Dataset ds;
    ds.vocab = std::move(seq_data.vocab);
    ds.catalog = std::move(catalog);
    ds.sequences = std::move(seq_data.sequences);
    ds.splits.reserve(ds.sequences.size());
    for (const auto& seq : ds.sequences) {
        LeaveOneOut loo = leave_one_out(seq);
        if (!loo.has_eval) ++ds.excluded_from_eval;
        ds.splits.push_back({seq.user_id, std::move(loo.train), loo.valid, loo.test,
                             loo.has_eval, seq.length()});
    }
    if (ds.excluded_from_eval > 0) {
        log_warn("preprocess", "users shorter than 3 excluded from validation/test",
                 {{"count", ds.excluded_from_eval}});
    }
    return ds;
}

PreprocessStats write_prepared(const Dataset& ds, const LoadReport& load_report,
                               size_t raw_records, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    std::string seq_lines;
    size_t total_items = 0;
    for (const auto& seq : ds.sequences) {
        json j;
        j["user"] = seq.user_id;
        j["key"] = ds.vocab.user_keys[static_cast<size_t>(seq.user_id)];
        j["items"] = seq.items;
        seq_lines += j.dump();
        seq_lines += '\n';
        total_items += seq.items.size();
    }
    write_file(out_dir / "sequences.jsonl", seq_lines);

    json vocab_json;
    for (int u = 1; u <= ds.vocab.num_users(); ++u)
        vocab_json["users"][ds.vocab.user_keys[static_cast<size_t>(u)]] = u;
    for (int v = 1; v <= ds.vocab.num_items(); ++v)
        vocab_json["items"][ds.vocab.item_keys[static_cast<size_t>(v)]] = v;
    write_file(out_dir / "vocab.json", vocab_json.dump(2) + "\n");

    std::string cat_lines;
    for (ItemId v = 1; v <= ds.vocab.num_items(); ++v) {
        const CatalogEntry& e = ds.catalog.of(v);
        json j;
        j["item"] = v;
        j["key"] = ds.vocab.item_keys[static_cast<size_t>(v)];
        j["title"] = e.title;
        j["category"] = e.category;
        j["brand"] = e.brand;
        j["description"] = e.description;
        cat_lines += j.dump();
        cat_lines += '\n';
    }
    write_file(out_dir / "catalog.norm.jsonl", cat_lines);

    PreprocessStats stats;
    stats.raw_records = raw_records;
    stats.malformed_lines = load_report.malformed;
    stats.filtered_records = total_items;
    stats.users = ds.num_users();
    stats.items = ds.num_items();
    stats.excluded_from_eval = ds.excluded_from_eval;
    stats.avg_length = ds.num_users() > 0
                           ? static_cast<double>(total_items) / ds.num_users()
                           : 0.0;
    stats.density = (ds.num_users() > 0 && ds.num_items() > 0)
                        ? static_cast<double>(total_items) /
                              (static_cast<double>(ds.num_users()) * ds.num_items())
                        : 0.0;

    json sj;
    sj["raw_records"] = stats.raw_records;
    sj["malformed_lines"] = stats.malformed_lines;
    sj["filtered_records"] = stats.filtered_records;
    sj["users"] = stats.users;
    sj["items"] = stats.items;
    sj["excluded_from_eval"] = stats.excluded_from_eval;
    sj["avg_length"] = stats.avg_length;
    sj["density"] = stats.density;
    write_file(out_dir / "stats.json", sj.dump(2) + "\n");
    return stats;
}

Dataset load_prepared(const std::filesystem::path& dir) {
    json vocab_json = json::parse(read_file(dir / "vocab.json"));
    SequenceData sd;
    sd.vocab.user_keys.push_back("");
    sd.vocab.item_keys.push_back("");

    std::map<UserId, std::string> users_by_id;
    for (auto& [key, id] : vocab_json.at("users").items())
        users_by_id[id.get<UserId>()] = key;
    std::map<ItemId, std::string> items_by_id;
    for (auto& [key, id] : vocab_json.at("items").items())
        items_by_id[id.get<ItemId>()] = key;
    for (auto& [id, key] : users_by_id) {
        require(id == static_cast<UserId>(sd.vocab.user_keys.size()),
                "vocab.json: user ids not dense");
        sd.vocab.user_id_of[key] = id;
        sd.vocab.user_keys.push_back(key);
    }
    for (auto& [id, key] : items_by_id) {
        require(id == static_cast<ItemId>(sd.vocab.item_keys.size()),
                "vocab.json: item ids not dense");
        sd.vocab.item_id_of[key] = id;
        sd.vocab.item_keys.push_back(key);
    }

    sd.sequences.resize(static_cast<size_t>(sd.vocab.num_users()));
    for (const std::string& line : read_lines(dir / "sequences.jsonl")) {
        if (line.empty()) continue;
        json j = json::parse(line);
        UserId u = j.at("user").get<UserId>();
        require(u >= 1 && u <= sd.vocab.num_users(), "sequences.jsonl: user id out of range");
        auto& seq = sd.sequences[static_cast<size_t>(u - 1)];
        seq.user_id = u;
        seq.items = j.at("items").get<std::vector<ItemId>>();
    }

    ItemCatalog cat;
    cat.entries.resize(static_cast<size_t>(sd.vocab.num_items()) + 1);
    for (const std::string& line : read_lines(dir / "catalog.norm.jsonl")) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ItemId v = j.at("item").get<ItemId>();
        require(v >= 1 && v <= sd.vocab.num_items(), "catalog.norm.jsonl: item id out of range");
        auto& e = cat.entries[static_cast<size_t>(v)];
        e.title = j.value("title", "");
        e.category = j.value("category", "");
        e.brand = j.value("brand", "");
        e.description = j.value("description", "");
    }
    return make_dataset(std::move(sd), std::move(cat));
}

}  // namespace seqcl::data
