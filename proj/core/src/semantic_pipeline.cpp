#include "seqcl/semantic_pipeline.hpp"

#include <fstream>

#include "seqcl/io_util.hpp"
#include "seqcl/log.hpp"

namespace seqcl::sem {

namespace {

constexpr char kJournalMagic[8] = {'S', 'Q', 'C', 'L', 'E', 'M', 'P', '1'};

std::filesystem::path journal_path(const std::filesystem::path& out) {
    std::filesystem::path p = out;
    p += ".partial";
    return p;
}

// Journal: header (magic, kind, dim) + appended (id, f32*dim) records.
// A torn tail record from an interrupt is detected by size and dropped.
void read_journal(const std::filesystem::path& path, OwnerKind kind, int dim,
                  EmbeddingCache& cache) {
    if (!std::filesystem::exists(path)) return;
    uint64_t file_size = std::filesystem::file_size(path);
    size_t header = sizeof(kJournalMagic) + 1 + 4;
    if (file_size < header) return;
    size_t rec_size = 4 + static_cast<size_t>(dim) * 4;
    uint64_t complete = (file_size - header) / rec_size;

    BinReader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    require(std::equal(magic, magic + 8, kJournalMagic), "not a cache journal: ", path.string());
    require(static_cast<OwnerKind>(r.u8()) == kind, "cache journal kind mismatch: ",
            path.string());
    require(static_cast<int>(r.u32()) == dim, "cache journal dimension mismatch: ",
            path.string());
    std::vector<float> vec(static_cast<size_t>(dim));
    for (uint64_t i = 0; i < complete; ++i) {
        int32_t id = static_cast<int32_t>(r.u32());
        for (auto& x : vec) x = r.f32();
        cache.put(id, vec);
    }
    if (complete > 0) {
        log_json("embed", "resuming from journal",
                 {{"path", path.string()}, {"records", complete}});
    }
}

class JournalWriter {
public:
    JournalWriter(const std::filesystem::path& path, OwnerKind kind, int dim) : path_(path) {
        bool fresh = !std::filesystem::exists(path);
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::binary | std::ios::app);
        require(out_.good(), "cannot open cache journal: ", path.string());
        if (fresh) {
            out_.write(kJournalMagic, sizeof(kJournalMagic));
            uint8_t k = static_cast<uint8_t>(kind);
            out_.put(static_cast<char>(k));
            uint32_t d = static_cast<uint32_t>(dim);
            uint8_t b[4] = {uint8_t(d), uint8_t(d >> 8), uint8_t(d >> 16), uint8_t(d >> 24)};
            out_.write(reinterpret_cast<const char*>(b), 4);
            out_.flush();
        }
    }

    void append(int32_t id, const std::vector<float>& vec) {
        uint32_t uid = static_cast<uint32_t>(id);
        uint8_t b[4] = {uint8_t(uid), uint8_t(uid >> 8), uint8_t(uid >> 16), uint8_t(uid >> 24)};
        out_.write(reinterpret_cast<const char*>(b), 4);
        out_.write(reinterpret_cast<const char*>(vec.data()),
                   static_cast<std::streamsize>(vec.size() * sizeof(float)));
        out_.flush();
        require(out_.good(), "cache journal write failed: ", path_.string());
    }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

}  // namespace

EmbeddingCache populate_cache(OwnerKind kind, const std::vector<int32_t>& ids, int dim,
                              const std::function<std::vector<float>(int32_t)>& make_vector,
                              const std::filesystem::path& out) {
    EmbeddingCache cache(kind, dim);
    std::optional<JournalWriter> journal;
    if (!out.empty()) {
        read_journal(journal_path(out), kind, dim, cache);
        journal.emplace(journal_path(out), kind, dim);
    }
    for (int32_t id : ids) {
        if (cache.has(id)) continue;
        std::vector<float> vec = make_vector(id);
        cache.put(id, vec);
        if (journal) journal->append(id, vec);
    }
    cache.freeze(ids);
    if (!out.empty()) {
        cache.save(out);
        std::filesystem::remove(journal_path(out));
    }
    return cache;
}

EmbeddingCache build_user_cache(const data::Dataset& ds, LlmClient& client,
                                EmbedBackend& backend, const PromptOptions& opts,
                                const std::filesystem::path& out) {
    std::vector<int32_t> ids;
    for (const auto& split : ds.splits) ids.push_back(split.user);
    return populate_cache(
        OwnerKind::user, ids, backend.dim(),
        [&](int32_t u) {
            const auto& split = ds.splits[static_cast<size_t>(u - 1)];
            PromptText prompt = build_user_prompt(split.train, ds.catalog, opts);
            return backend.embed(client.summarize(prompt));
        },
        out);
}

EmbeddingCache build_item_cache(const data::Dataset& ds, LlmClient& client,
                                EmbedBackend& backend, const PromptOptions& opts,
                                const std::filesystem::path& out) {
    std::vector<std::vector<ItemId>> train_seqs;
    train_seqs.reserve(ds.splits.size());
    for (const auto& split : ds.splits) train_seqs.push_back(split.train);

    std::vector<int32_t> ids;
    for (ItemId v = 1; v <= ds.num_items(); ++v) ids.push_back(v);
    return populate_cache(
        OwnerKind::item, ids, backend.dim(),
        [&](int32_t v) {
            auto containing = select_containing(train_seqs, v, opts.max_item_seqs);
            PromptText prompt = build_item_prompt(v, ds.catalog, containing, opts);
            return backend.embed(client.summarize(prompt));
        },
        out);
}

std::string user_raw_text(const data::Dataset& ds, UserId u) {
    const auto& split = ds.splits.at(static_cast<size_t>(u - 1));
    std::string text;
    for (ItemId v : split.train) {
        text += item_raw_text(ds, v);
        text += "\n";
    }
    return text;
}

std::string item_raw_text(const data::Dataset& ds, ItemId v) {
    const data::CatalogEntry& e = ds.catalog.of(v);
    std::string text = e.title;
    text += " ";
    text += e.category;
    text += " ";
    text += e.brand;
    text += " ";
    text += e.description;
    return text;
}

EmbeddingCache build_user_cache_raw(const data::Dataset& ds, EmbedBackend& backend,
                                    const std::filesystem::path& out) {
    std::vector<int32_t> ids;
    for (const auto& split : ds.splits) ids.push_back(split.user);
    return populate_cache(OwnerKind::user, ids, backend.dim(),
                          [&](int32_t u) { return backend.embed(user_raw_text(ds, u)); }, out);
}

EmbeddingCache build_item_cache_raw(const data::Dataset& ds, EmbedBackend& backend,
                                    const std::filesystem::path& out) {
    std::vector<int32_t> ids;
    for (ItemId v = 1; v <= ds.num_items(); ++v) ids.push_back(v);
    return populate_cache(OwnerKind::item, ids, backend.dim(),
                          [&](int32_t v) { return backend.embed(item_raw_text(ds, v)); }, out);
}

}  // namespace seqcl::sem
