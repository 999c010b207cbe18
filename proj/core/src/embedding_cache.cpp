#include "seqcl/embedding_cache.hpp"

#include <cmath>

#include "seqcl/io_util.hpp"
#include "seqcl/sha256.hpp"

namespace seqcl::sem {

namespace {
constexpr char kMagic[8] = {'S', 'Q', 'C', 'L', 'E', 'M', 'B', '1'};
thread_local int g_guard_depth = 0;
}  // namespace

const char* to_string(OwnerKind kind) { return kind == OwnerKind::user ? "user" : "item"; }

OwnerKind owner_kind_from_string(const std::string& s) {
    if (s == "user") return OwnerKind::user;
    if (s == "item") return OwnerKind::item;
    fail("unknown owner kind: ", s, " (expected user|item)");
}

void EmbeddingCache::put(int32_t id, const std::vector<float>& vec) {
    require(!frozen_, "embedding cache is frozen; writes are rejected (id ", id, ")");
    require(id >= 1, "embedding cache: id must be >= 1, got ", id);
    require(static_cast<int>(vec.size()) == dim_, "embedding dimension mismatch: got ",
            vec.size(), ", cache expects ", dim_);
    double norm_sq = 0.0;
    for (float x : vec) {
        require(std::isfinite(x), "embedding for id ", id, " has non-finite entries");
        norm_sq += static_cast<double>(x) * x;
    }
    require(norm_sq > 0.0, "embedding for id ", id, " is the zero vector");
    vectors_[id] = vec;
}

const std::vector<float>& EmbeddingCache::get(int32_t id) const {
    auto it = vectors_.find(id);
    if (it == vectors_.end()) fail("embedding cache: no vector for id ", id);
    return it->second;
}

void EmbeddingCache::freeze(const std::vector<int32_t>& required_ids) {
    std::string missing;
    int missing_count = 0;
    for (int32_t id : required_ids) {
        if (!has(id)) {
            ++missing_count;
            if (missing_count <= 20) {
                if (!missing.empty()) missing += ",";
                missing += std::to_string(id);
            }
        }
    }
    require(missing_count == 0, "cannot freeze ", to_string(kind_), " cache: ", missing_count,
            " ids missing: ", missing);
    frozen_ = true;
}

std::vector<int32_t> EmbeddingCache::ids() const {
    std::vector<int32_t> out;
    out.reserve(vectors_.size());
    for (const auto& [id, _] : vectors_) out.push_back(id);
    return out;
}

std::string EmbeddingCache::checksum() const {
    Sha256 h;
    uint8_t kind_byte = static_cast<uint8_t>(kind_);
    h.update(&kind_byte, 1);
    uint32_t d = static_cast<uint32_t>(dim_);
    h.update(&d, 4);
    for (const auto& [id, vec] : vectors_) {
        h.update(&id, 4);
        h.update(vec.data(), vec.size() * sizeof(float));
    }
    return h.hex_digest();
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
    require(frozen_, "refusing to persist an unfrozen cache");
    BinWriter w(path);
    w.bytes(kMagic, sizeof(kMagic));
    w.u8(static_cast<uint8_t>(kind_));
    w.u32(static_cast<uint32_t>(dim_));
    w.u64(vectors_.size());
    w.u8(1);  // frozen flag
    for (const auto& [id, vec] : vectors_) {
        w.u32(static_cast<uint32_t>(id));
        for (float x : vec) w.f32(x);
    }
    w.close();
}

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path) {
    SemanticArtifactGuard::check("embedding cache");
    BinReader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    require(std::equal(magic, magic + 8, kMagic), "not an embedding cache file: ",
            path.string());
    OwnerKind kind = static_cast<OwnerKind>(r.u8());
    int dim = static_cast<int>(r.u32());
    uint64_t count = r.u64();
    uint8_t frozen = r.u8();
    require(frozen == 1, "cache file not marked frozen: ", path.string());
    EmbeddingCache cache(kind, dim);
    std::vector<float> vec(static_cast<size_t>(dim));
    for (uint64_t i = 0; i < count; ++i) {
        int32_t id = static_cast<int32_t>(r.u32());
        for (auto& x : vec) x = r.f32();
        cache.put(id, vec);
    }
    cache.frozen_ = true;
    return cache;
}

SemanticArtifactGuard::SemanticArtifactGuard() { ++g_guard_depth; }
SemanticArtifactGuard::~SemanticArtifactGuard() { --g_guard_depth; }
bool SemanticArtifactGuard::active() { return g_guard_depth > 0; }

void SemanticArtifactGuard::check(const char* what) {
    if (active()) {
        fail("semantic artifact (", what,
             ") accessed during inference; evaluation must not depend on caches or pools");
    }
}

}  // namespace seqcl::sem
