#include "seqcl/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "seqcl/io_util.hpp"

namespace seqcl::retrieval {

namespace {
constexpr char kMagic[8] = {'S', 'Q', 'C', 'L', 'P', 'O', 'L', '1'};

double clamp_cosine(double v) { return std::min(1.0, std::max(-1.0, v)); }
}  // namespace

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    require(a.size() == b.size(), "cosine: dimension mismatch ", a.size(), " vs ", b.size());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    require(na > 0.0 && nb > 0.0, "cosine: zero-norm input");
    return clamp_cosine(dot / (std::sqrt(na) * std::sqrt(nb)));
}

Index::Index(const sem::EmbeddingCache& cache) : dim_(cache.dim()) {
    require(cache.frozen(), "retrieval index requires a frozen cache");
    ids_ = cache.ids();
    unit_vectors_.resize(ids_.size() * static_cast<size_t>(dim_));
    for (size_t row = 0; row < ids_.size(); ++row) {
        const std::vector<float>& v = cache.get(ids_[row]);
        double norm_sq = 0.0;
        for (float x : v) norm_sq += static_cast<double>(x) * x;
        double inv = 1.0 / std::sqrt(norm_sq);
        double* dst = unit_vectors_.data() + row * static_cast<size_t>(dim_);
        for (int i = 0; i < dim_; ++i) dst[i] = static_cast<double>(v[static_cast<size_t>(i)]) * inv;
        row_of_[ids_[row]] = row;
    }
}

CandidatePool Index::topk(int32_t anchor_id, int k) const {
    require(k >= 1, "topk: k must be >= 1");
    auto it = row_of_.find(anchor_id);
    if (it == row_of_.end()) fail("topk: unknown anchor id ", anchor_id);
    size_t anchor_row = it->second;
    const double* q = unit_vectors_.data() + anchor_row * static_cast<size_t>(dim_);

    std::vector<Neighbor> all;
    all.reserve(ids_.size() > 0 ? ids_.size() - 1 : 0);
    for (size_t row = 0; row < ids_.size(); ++row) {
        if (row == anchor_row) continue;
        const double* v = unit_vectors_.data() + row * static_cast<size_t>(dim_);
        double dot = 0.0;
        for (int i = 0; i < dim_; ++i) dot += q[i] * v[i];
        all.push_back({ids_[row], clamp_cosine(dot)});
    }
    size_t take = std::min(static_cast<size_t>(k), all.size());
    auto better = [](const Neighbor& a, const Neighbor& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<ptrdiff_t>(take), all.end(), better);
    all.resize(take);
    return {anchor_id, std::move(all)};
}

PoolMap materialize_pools(const Index& index, int k) {
    PoolMap pools;
    for (int32_t anchor : index.ids()) {
        pools.emplace(anchor, index.topk(anchor, k));
    }
    return pools;
}

void save_pools(const PoolMap& pools, const std::filesystem::path& path) {
    BinWriter w(path);
    w.bytes(kMagic, sizeof(kMagic));
    w.u64(pools.size());
    for (const auto& [anchor, pool] : pools) {
        w.u32(static_cast<uint32_t>(anchor));
        w.u32(static_cast<uint32_t>(pool.neighbors.size()));
        for (const Neighbor& nb : pool.neighbors) {
            w.u32(static_cast<uint32_t>(nb.id));
            w.f32(static_cast<float>(nb.score));
        }
    }
    w.close();
}

PoolMap load_pools(const std::filesystem::path& path) {
    sem::SemanticArtifactGuard::check("candidate pool file");
    BinReader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    require(std::equal(magic, magic + 8, kMagic), "not a pool file: ", path.string());
    uint64_t count = r.u64();
    PoolMap pools;
    for (uint64_t i = 0; i < count; ++i) {
        int32_t anchor = static_cast<int32_t>(r.u32());
        uint32_t n = r.u32();
        CandidatePool pool;
        pool.anchor_id = anchor;
        pool.neighbors.reserve(n);
        for (uint32_t j = 0; j < n; ++j) {
            int32_t id = static_cast<int32_t>(r.u32());
            float score = r.f32();
            pool.neighbors.push_back({id, static_cast<double>(score)});
        }
        pools.emplace(anchor, std::move(pool));
    }
    return pools;
}

}  // namespace seqcl::retrieval
