#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "seqcl/embedding_cache.hpp"

namespace seqcl::retrieval {

struct Neighbor {
    int32_t id = 0;
    double score = 0.0;  // cosine, in [-1, 1]
};

struct CandidatePool {
    int32_t anchor_id = 0;
    std::vector<Neighbor> neighbors;  // non-increasing score, ties by ascending id

    size_t size() const { return neighbors.size(); }
    bool empty() const { return neighbors.empty(); }
};

// dot(a,b)/(|a||b|), clamped to [-1,1]; zero-norm inputs are an error.
double cosine(const std::vector<float>& a, const std::vector<float>& b);

// Exact top-k cosine search over a frozen cache. Immutable after
// construction; concurrent queries are safe.
class Index {
public:
    explicit Index(const sem::EmbeddingCache& cache);

    size_t size() const { return ids_.size(); }
    int dim() const { return dim_; }
    const std::vector<int32_t>& ids() const { return ids_; }

    // exactly the k best non-anchor entries (fewer when the population is
    // small); equal scores rank by ascending id
    CandidatePool topk(int32_t anchor_id, int k) const;

private:
    int dim_;
    std::vector<int32_t> ids_;                 // ascending
    std::vector<double> unit_vectors_;         // row-major, L2-normalized
    std::map<int32_t, size_t> row_of_;
};

using PoolMap = std::map<int32_t, CandidatePool>;

// One pool per anchor. Pools are computed once per cache; frozen embeddings
// make them invariant across training epochs.
PoolMap materialize_pools(const Index& index, int k);

void save_pools(const PoolMap& pools, const std::filesystem::path& path);
PoolMap load_pools(const std::filesystem::path& path);

}  // namespace seqcl::retrieval
