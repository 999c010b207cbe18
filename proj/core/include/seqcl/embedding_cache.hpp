#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "seqcl/common.hpp"

namespace seqcl::sem {

enum class OwnerKind : uint8_t { user = 0, item = 1 };

const char* to_string(OwnerKind kind);
OwnerKind owner_kind_from_string(const std::string& s);

// Frozen map owner id -> d~-dimensional float vector. Writes are rejected
// after freeze(); training code only ever sees frozen caches.
class EmbeddingCache {
public:
    EmbeddingCache(OwnerKind kind, int dim) : kind_(kind), dim_(dim) {
        require(dim >= 1, "embedding cache: dimension must be >= 1");
    }

    OwnerKind kind() const { return kind_; }
    int dim() const { return dim_; }
    size_t size() const { return vectors_.size(); }
    bool frozen() const { return frozen_; }
    bool has(int32_t id) const { return vectors_.count(id) != 0; }

    // rejects non-finite entries, zero vectors, dimension mismatches, and
    // any write after freeze
    void put(int32_t id, const std::vector<float>& vec);

    const std::vector<float>& get(int32_t id) const;

    // fatal if any required id is missing (missing ids listed)
    void freeze(const std::vector<int32_t>& required_ids);

    std::vector<int32_t> ids() const;

    // canonical byte checksum; used to verify training never mutates a cache
    std::string checksum() const;

    void save(const std::filesystem::path& path) const;  // requires frozen
    static EmbeddingCache load(const std::filesystem::path& path);

private:
    OwnerKind kind_;
    int dim_;
    bool frozen_ = false;
    std::map<int32_t, std::vector<float>> vectors_;
};

// Scope guard asserting that no semantic artifact (cache or pool file) is
// loaded while it is alive. The evaluator holds one to enforce the
// inference-independence contract.
class SemanticArtifactGuard {
public:
    SemanticArtifactGuard();
    ~SemanticArtifactGuard();
    SemanticArtifactGuard(const SemanticArtifactGuard&) = delete;
    SemanticArtifactGuard& operator=(const SemanticArtifactGuard&) = delete;

    static bool active();
    static void check(const char* what);  // fails if a guard is active
};

}  // namespace seqcl::sem
