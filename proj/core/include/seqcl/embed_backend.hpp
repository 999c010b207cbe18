#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "seqcl/llm_client.hpp"

namespace seqcl::sem {

class EmbedBackend {
public:
    virtual ~EmbedBackend() = default;
    virtual std::vector<float> embed(const std::string& text) = 0;
    virtual int dim() const = 0;
    virtual std::string name() const = 0;
};

// Seeded pseudo-random unit vector keyed by a stable hash of the token
// multiset. Texts that differ only in token order, case, whitespace or
// punctuation map to the same vector; anything else is near-orthogonal.
class HashStubBackend : public EmbedBackend {
public:
    HashStubBackend(int dim, uint64_t seed) : dim_(dim), seed_(seed) {}
    std::vector<float> embed(const std::string& text) override;
    int dim() const override { return dim_; }
    std::string name() const override { return "stub"; }

    static uint64_t token_multiset_hash(const std::string& text);

private:
    int dim_;
    uint64_t seed_;
};

// Adapter for an embeddings HTTP endpoint ({"input": text} -> {"embedding":
// [...]}). Shares the injectable transport idiom with RemoteClient.
class ExternalBackend : public EmbedBackend {
public:
    ExternalBackend(std::string endpoint, std::string api_key, int dim,
                    HttpTransport transport = {});
    std::vector<float> embed(const std::string& text) override;
    int dim() const override { return dim_; }
    std::string name() const override { return "external"; }

private:
    std::string endpoint_;
    std::string api_key_;
    int dim_;
    HttpTransport transport_;
};

std::unique_ptr<EmbedBackend> make_backend(const std::string& kind, int dim, uint64_t seed,
                                           const std::string& endpoint = {},
                                           const std::string& api_key = {});

}  // namespace seqcl::sem
