#include "seqcl/embed_backend.hpp"

#include <cctype>
#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "seqcl/common.hpp"
#include "seqcl/rng.hpp"

namespace seqcl::sem {

uint64_t HashStubBackend::token_multiset_hash(const std::string& text) {
    // order-independent: sum of per-token hashes (duplicates still count)
    uint64_t acc = 0;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
        uint64_t h = 0xcbf29ce484222325ULL;
        bool any = false;
        while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) {
            unsigned char c = static_cast<unsigned char>(
                std::tolower(static_cast<unsigned char>(text[i])));
            h ^= c;
            h *= 0x100000001b3ULL;
            any = true;
            ++i;
        }
        if (any) {
            uint64_t s = h;
            acc += splitmix64(s);
        }
    }
    return acc;
}

std::vector<float> HashStubBackend::embed(const std::string& text) {
    uint64_t key = token_multiset_hash(text);
    DetRng rng(derive_seed(seed_, {key}));
    std::vector<float> v(static_cast<size_t>(dim_));
    double norm_sq = 0.0;
    for (auto& x : v) {
        double g = rng.gaussian();
        x = static_cast<float>(g);
        norm_sq += g * g;
    }
    double norm = std::sqrt(norm_sq);
    require(norm > 0.0, "hash stub produced a zero vector");
    for (auto& x : v) x = static_cast<float>(x / norm);
    return v;
}

ExternalBackend::ExternalBackend(std::string endpoint, std::string api_key, int dim,
                                 HttpTransport transport)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), dim_(dim),
      transport_(std::move(transport)) {
    require(!endpoint_.empty(), "external backend: endpoint not configured");
    if (!transport_) {
        transport_ = [](const std::string& url, const std::string& body,
                        const std::vector<Header>& headers) -> HttpResponse {
            size_t scheme_end = url.find("://");
            require(scheme_end != std::string::npos, "external backend: bad endpoint url: ", url);
            size_t path_start = url.find('/', scheme_end + 3);
            std::string host = url.substr(0, path_start);
            std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
            httplib::Client cli(host);
            cli.set_read_timeout(120, 0);
            httplib::Headers hs;
            for (const auto& [k, v] : headers) hs.emplace(k, v);
            auto res = cli.Post(path, hs, body, "application/json");
            if (!res) return {0, "", httplib::to_string(res.error())};
            return {res->status, res->body, ""};
        };
    }
}

std::vector<float> ExternalBackend::embed(const std::string& text) {
    nlohmann::json req;
    req["input"] = text;
    std::vector<Header> headers;
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
    HttpResponse res = transport_(endpoint_, req.dump(), headers);
    require(res.status == 200, "external backend: http status ", res.status, " ",
            res.status == 0 ? res.error : res.body);
    nlohmann::json parsed = nlohmann::json::parse(res.body);
    std::vector<float> v = parsed.at("embedding").get<std::vector<float>>();
    require(static_cast<int>(v.size()) == dim_, "external backend returned dimension ",
            v.size(), ", configured ", dim_);
    return v;
}

std::unique_ptr<EmbedBackend> make_backend(const std::string& kind, int dim, uint64_t seed,
                                           const std::string& endpoint,
                                           const std::string& api_key) {
    if (kind == "stub") return std::make_unique<HashStubBackend>(dim, seed);
    if (kind == "external") return std::make_unique<ExternalBackend>(endpoint, api_key, dim);
    fail("unknown embed backend kind: ", kind, " (expected stub|external)");
}

}  // namespace seqcl::sem
