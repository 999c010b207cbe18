#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace seqcl {

// Streaming SHA-256 (FIPS 180-4). Used for fixture keys and artifact
// provenance hashes.
class Sha256 {
public:
    Sha256();
    void update(const void* data, size_t len);
    void update(std::string_view sv) { update(sv.data(), sv.size()); }
    // hex digest; the object is finalized and must not be updated again
    std::string hex_digest();

    static std::string hash_hex(std::string_view data);

private:
    void process_block(const uint8_t* block);

    uint32_t state_[8];
    uint64_t total_len_ = 0;
    uint8_t buffer_[64];
    size_t buffer_len_ = 0;
    bool finalized_ = false;
};

}  // namespace seqcl
