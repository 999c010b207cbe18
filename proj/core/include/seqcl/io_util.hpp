#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "seqcl/common.hpp"

namespace seqcl {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Sidecar <artifact>.prov.json written next to every CLI artifact:
// sha256 of the artifact bytes plus the canonical config echo.
void write_provenance(const std::filesystem::path& artifact,
                      const std::string& config_echo);

// Explicit little-endian binary IO; file formats are byte-stable across hosts.
class BinWriter {
public:
    explicit BinWriter(const std::filesystem::path& path);
    void u8(uint8_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void f32(float v);
    void bytes(const void* data, size_t len);
    void close();

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class BinReader {
public:
    explicit BinReader(const std::filesystem::path& path);
    uint8_t u8();
    uint32_t u32();
    uint64_t u64();
    float f32();
    void bytes(void* data, size_t len);
    bool eof();

private:
    std::ifstream in_;
    std::filesystem::path path_;
};

}  // namespace seqcl
