#include "seqcl/io_util.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "seqcl/sha256.hpp"

namespace seqcl {

static_assert(std::endian::native == std::endian::little,
              "byte-swapping writer for big-endian hosts not implemented");

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open file: ", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write file: ", path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    require(out.good(), "write failed: ", path.string());
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open file: ", path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_provenance(const std::filesystem::path& artifact,
                      const std::string& config_echo) {
    nlohmann::json j;
    j["artifact"] = artifact.filename().string();
    j["content_sha256"] = Sha256::hash_hex(read_file(artifact));
    j["config_echo"] = config_echo;
    std::filesystem::path side = artifact;
    side += ".prov.json";
    write_file(side, j.dump(2) + "\n");
}

BinWriter::BinWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    require(out_.good(), "cannot write file: ", path.string());
}

void BinWriter::u8(uint8_t v) { bytes(&v, 1); }

void BinWriter::u32(uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    bytes(b, 4);
}

void BinWriter::u64(uint64_t v) {
    u32(uint32_t(v));
    u32(uint32_t(v >> 32));
}

void BinWriter::f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
}

void BinWriter::bytes(const void* data, size_t len) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    require(out_.good(), "write failed: ", path_.string());
}

void BinWriter::close() {
    out_.close();
    require(!out_.fail(), "close failed: ", path_.string());
}

BinReader::BinReader(const std::filesystem::path& path) : path_(path) {
    in_.open(path, std::ios::binary);
    require(in_.good(), "cannot open file: ", path.string());
}

uint8_t BinReader::u8() {
    uint8_t v;
    bytes(&v, 1);
    return v;
}

uint32_t BinReader::u32() {
    uint8_t b[4];
    bytes(b, 4);
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
           (uint32_t(b[3]) << 24);
}

uint64_t BinReader::u64() {
    uint64_t lo = u32();
    uint64_t hi = u32();
    return lo | (hi << 32);
}

float BinReader::f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void BinReader::bytes(void* data, size_t len) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    require(in_.gcount() == static_cast<std::streamsize>(len),
            "unexpected end of file: ", path_.string());
}

bool BinReader::eof() {
    return in_.peek() == std::ifstream::traits_type::eof();
}

}  // namespace seqcl
