#include "seqcl/checkpoint.hpp"

#include <algorithm>

#include "seqcl/io_util.hpp"

namespace seqcl::model {

namespace {
constexpr char kMagic[8] = {'S', 'Q', 'C', 'L', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

void write_string(BinWriter& w, const std::string& s) {
    w.u64(s.size());
    w.bytes(s.data(), s.size());
}

std::string read_string(BinReader& r) {
    uint64_t len = r.u64();
    require(len < (1ULL << 30), "checkpoint: unreasonable string length");
    std::string s(static_cast<size_t>(len), '\0');
    r.bytes(s.data(), static_cast<size_t>(len));
    return s;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NamedTensorsConst& tensors,
                     const std::string& config_echo) {
    BinWriter w(path);
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kVersion);
    write_string(w, config_echo);
    w.u32(static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, mat] : tensors) {
        write_string(w, name);
        w.u32(static_cast<uint32_t>(mat->rows()));
        w.u32(static_cast<uint32_t>(mat->cols()));
        for (Eigen::Index i = 0; i < mat->rows(); ++i)
            for (Eigen::Index j = 0; j < mat->cols(); ++j) w.f32((*mat)(i, j));
    }
    w.close();
}

std::string load_checkpoint(const std::filesystem::path& path, const NamedTensorsMut& tensors) {
    BinReader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    require(std::equal(magic, magic + 8, kMagic), "not a checkpoint file: ", path.string());
    require(r.u32() == kVersion, "unsupported checkpoint version: ", path.string());
    std::string echo = read_string(r);
    uint32_t count = r.u32();
    require(count == tensors.size(), "checkpoint tensor count mismatch: file has ", count,
            ", expected ", tensors.size());
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(r);
        require(name == tensors[i].first, "checkpoint tensor order mismatch: got '", name,
                "', expected '", tensors[i].first, "'");
        uint32_t rows = r.u32();
        uint32_t cols = r.u32();
        nn::Mat<float>* mat = tensors[i].second;
        require(static_cast<Eigen::Index>(rows) == mat->rows() &&
                    static_cast<Eigen::Index>(cols) == mat->cols(),
                "checkpoint tensor '", name, "' shape mismatch: file ", rows, "x", cols,
                ", expected ", mat->rows(), "x", mat->cols());
        for (Eigen::Index a = 0; a < mat->rows(); ++a)
            for (Eigen::Index b = 0; b < mat->cols(); ++b) (*mat)(a, b) = r.f32();
    }
    return echo;
}

std::string read_checkpoint_config(const std::filesystem::path& path) {
    BinReader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    require(std::equal(magic, magic + 8, kMagic), "not a checkpoint file: ", path.string());
    require(r.u32() == kVersion, "unsupported checkpoint version: ", path.string());
    return read_string(r);
}

}  // namespace seqcl::model
