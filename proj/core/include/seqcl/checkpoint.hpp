#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "seqcl/tape.hpp"

namespace seqcl::model {

using NamedTensorsConst = std::vector<std::pair<std::string, const nn::Mat<float>*>>;
using NamedTensorsMut = std::vector<std::pair<std::string, nn::Mat<float>*>>;

// Versioned header + config echo + named float32 tensors.
void save_checkpoint(const std::filesystem::path& path, const NamedTensorsConst& tensors,
                     const std::string& config_echo);

// Loads into pre-shaped tensors; the file must contain exactly the given
// names with matching shapes. Returns the stored config echo.
std::string load_checkpoint(const std::filesystem::path& path, const NamedTensorsMut& tensors);

// Reads just the config echo (used to size parameter shells before loading).
std::string read_checkpoint_config(const std::filesystem::path& path);

}  // namespace seqcl::model
