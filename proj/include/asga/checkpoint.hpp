#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "asga/config.hpp"

namespace asga {

// Checkpoint layout: one line of JSON (kind, per-section parameter names and
// shapes, free-form extra payload), then the raw values as little-endian
// 64-bit reals in declaration order. Loading restores values bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const std::vector<std::pair<std::string, const ParamSet*>>& sections,
                     const json& extra = json::object());

// The target ParamSets must already have the same parameter names and shapes
// (build the model first, then load); mismatches are format errors.
json load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind,
                     const std::vector<std::pair<std::string, ParamSet*>>& sections);

json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace asga
