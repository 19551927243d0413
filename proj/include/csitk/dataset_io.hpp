#pragma once

#include <string>

#include <json.hpp>

#include "csitk/channel.hpp"

namespace csitk::io {

// CSID v1 container: <dir>/manifest.json + <dir>/data.bin. The manifest
// carries the magic "CSID", format version, the generating config, and one
// record per matrix with its byte offset into data.bin; data.bin holds each
// matrix as interleaved little-endian float32 (re, im) pairs, row-major
// [subcarrier][tx][rx], in manifest order.
inline constexpr const char* kDatasetMagic = "CSID";
inline constexpr int kDatasetVersion = 1;

nlohmann::json dataset_config_to_json(const channel::DatasetConfig& config);
channel::DatasetConfig dataset_config_from_json(const nlohmann::json& j);

void write_dataset(const std::string& dir, const channel::Dataset& ds);
channel::Dataset read_dataset(const std::string& dir);

}  // namespace csitk::io
