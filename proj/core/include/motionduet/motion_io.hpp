#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "motionduet/synthdata.hpp"

namespace motionduet::io {

/// Binary container: one line of compact JSON terminated by '\n', followed by
/// a payload of little-endian IEEE-754 float32 values.
struct Container {
  nlohmann::json header;
  std::vector<float> payload;
};

void writeContainer(const std::filesystem::path& path, const nlohmann::json& header, std::span<const double> values);

/// `expectedFloats` maps the parsed header to the payload length it promises.
Container readContainer(const std::filesystem::path& path,
                        const std::function<std::size_t(const nlohmann::json&)>& expectedFloats);

/// Header {dims, fps, frames, label}; payload is frames × dims row-major.
/// Values are stored as float32, so a write→read→write cycle is bit-exact.
void writeMotionFile(const std::filesystem::path& path, const synthdata::MotionSequence& motion);

/// Reads the binary container, or a CSV file (".csv": header row of column
/// names, one frame per row) with fps 20 and label -1.
synthdata::MotionSequence readMotionFile(const std::filesystem::path& path);
synthdata::MotionSequence readMotionCsv(const std::filesystem::path& path);

}  // namespace motionduet::io
