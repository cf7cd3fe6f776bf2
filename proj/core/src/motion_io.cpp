#include "motionduet/motion_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "motionduet/errors.hpp"

namespace motionduet::io {
namespace fs = std::filesystem;

void writeContainer(const fs::path& path, const nlohmann::json& header, std::span<const double> values) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  const std::string head = header.dump();
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.put('\n');
  std::vector<char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

Container readContainer(const fs::path& path, const std::function<std::size_t(const nlohmann::json&)>& expectedFloats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t newline = 0;
  while (newline < raw.size() && raw[newline] != '\n') ++newline;
  if (newline == raw.size()) throw FormatError(path.string() + ": missing header terminator (byte offset 0)");

  Container c;
  try {
    c.header = nlohmann::json::parse(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(newline));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": malformed header at byte offset " + std::to_string(e.byte) + ": " + e.what());
  }
  std::size_t floats = 0;
  try {
    floats = expectedFloats(c.header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": invalid header fields: " + e.what());
  }
  const std::size_t offset = newline + 1;
  const std::size_t expected = floats * 4;
  const std::size_t actual = raw.size() - offset;
  if (actual != expected) {
    throw FormatError(path.string() + ": payload at byte offset " + std::to_string(offset) + " expected " +
                      std::to_string(expected) + " bytes, found " + std::to_string(actual));
  }
  c.payload.resize(floats);
  for (std::size_t i = 0; i < floats; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[offset + i * 4 + b])) << (8 * b);
    c.payload[i] = std::bit_cast<float>(bits);
  }
  return c;
}

void writeMotionFile(const fs::path& path, const synthdata::MotionSequence& motion) {
  nlohmann::json header = {{"frames", motion.frames()},
                           {"dims", motion.dims()},
                           {"fps", motion.fps},
                           {"label", motion.label}};
  writeContainer(path, header, motion.values.data());
}

synthdata::MotionSequence readMotionFile(const fs::path& path) {
  if (path.extension() == ".csv") return readMotionCsv(path);
  const Container c = readContainer(path, [](const nlohmann::json& h) {
    return h.at("frames").get<std::size_t>() * h.at("dims").get<std::size_t>();
  });
  const auto frames = c.header.at("frames").get<std::size_t>();
  const auto dims = c.header.at("dims").get<std::size_t>();
  if (frames < 1) throw FormatError(path.string() + ": motion must have at least one frame");
  synthdata::MotionSequence m;
  m.values = numkit::Tensor({frames, dims}, std::vector<double>(c.payload.begin(), c.payload.end()));
  if (!m.values.allFinite()) throw FormatError(path.string() + ": payload contains non-finite values");
  m.fps = c.header.value("fps", 20.0);
  m.label = c.header.value("label", -1);
  return m;
}

synthdata::MotionSequence readMotionCsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV");
  std::size_t dims = 1;
  for (char ch : line) dims += ch == ',' ? 1 : 0;
  std::vector<double> values;
  std::size_t lineNo = 1;
  std::size_t frames = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw FormatError(path.string() + ": line " + std::to_string(lineNo) + ": not a number: '" + cell + "'");
      }
      ++count;
    }
    if (count != dims) {
      throw FormatError(path.string() + ": line " + std::to_string(lineNo) + ": expected " + std::to_string(dims) +
                        " columns, found " + std::to_string(count));
    }
    ++frames;
  }
  if (frames == 0) throw FormatError(path.string() + ": CSV has a header but no frames");
  synthdata::MotionSequence m;
  m.values = numkit::Tensor({frames, dims}, std::move(values), numkit::Tensor::Check::finite);
  return m;
}

}  // namespace motionduet::io
